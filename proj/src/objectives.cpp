#include "ffgan/objectives.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "ffgan/errors.hpp"

namespace ffgan {

torch::Tensor clamp_probability(const torch::Tensor& p) {
  return p.clamp(kProbabilityClamp, 1.0 - kProbabilityClamp);
}

torch::Tensor generator_stage_loss(const torch::Tensor& p_uncond, const torch::Tensor& p_cond) {
  return (-0.5 * torch::log(clamp_probability(p_uncond)) - 0.5 * torch::log(clamp_probability(p_cond))).mean();
}

torch::Tensor ca_regularizer(const torch::Tensor& mu, const torch::Tensor& log_var) {
  auto kl = 0.5 * (mu.pow(2) + torch::exp(log_var) - 1.0 - log_var);
  return kl.sum(-1).mean();
}

torch::Tensor damsm_word_loss(const torch::Tensor& regions, const torch::Tensor& words, const torch::Tensor& mask,
                              double gamma1, double gamma2, double gamma3) {
  if (regions.dim() != 3 || words.dim() != 3 || regions.size(0) != words.size(0) || regions.size(1) != words.size(1) ||
      mask.sizes() != torch::IntArrayRef({words.size(0), words.size(2)})) {
    throw ConfigurationError("damsm_word_loss: expected regions [B,F,N], words [B,F,L] and mask [B,L]");
  }
  const auto batch = regions.size(0);
  if (batch < 2) throw PreconditionError("damsm_word_loss: batch size must be at least 2");
  if (!mask.any(1).all().item<bool>()) throw PreconditionError("damsm_word_loss: caption without real words");
  const double inf = std::numeric_limits<double>::infinity();
  // [image i, caption j, word l, region n]
  auto scores = torch::einsum("ifn,jfl->ijln", {regions, words});
  auto word_mask = mask.view({1, batch, -1, 1});
  auto alpha = torch::softmax(scores.masked_fill(word_mask.logical_not(), -inf), 2);
  auto beta = torch::softmax(gamma1 * alpha, 3);
  auto context = torch::einsum("ijln,ifn->ijlf", {beta, regions});
  auto cosine = torch::cosine_similarity(context, words.transpose(1, 2).unsqueeze(0), 3, 1e-8);
  auto pair = torch::logsumexp((gamma2 * cosine).masked_fill(mask.unsqueeze(0).logical_not(), -inf), 2) / gamma2;
  auto logits = gamma3 * pair;
  auto target = torch::arange(batch, torch::TensorOptions().dtype(torch::kLong).device(regions.device()));
  return torch::nn::functional::cross_entropy(logits, target) +
         torch::nn::functional::cross_entropy(logits.transpose(0, 1), target);
}

torch::Tensor damsm_loss(const torch::Tensor& image_features, const torch::Tensor& sentence_features, double gamma) {
  if (image_features.dim() != 2 || image_features.sizes() != sentence_features.sizes()) {
    throw ConfigurationError("damsm_loss: feature batches must be [B,F] with equal shapes");
  }
  const auto batch = image_features.size(0);
  if (batch < 2) throw PreconditionError("damsm_loss: batch size must be at least 2");
  namespace F = torch::nn::functional;
  auto img = F::normalize(image_features, F::NormalizeFuncOptions().dim(1).eps(1e-8));
  auto txt = F::normalize(sentence_features, F::NormalizeFuncOptions().dim(1).eps(1e-8));
  auto scores = gamma * torch::mm(img, txt.t());
  auto labels = torch::arange(batch, torch::TensorOptions().dtype(torch::kInt64).device(scores.device()));
  return F::cross_entropy(scores, labels) + F::cross_entropy(scores.t(), labels);
}

torch::Tensor discriminator_stage_loss(const torch::Tensor& p_real_u, const torch::Tensor& p_fake_u,
                                       const torch::Tensor& p_real_c, const torch::Tensor& p_fake_c,
                                       const std::optional<torch::Tensor>& p_wrong_c) {
  auto bracket = torch::log(clamp_probability(p_real_u)) + torch::log(1.0 - clamp_probability(p_fake_u)) +
                 torch::log(clamp_probability(p_real_c)) + torch::log(1.0 - clamp_probability(p_fake_c));
  if (p_wrong_c) bracket = bracket + 0.5 * torch::log(1.0 - clamp_probability(*p_wrong_c));
  return (-0.5 * bracket).mean();
}

void LossBreakdown::finalize(const LossWeights& w) {
  generator_total = total_generator_loss<double>(generator_stages, ca, damsm, w);
  discriminator_total = total_discriminator_loss<double>(discriminator_stages);
}

bool LossBreakdown::finite() const {
  auto ok = [](double v) { return std::isfinite(v); };
  for (double v : generator_stages) {
    if (!ok(v)) return false;
  }
  for (double v : discriminator_stages) {
    if (!ok(v)) return false;
  }
  return ok(ca) && ok(damsm) && ok(generator_total) && ok(discriminator_total);
}

std::string LossLog::format_row(int64_t step, int64_t epoch, const LossBreakdown& b) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), "%lld,%lld,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g",
                static_cast<long long>(step), static_cast<long long>(epoch), b.generator_total,
                b.discriminator_total, b.generator_stages[0], b.generator_stages[1], b.generator_stages[2],
                b.discriminator_stages[0], b.discriminator_stages[1], b.discriminator_stages[2], b.ca, b.damsm);
  return buf;
}

}  // namespace ffgan
