#pragma once

#include <array>
#include <optional>
#include <ostream>
#include <span>
#include <string>

#include <torch/torch.h>

namespace ffgan {

inline constexpr double kProbabilityClamp = 1e-7;

torch::Tensor clamp_probability(const torch::Tensor& p);

// -1/2 log p_uncond - 1/2 log p_cond, batch mean.
torch::Tensor generator_stage_loss(const torch::Tensor& p_uncond, const torch::Tensor& p_cond);

// KL(N(mu, diag(exp(log_var))) || N(0, I)), summed over dims, batch mean.
torch::Tensor ca_regularizer(const torch::Tensor& mu, const torch::Tensor& log_var);

// Symmetric cross-modal cross-entropy on gamma * cosine similarity, with the
// matched pairs on the diagonal. Row and column terms are each batch means.
torch::Tensor damsm_loss(const torch::Tensor& image_features, const torch::Tensor& sentence_features,
                         double gamma = 10.0);

// Word-level matching term. regions [B,F,N] and words [B,F,L] with a [B,L] bool
// mask. For every image/caption pair each real word attends over the regions
// (softmax over words, then gamma1-sharpened softmax over regions); the pair
// score is log(sum_l exp(gamma2 * cos(word_l, context_l))) / gamma2, and the
// loss is the symmetric cross-entropy of gamma3 * score with matches on the diagonal.
inline constexpr double kDamsmGamma1 = 4.0;
inline constexpr double kDamsmGamma2 = 5.0;
torch::Tensor damsm_word_loss(const torch::Tensor& regions, const torch::Tensor& words, const torch::Tensor& mask,
                              double gamma1 = kDamsmGamma1, double gamma2 = kDamsmGamma2, double gamma3 = 10.0);

// -1/2 [log p_real_u + log(1 - p_fake_u) + log p_real_c + log(1 - p_fake_c)],
// batch mean. A mismatched-caption probability on real images, when given,
// adds 1/2 log(1 - p_wrong_c) inside the bracket (half the fake term's weight).
torch::Tensor discriminator_stage_loss(const torch::Tensor& p_real_u, const torch::Tensor& p_fake_u,
                                       const torch::Tensor& p_real_c, const torch::Tensor& p_fake_c,
                                       const std::optional<torch::Tensor>& p_wrong_c = std::nullopt);

struct LossWeights {
  double lambda1 = 1.0;
  double lambda2 = 5.0;
};

// Sum of stage terms plus lambda1 * ca + lambda2 * damsm; works on doubles
// and on tensors.
template <typename T>
T total_generator_loss(std::span<const T> stage_losses, const T& ca, const T& damsm, const LossWeights& w) {
  T total = ca * w.lambda1 + damsm * w.lambda2;
  for (const auto& s : stage_losses) total = total + s;
  return total;
}

template <typename T>
T total_discriminator_loss(std::span<const T> stage_losses) {
  T total = stage_losses.front() * 0.0;
  for (const auto& s : stage_losses) total = total + s;
  return total;
}

struct LossBreakdown {
  std::array<double, 3> generator_stages{};
  std::array<double, 3> discriminator_stages{};
  double ca = 0.0;
  double damsm = 0.0;
  double generator_total = 0.0;
  double discriminator_total = 0.0;

  // Recomputes both totals from the parts.
  void finalize(const LossWeights& w);
  bool finite() const;
};

// One CSV row per training step.
class LossLog {
 public:
  static constexpr const char* kHeader = "step,epoch,L_G,L_D,L_G0,L_G1,L_G2,L_D0,L_D1,L_D2,ca,damsm";

  static std::string format_row(int64_t step, int64_t epoch, const LossBreakdown& b);
};

}  // namespace ffgan
