#include "ffgan/text_encoder.hpp"

#include "ffgan/errors.hpp"

namespace ffgan {

std::pair<torch::Tensor, torch::Tensor> stack_captions(const std::vector<Caption>& captions) {
  if (captions.empty()) throw PreconditionError("stack_captions: no captions");
  const auto len = captions.front().max_length();
  auto ids = torch::empty({static_cast<int64_t>(captions.size()), len}, torch::kInt64);
  auto mask = torch::empty({static_cast<int64_t>(captions.size()), len}, torch::kBool);
  auto ia = ids.accessor<int64_t, 2>();
  auto ma = mask.accessor<bool, 2>();
  for (size_t b = 0; b < captions.size(); ++b) {
    const auto& c = captions[b];
    if (c.max_length() != len) throw ConfigurationError("stack_captions: captions differ in max_length");
    if (c.length < 1) throw PreconditionError("stack_captions: empty caption");
    for (int64_t t = 0; t < len; ++t) {
      ia[static_cast<int64_t>(b)][t] = c.ids[static_cast<size_t>(t)];
      ma[static_cast<int64_t>(b)][t] = c.mask[static_cast<size_t>(t)];
    }
  }
  return {ids, mask};
}

TextEncoderImpl::TextEncoderImpl(int64_t vocab_size, int64_t embed_dim, int64_t d_word) : d_word_(d_word) {
  if (d_word <= 0 || d_word % 2 != 0) throw ConfigurationError("text encoder: d_word must be positive and even");
  embedding_ = register_module(
      "embedding", torch::nn::Embedding(torch::nn::EmbeddingOptions(vocab_size, embed_dim).padding_idx(0)));
  const auto opts = torch::nn::LSTMOptions(embed_dim, d_word / 2).batch_first(true);
  forward_rnn_ = register_module("forward_rnn", torch::nn::LSTM(opts));
  backward_rnn_ = register_module("backward_rnn", torch::nn::LSTM(opts));
}

TextFeatures TextEncoderImpl::forward(const torch::Tensor& ids, const torch::Tensor& mask) {
  const auto batch = ids.size(0);
  const auto len = ids.size(1);
  auto lengths = mask.sum(1);
  if ((lengths < 1).any().item<bool>()) throw PreconditionError("text encoder: caption without tokens");

  // Reverse each caption inside its own length; padding stays in place.
  auto t = torch::arange(len, torch::kInt64).unsqueeze(0).expand({batch, len});
  auto rev = torch::where(t < lengths.unsqueeze(1), lengths.unsqueeze(1) - 1 - t, t);

  auto emb = embedding_(ids);  // [B,L,E]
  auto emb_rev = emb.gather(1, rev.unsqueeze(2).expand_as(emb));

  auto fwd = std::get<0>(forward_rnn_(emb));                                     // [B,L,H]
  auto bwd_rev = std::get<0>(backward_rnn_(emb_rev));                            // [B,L,H]
  auto bwd = bwd_rev.gather(1, rev.unsqueeze(2).expand_as(bwd_rev));             // undo reversal

  auto maskf = mask.to(fwd.scalar_type()).unsqueeze(2);
  auto words = (torch::cat({fwd, bwd}, 2) * maskf).permute({0, 2, 1}).contiguous();  // [B,D_w,L]

  // Final hidden states: forward at the last real token, backward after its full pass.
  auto last = (lengths - 1).view({batch, 1, 1}).expand({batch, 1, fwd.size(2)});
  auto sentence = torch::cat({fwd.gather(1, last).squeeze(1), bwd_rev.gather(1, last).squeeze(1)}, 1);
  return {{words, mask}, sentence};
}

TextFeatures encode_text(const std::vector<Caption>& captions, TextEncoder& encoder) {
  auto [ids, mask] = stack_captions(captions);
  return encoder->forward(ids, mask);
}

ConditioningAugmentationImpl::ConditioningAugmentationImpl(int64_t d_word, int64_t d_ca) : d_ca_(d_ca) {
  fc_ = register_module("fc", torch::nn::Linear(d_word, 2 * d_ca));
}

CAParams ConditioningAugmentationImpl::params(const torch::Tensor& sentence) {
  if (!torch::isfinite(sentence).all().item<bool>()) throw NumericalError("conditioning augmentation: non-finite input");
  auto out = fc_(sentence);
  auto mu = out.narrow(1, 0, d_ca_);
  auto log_var = out.narrow(1, d_ca_, d_ca_).clamp(-kLogVarBound, kLogVarBound);
  return {mu, log_var};
}

Augmented ConditioningAugmentationImpl::forward(const torch::Tensor& sentence,
                                                const std::optional<torch::Tensor>& noise) {
  auto p = params(sentence);
  if (!noise) return {p.mu, p};
  if (noise->sizes() != p.mu.sizes()) throw ConfigurationError("conditioning augmentation: noise shape mismatch");
  return {p.mu + torch::exp(0.5 * p.log_var) * *noise, p};
}

Augmented condition_augment(const torch::Tensor& sentence, ConditioningAugmentation& ca,
                            const std::optional<torch::Tensor>& noise) {
  return ca->forward(sentence, noise);
}

}  // namespace ffgan
