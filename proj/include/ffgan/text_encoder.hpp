#pragma once

#include <optional>
#include <vector>

#include <torch/torch.h>

#include "ffgan/model_config.hpp"
#include "ffgan/vocabulary.hpp"

namespace ffgan {

// Per-word features [B,D_w,L]; columns past each caption's length are zero.
struct WordFeatures {
  torch::Tensor words;
  torch::Tensor mask;  // [B,L] bool

  torch::Tensor lengths() const { return mask.sum(1); }
};

struct TextFeatures {
  WordFeatures words;
  torch::Tensor sentence;  // [B,D_w]
};

// Packs captions into ids [B,L] (int64) and mask [B,L] (bool).
std::pair<torch::Tensor, torch::Tensor> stack_captions(const std::vector<Caption>& captions);

// Embedding followed by a bidirectional LSTM with D_w/2 units per direction.
// The backward direction runs over each caption's real tokens only.
class TextEncoderImpl : public torch::nn::Module {
 public:
  TextEncoderImpl(int64_t vocab_size, int64_t embed_dim, int64_t d_word);

  TextFeatures forward(const torch::Tensor& ids, const torch::Tensor& mask);

  int64_t d_word() const { return d_word_; }

 private:
  int64_t d_word_;
  torch::nn::Embedding embedding_{nullptr};
  torch::nn::LSTM forward_rnn_{nullptr};
  torch::nn::LSTM backward_rnn_{nullptr};
};
TORCH_MODULE(TextEncoder);

TextFeatures encode_text(const std::vector<Caption>& captions, TextEncoder& encoder);

struct CAParams {
  torch::Tensor mu;       // [B,D_ca]
  torch::Tensor log_var;  // [B,D_ca], clamped to [-10,10]
};

struct Augmented {
  torch::Tensor sentence;  // [B,D_ca]
  CAParams params;
};

// Conditioning augmentation: one linear layer to (mu, log_var), then a
// reparameterized sample mu + exp(log_var / 2) * noise.
class ConditioningAugmentationImpl : public torch::nn::Module {
 public:
  static constexpr double kLogVarBound = 10.0;

  ConditioningAugmentationImpl(int64_t d_word, int64_t d_ca);

  CAParams params(const torch::Tensor& sentence);

  // noise == std::nullopt selects the deterministic zero-noise path.
  Augmented forward(const torch::Tensor& sentence, const std::optional<torch::Tensor>& noise);

  int64_t d_ca() const { return d_ca_; }

 private:
  int64_t d_ca_;
  torch::nn::Linear fc_{nullptr};
};
TORCH_MODULE(ConditioningAugmentation);

Augmented condition_augment(const torch::Tensor& sentence, ConditioningAugmentation& ca,
                            const std::optional<torch::Tensor>& noise);

}  // namespace ffgan
