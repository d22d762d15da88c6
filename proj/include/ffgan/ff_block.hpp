#pragma once

#include <torch/torch.h>

#include "ffgan/attention.hpp"

namespace ffgan {

// Per-element scale and shift maps, both shaped like the feature map they modulate.
struct AffineParams {
  torch::Tensor scale;
  torch::Tensor shift;
};

// h * scale + shift, elementwise.
torch::Tensor apply_affine(const torch::Tensor& visual, const AffineParams& affine);

// 3x3 conv -> leaky ReLU(0.2) -> 3x3 conv, D_m channels throughout. The last
// conv starts at zero weight and the given bias, so the stack begins constant.
class AffineConvStackImpl : public torch::nn::Module {
 public:
  AffineConvStackImpl(int64_t channels, double initial_bias);
  torch::Tensor forward(const torch::Tensor& x);

  torch::nn::Conv2d first{nullptr};
  torch::nn::Conv2d last{nullptr};
};
TORCH_MODULE(AffineConvStack);

struct FFBlockOutput {
  torch::Tensor fused;  // h'
  AttentionWeights attention;
  torch::Tensor context;
};

// Word attention followed by a predicted affine transform of the visual
// features. Starts as the identity (scale 1, shift 0).
class FFBlockImpl : public torch::nn::Module {
 public:
  FFBlockImpl(int64_t d_word, int64_t d_model, NormAxis axis, bool channel_only = false);

  // With channel_only, the maps are averaged over space before broadcasting back.
  AffineParams predict_affine(const torch::Tensor& context);

  FFBlockOutput forward(const WordFeatures& words, const torch::Tensor& visual);

  WordAttention attention{nullptr};
  AffineConvStack scale_stack{nullptr};
  AffineConvStack shift_stack{nullptr};
  bool channel_only;
};
TORCH_MODULE(FFBlock);

inline AffineParams predict_affine(const torch::Tensor& context, FFBlock& block) {
  return block->predict_affine(context);
}

inline FFBlockOutput ff_block(const WordFeatures& words, const torch::Tensor& visual, FFBlock& block) {
  return block->forward(words, visual);
}

}  // namespace ffgan
