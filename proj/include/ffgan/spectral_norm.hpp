#pragma once

#include <torch/torch.h>

namespace ffgan {

// Power-iteration estimate of a weight's leading singular vectors.
struct SpectralState {
  torch::Tensor u;  // [rows], unit norm
  torch::Tensor v;  // [cols], unit norm
  int64_t iterations = 0;
};

SpectralState make_spectral_state(int64_t rows, int64_t cols, torch::TensorOptions options = {});

// One power-iteration step on `weight` (reshaped to rows x rest), updating
// `state` in place, then weight / sigma with sigma = u^T W v (floored at
// 1e-12). Gradients flow through weight and sigma, not through u and v.
torch::Tensor spectral_normalize(const torch::Tensor& weight, SpectralState& state);

// sigma = u^T W v for the current state, no update.
torch::Tensor spectral_sigma(const torch::Tensor& weight, const SpectralState& state);

// Conv2d whose weight is divided by its estimated spectral norm. The power
// iteration advances once per forward call in training mode only.
class SNConv2dImpl : public torch::nn::Module {
 public:
  SNConv2dImpl(int64_t in, int64_t out, int64_t kernel, int64_t stride = 1, int64_t padding = 0);

  torch::Tensor forward(const torch::Tensor& x);
  torch::Tensor normalized_weight();

  torch::Tensor weight;
  torch::Tensor bias;
  SpectralState state;

 private:
  int64_t stride_;
  int64_t padding_;
};
TORCH_MODULE(SNConv2d);

}  // namespace ffgan
