#include "ffgan/spectral_norm.hpp"

#include <cmath>

#include "ffgan/errors.hpp"

namespace ffgan {
namespace {

constexpr double kSigmaFloor = 1e-12;

// Normalizes `next` into `target` unless it has vanished (zero weight).
void assign_unit(torch::Tensor& target, const torch::Tensor& next) {
  const auto n = next.norm().item<double>();
  if (n > kSigmaFloor) target.copy_(next / n);
}

}  // namespace

SpectralState make_spectral_state(int64_t rows, int64_t cols, torch::TensorOptions options) {
  SpectralState s;
  s.u = torch::randn({rows}, options);
  s.u /= s.u.norm();
  s.v = torch::randn({cols}, options);
  s.v /= s.v.norm();
  return s;
}

torch::Tensor spectral_sigma(const torch::Tensor& weight, const SpectralState& state) {
  // Clones keep later in-place power iterations from invalidating this graph.
  auto w = weight.reshape({weight.size(0), -1});
  return torch::dot(state.u.clone(), torch::mv(w, state.v.clone()));
}

torch::Tensor spectral_normalize(const torch::Tensor& weight, SpectralState& state) {
  auto w = weight.reshape({weight.size(0), -1});
  if (state.u.size(0) != w.size(0) || state.v.size(0) != w.size(1)) {
    throw ConfigurationError("spectral_normalize: state does not match weight shape");
  }
  {
    torch::NoGradGuard no_grad;
    auto wd = w.detach();
    assign_unit(state.v, torch::mv(wd.t(), state.u));
    assign_unit(state.u, torch::mv(wd, state.v));
    ++state.iterations;
  }
  auto sigma = spectral_sigma(weight, state).clamp_min(kSigmaFloor);
  return weight / sigma;
}

SNConv2dImpl::SNConv2dImpl(int64_t in, int64_t out, int64_t kernel, int64_t stride, int64_t padding)
    : stride_(stride), padding_(padding) {
  // Same default init as torch::nn::Conv2d.
  torch::nn::Conv2d reference(torch::nn::Conv2dOptions(in, out, kernel));
  weight = register_parameter("weight", reference->weight.detach().clone());
  bias = register_parameter("bias", reference->bias.detach().clone());
  state = make_spectral_state(out, in * kernel * kernel);
  state.u = register_buffer("u", state.u);
  state.v = register_buffer("v", state.v);
}

torch::Tensor SNConv2dImpl::normalized_weight() {
  if (is_training()) return spectral_normalize(weight, state);
  return weight / spectral_sigma(weight, state).clamp_min(kSigmaFloor);
}

torch::Tensor SNConv2dImpl::forward(const torch::Tensor& x) {
  return torch::conv2d(x, normalized_weight(), bias, stride_, padding_);
}

}  // namespace ffgan
