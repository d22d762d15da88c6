#include "ffgan/ff_block.hpp"

#include "ffgan/errors.hpp"

namespace ffgan {

torch::Tensor apply_affine(const torch::Tensor& visual, const AffineParams& affine) {
  if (affine.scale.sizes() != visual.sizes() || affine.shift.sizes() != visual.sizes()) {
    throw ConfigurationError("apply_affine: scale/shift must match the feature map shape");
  }
  return visual * affine.scale + affine.shift;
}

AffineConvStackImpl::AffineConvStackImpl(int64_t channels, double initial_bias) {
  first = register_module("first", torch::nn::Conv2d(torch::nn::Conv2dOptions(channels, channels, 3).padding(1)));
  last = register_module("last", torch::nn::Conv2d(torch::nn::Conv2dOptions(channels, channels, 3).padding(1)));
  torch::NoGradGuard no_grad;
  last->weight.zero_();
  last->bias.fill_(initial_bias);
}

torch::Tensor AffineConvStackImpl::forward(const torch::Tensor& x) {
  return last(torch::leaky_relu(first(x), 0.2));
}

FFBlockImpl::FFBlockImpl(int64_t d_word, int64_t d_model, NormAxis axis, bool channel_only_)
    : channel_only(channel_only_) {
  attention = register_module("attention", WordAttention(d_word, d_model, axis));
  scale_stack = register_module("scale_stack", AffineConvStack(d_model, 1.0));
  shift_stack = register_module("shift_stack", AffineConvStack(d_model, 0.0));
}

AffineParams FFBlockImpl::predict_affine(const torch::Tensor& context) {
  if (context.dim() != 4 || context.size(1) != scale_stack->first->options.in_channels()) {
    throw ConfigurationError("predict_affine: context channel count mismatch");
  }
  if (!torch::isfinite(context).all().item<bool>()) throw NumericalError("predict_affine: non-finite context");
  auto scale = scale_stack(context);
  auto shift = shift_stack(context);
  if (channel_only) {
    scale = scale.mean({2, 3}, true).expand_as(context);
    shift = shift.mean({2, 3}, true).expand_as(context);
  }
  return {scale, shift};
}

FFBlockOutput FFBlockImpl::forward(const WordFeatures& words, const torch::Tensor& visual) {
  auto ctx = attention(words, visual);
  auto fused = apply_affine(visual, predict_affine(ctx.context));
  return {fused, ctx.attention, ctx.context};
}

}  // namespace ffgan
