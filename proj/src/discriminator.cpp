#include "ffgan/discriminator.hpp"

#include <algorithm>
#include <bit>

#include "ffgan/errors.hpp"

namespace ffgan {

DiscriminatorImpl::DiscriminatorImpl(int64_t resolution, int64_t width, int64_t d_ca)
    : resolution_(resolution), d_ca_(d_ca) {
  if (resolution < 8 || !std::has_single_bit(static_cast<uint64_t>(resolution))) {
    throw ConfigurationError("discriminator: resolution must be a power of two >= 8");
  }
  const int n_down = std::countr_zero(static_cast<uint64_t>(resolution / 4));
  int64_t in = 3;
  int64_t channels = width;
  for (int k = 0; k < n_down; ++k) {
    down_->push_back(SNConv2d(in, channels, 4, 2, 1));
    in = channels;
    channels = std::min(channels * 2, width * 8);
  }
  register_module("down", down_);
  uncond_ = register_module("uncond", SNConv2d(in, 1, 4));
  cond_joint_ = register_module("cond_joint", SNConv2d(in + d_ca, in, 3, 1, 1));
  cond_out_ = register_module("cond_out", SNConv2d(in, 1, 4));
}

torch::Tensor DiscriminatorImpl::encode(const torch::Tensor& image) {
  if (image.dim() != 4 || image.size(1) != 3 || image.size(2) != resolution_ || image.size(3) != resolution_) {
    throw ConfigurationError("discriminator: expected images of resolution " + std::to_string(resolution_));
  }
  auto x = image;
  for (const auto& m : *down_) x = torch::leaky_relu(m->as<SNConv2d>()->forward(x), 0.2);
  return x;
}

DiscriminatorLogits DiscriminatorImpl::heads(const torch::Tensor& code, const torch::Tensor& sentence) {
  if (sentence.dim() != 2 || sentence.size(1) != d_ca_ || sentence.size(0) != code.size(0)) {
    throw ConfigurationError("discriminator: sentence must be [B,D_ca]");
  }
  auto uncond = uncond_(code).flatten();
  auto tiled = sentence.view({sentence.size(0), d_ca_, 1, 1}).expand({-1, -1, code.size(2), code.size(3)});
  auto joint = torch::leaky_relu(cond_joint_(torch::cat({code, tiled}, 1)), 0.2);
  return {uncond, cond_out_(joint).flatten()};
}

DiscriminatorLogits DiscriminatorImpl::forward(const torch::Tensor& image, const torch::Tensor& sentence) {
  return heads(encode(image), sentence);
}

ImageEncoderImpl::ImageEncoderImpl(int64_t d_feature) : d_feature_(d_feature) {
  const int64_t widths[] = {3, 16, 32, 64, 64};
  for (int k = 0; k < 4; ++k) {
    blocks_->push_back(torch::nn::Conv2d(torch::nn::Conv2dOptions(widths[k], widths[k + 1], 4).stride(2).padding(1)));
    blocks_->push_back(torch::nn::LeakyReLU(torch::nn::LeakyReLUOptions().negative_slope(0.2)));
  }
  register_module("blocks", blocks_);
  fc_ = register_module("fc", torch::nn::Linear(widths[4] * 4 * 4, d_feature));
  local_ = register_module("local", torch::nn::Conv2d(torch::nn::Conv2dOptions(widths[4], d_feature, 1)));
}

torch::Tensor ImageEncoderImpl::forward(const torch::Tensor& image) {
  if (image.dim() != 4 || image.size(1) != 3 || image.size(2) != kResolution || image.size(3) != kResolution) {
    throw ConfigurationError("image encoder: expected [B,3,64,64]");
  }
  return fc_(blocks_->forward(image).flatten(1));
}

std::pair<torch::Tensor, torch::Tensor> ImageEncoderImpl::encode(const torch::Tensor& image) {
  if (image.dim() != 4 || image.size(1) != 3 || image.size(2) != kResolution || image.size(3) != kResolution) {
    throw ConfigurationError("image encoder: expected [B,3,64,64]");
  }
  auto trunk = blocks_->forward(image);
  return {fc_(trunk.flatten(1)), local_(trunk).flatten(2)};
}

}  // namespace ffgan
