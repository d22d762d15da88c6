#pragma once

#include <utility>
#include <vector>

#include <torch/torch.h>

#include "ffgan/spectral_norm.hpp"

namespace ffgan {

struct DiscriminatorLogits {
  torch::Tensor uncond;  // [B]
  torch::Tensor cond;    // [B]
};

// Spectrally normalized strided 4x4 convs down to a 4x4 grid, followed by an
// unconditional head and a sentence-conditioned head.
class DiscriminatorImpl : public torch::nn::Module {
 public:
  DiscriminatorImpl(int64_t resolution, int64_t width, int64_t d_ca);

  // [B,C,4,4] image code shared by both heads.
  torch::Tensor encode(const torch::Tensor& image);
  DiscriminatorLogits heads(const torch::Tensor& code, const torch::Tensor& sentence);
  DiscriminatorLogits forward(const torch::Tensor& image, const torch::Tensor& sentence);

  int64_t resolution() const { return resolution_; }

 private:
  int64_t resolution_;
  int64_t d_ca_;
  torch::nn::ModuleList down_;
  SNConv2d uncond_{nullptr};
  SNConv2d cond_joint_{nullptr};
  SNConv2d cond_out_{nullptr};
};
TORCH_MODULE(Discriminator);

inline DiscriminatorLogits discriminate(const torch::Tensor& image, const torch::Tensor& sentence,
                                        Discriminator& d) {
  return d->forward(image, sentence);
}

// Strided conv encoder mapping 64x64 images to a feature vector; serves as the
// image side of the matching loss and as the evaluation feature extractor.
class ImageEncoderImpl : public torch::nn::Module {
 public:
  static constexpr int64_t kResolution = 64;

  explicit ImageEncoderImpl(int64_t d_feature);
  torch::Tensor forward(const torch::Tensor& image);
  // Global feature [B,F] and 4x4 region features [B,F,16] from one pass.
  std::pair<torch::Tensor, torch::Tensor> encode(const torch::Tensor& image);

  int64_t d_feature() const { return d_feature_; }

 private:
  int64_t d_feature_;
  torch::nn::Sequential blocks_;
  torch::nn::Linear fc_{nullptr};
  torch::nn::Conv2d local_{nullptr};
};
TORCH_MODULE(ImageEncoder);

}  // namespace ffgan
