#pragma once

#include <vector>

#include <torch/torch.h>

#include "ffgan/image_io.hpp"
#include "ffgan/model_config.hpp"
#include "ffgan/text_encoder.hpp"

namespace ffgan {

// Softmax scores between words (rows) and sub-regions (columns).
struct AttentionWeights {
  torch::Tensor weights;  // [B,L,N]; masked word rows are exactly zero
  NormAxis axis = NormAxis::kWords;
  int64_t height = 0;
  int64_t width = 0;
};

struct ContextResult {
  torch::Tensor context;  // [B,D_m,H,W]
  AttentionWeights attention;
};

// Word-context feature: project words with U_w, score against every
// sub-region, normalize along `axis`, and mix the projected words per region.
ContextResult word_context(const WordFeatures& words, const torch::Tensor& visual,
                           const torch::Tensor& projection, NormAxis axis);

// Sentence-context feature: project the augmented sentence with U_s, softmax
// its scores over the sub-regions, and scale the projection per region.
ContextResult sentence_context(const torch::Tensor& sentence, const torch::Tensor& visual,
                               const torch::Tensor& projection);

class WordAttentionImpl : public torch::nn::Module {
 public:
  WordAttentionImpl(int64_t d_word, int64_t d_model, NormAxis axis);
  ContextResult forward(const WordFeatures& words, const torch::Tensor& visual);

  torch::Tensor projection;  // U_w, [D_m,D_w]
  NormAxis axis;
};
TORCH_MODULE(WordAttention);

class SentenceAttentionImpl : public torch::nn::Module {
 public:
  SentenceAttentionImpl(int64_t d_ca, int64_t d_model);
  ContextResult forward(const torch::Tensor& sentence, const torch::Tensor& visual);

  torch::Tensor projection;  // U_s, [D_m,D_ca]
};
TORCH_MODULE(SentenceAttention);

// One grayscale map per real word of sample `index`: the word's row reshaped
// to H x W, min-max scaled to [0,255] (constant rows give all zeros), then
// nearest-neighbour upscaled to upscale_to x upscale_to.
std::vector<Image8> attention_heatmaps(const AttentionWeights& weights, const Caption& caption, int upscale_to,
                                       int64_t index = 0);

}  // namespace ffgan
