#include "ffgan/attention.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ffgan/errors.hpp"

namespace ffgan {
namespace {

void check_visual(const torch::Tensor& visual, int64_t d_model) {
  if (visual.dim() != 4 || visual.size(1) != d_model) {
    throw ConfigurationError("attention: visual features must be [B," + std::to_string(d_model) + ",H,W]");
  }
}

}  // namespace

ContextResult word_context(const WordFeatures& words, const torch::Tensor& visual, const torch::Tensor& projection,
                           NormAxis axis) {
  const auto d_model = projection.size(0);
  check_visual(visual, d_model);
  if (words.words.size(1) != projection.size(1)) throw ConfigurationError("word_context: U_w does not match D_w");
  if (words.words.size(0) != visual.size(0)) throw ConfigurationError("word_context: batch size mismatch");
  if ((words.mask.sum(1) < 1).any().item<bool>()) throw PreconditionError("word_context: every word is masked");

  const auto batch = visual.size(0);
  const auto h = visual.size(2);
  const auto w = visual.size(3);
  auto regions = visual.reshape({batch, d_model, h * w});                 // [B,D_m,N]
  auto projected = torch::matmul(projection, words.words);               // [B,D_m,L]
  auto scores = torch::bmm(projected.transpose(1, 2), regions);           // [B,L,N]
  auto mask = words.mask.unsqueeze(2);                                    // [B,L,1]

  torch::Tensor weights;
  if (axis == NormAxis::kWords) {
    auto masked = scores.masked_fill(mask.logical_not(), -std::numeric_limits<double>::infinity());
    weights = torch::softmax(masked, 1);
  } else {
    weights = torch::softmax(scores, 2) * mask.to(scores.scalar_type());
  }
  auto context = torch::bmm(projected, weights).reshape({batch, d_model, h, w});
  return {context, {weights, axis, h, w}};
}

ContextResult sentence_context(const torch::Tensor& sentence, const torch::Tensor& visual,
                               const torch::Tensor& projection) {
  const auto d_model = projection.size(0);
  check_visual(visual, d_model);
  if (sentence.dim() != 2 || sentence.size(1) != projection.size(1)) {
    throw ConfigurationError("sentence_context: U_s does not match the sentence size");
  }
  if (!torch::isfinite(sentence).all().item<bool>() || !torch::isfinite(visual).all().item<bool>()) {
    throw NumericalError("sentence_context: non-finite input");
  }
  const auto batch = visual.size(0);
  const auto h = visual.size(2);
  const auto w = visual.size(3);
  auto regions = visual.reshape({batch, d_model, h * w});
  auto projected = torch::matmul(sentence, projection.t());                        // [B,D_m]
  auto scores = torch::bmm(projected.unsqueeze(1), regions);                       // [B,1,N]
  auto weights = torch::softmax(scores, 2);
  auto context = (projected.unsqueeze(2) * weights).reshape({batch, d_model, h, w});
  return {context, {weights, NormAxis::kRegions, h, w}};
}

WordAttentionImpl::WordAttentionImpl(int64_t d_word, int64_t d_model, NormAxis axis_) : axis(axis_) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(d_word));
  projection = register_parameter("projection", torch::empty({d_model, d_word}).uniform_(-bound, bound));
}

ContextResult WordAttentionImpl::forward(const WordFeatures& words, const torch::Tensor& visual) {
  return word_context(words, visual, projection, axis);
}

SentenceAttentionImpl::SentenceAttentionImpl(int64_t d_ca, int64_t d_model) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(d_ca));
  projection = register_parameter("projection", torch::empty({d_model, d_ca}).uniform_(-bound, bound));
}

ContextResult SentenceAttentionImpl::forward(const torch::Tensor& sentence, const torch::Tensor& visual) {
  return sentence_context(sentence, visual, projection);
}

std::vector<Image8> attention_heatmaps(const AttentionWeights& weights, const Caption& caption, int upscale_to,
                                       int64_t index) {
  const auto h = weights.height;
  const auto w = weights.width;
  if (upscale_to < h || upscale_to < w) throw ConfigurationError("attention_heatmaps: upscale target too small");
  auto rows = weights.weights[index].detach().to(torch::kCPU, torch::kFloat64).contiguous();
  auto a = rows.accessor<double, 2>();
  const auto n_words = std::min<int64_t>(caption.length, rows.size(0));

  std::vector<Image8> maps;
  for (int64_t i = 0; i < n_words; ++i) {
    double lo = a[i][0];
    double hi = a[i][0];
    for (int64_t j = 1; j < h * w; ++j) {
      lo = std::min(lo, a[i][j]);
      hi = std::max(hi, a[i][j]);
    }
    Image8 img;
    img.width = upscale_to;
    img.height = upscale_to;
    img.channels = 1;
    img.pixels.assign(static_cast<size_t>(upscale_to) * upscale_to, 0);
    if (hi > lo) {
      for (int y = 0; y < upscale_to; ++y) {
        for (int x = 0; x < upscale_to; ++x) {
          const auto sy = static_cast<int64_t>(y) * h / upscale_to;
          const auto sx = static_cast<int64_t>(x) * w / upscale_to;
          const double v = (a[i][sy * w + sx] - lo) / (hi - lo);
          img.at(y, x, 0) = static_cast<uint8_t>(std::lround(v * 255.0));
        }
      }
    }
    maps.push_back(std::move(img));
  }
  return maps;
}

}  // namespace ffgan
