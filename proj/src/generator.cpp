#include "ffgan/generator.hpp"

#include <algorithm>
#include <bit>

#include "ffgan/errors.hpp"

namespace ffgan {
namespace {

torch::nn::Conv2d conv3x3(int64_t in, int64_t out) {
  return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 3).padding(1));
}

}  // namespace

UpBlockImpl::UpBlockImpl(int64_t in, int64_t out) { conv_ = register_module("conv", conv3x3(in, 2 * out)); }

torch::Tensor UpBlockImpl::forward(const torch::Tensor& x) {
  auto up = torch::upsample_nearest2d(x, std::vector<int64_t>{x.size(2) * 2, x.size(3) * 2});
  return torch::glu(conv_(up), 1);
}

ResBlockImpl::ResBlockImpl(int64_t channels) {
  gated_ = register_module("gated", conv3x3(channels, 2 * channels));
  out_ = register_module("out", conv3x3(channels, channels));
}

torch::Tensor ResBlockImpl::forward(const torch::Tensor& x) { return x + out_(torch::glu(gated_(x), 1)); }

ImageHeadImpl::ImageHeadImpl(int64_t channels) { conv_ = register_module("conv", conv3x3(channels, 3)); }

torch::Tensor ImageHeadImpl::forward(const torch::Tensor& x) { return torch::tanh(conv_(x)); }

InitialGeneratorImpl::InitialGeneratorImpl(const ModelConfig& cfg) : cfg_(cfg) {
  const auto top = 8 * cfg.d_model;
  fc_ = register_module("fc", torch::nn::Linear(cfg.d_ca + cfg.d_z, 4 * 4 * top * 2));
  const int n_up = std::countr_zero(static_cast<uint64_t>(cfg.base_resolution / 4));
  int64_t channels = top;
  for (int k = 1; k <= n_up; ++k) {
    const auto next = k == n_up ? cfg.d_model : std::max(cfg.d_model, top >> k);
    ups_->push_back(UpBlock(channels, next));
    channels = next;
  }
  register_module("ups", ups_);
  head_ = register_module("head", ImageHead(cfg.d_model));
}

StageOutput InitialGeneratorImpl::forward(const torch::Tensor& sentence, const torch::Tensor& z) {
  if (sentence.dim() != 2 || sentence.size(1) != cfg_.d_ca || z.dim() != 2 || z.size(1) != cfg_.d_z ||
      z.size(0) != sentence.size(0)) {
    throw ConfigurationError("generate_initial: expected sentence [B,D_ca] and z [B,D_z]");
  }
  auto x = torch::glu(fc_(torch::cat({sentence, z}, 1)), 1).view({sentence.size(0), 8 * cfg_.d_model, 4, 4});
  for (const auto& up : *ups_) x = up->as<UpBlock>()->forward(x);
  return {head_(x), x, 0};
}

RefineStageImpl::RefineStageImpl(const ModelConfig& cfg, int stage_index) : stage_index_(stage_index) {
  int64_t joint_in = 0;
  if (cfg.use_ff_block) {
    ff = register_module("ff", FFBlock(cfg.d_word, cfg.d_model, cfg.attn_axis, cfg.channel_only_affine));
    joint_in += cfg.d_model;
  } else {
    word_attention = register_module("word_attention", WordAttention(cfg.d_word, cfg.d_model, cfg.attn_axis));
    joint_in += 2 * cfg.d_model;
  }
  if (cfg.use_gsr) {
    sentence_attention = register_module("sentence_attention", SentenceAttention(cfg.d_ca, cfg.d_model));
    joint_in += cfg.d_model;
  }
  joint_ = register_module("joint", torch::nn::Conv2d(torch::nn::Conv2dOptions(joint_in, cfg.d_model, 1)));
  res1_ = register_module("res1", ResBlock(cfg.d_model));
  res2_ = register_module("res2", ResBlock(cfg.d_model));
  up_ = register_module("up", UpBlock(cfg.d_model, cfg.d_model));
  head_ = register_module("head", ImageHead(cfg.d_model));
}

RefineOutput RefineStageImpl::forward(const torch::Tensor& source, const WordFeatures& words,
                                      const torch::Tensor& sentence) {
  RefineOutput out;
  std::vector<torch::Tensor> parts;
  if (ff) {
    auto fused = ff(words, source);
    parts.push_back(fused.fused);
    out.word_attention = fused.attention;
  } else {
    auto ctx = word_attention(words, source);
    parts.push_back(source);
    parts.push_back(ctx.context);
    out.word_attention = ctx.attention;
  }
  if (sentence_attention) {
    auto ctx = sentence_attention(sentence, source);
    parts.push_back(ctx.context);
    out.sentence_attention = ctx.attention;
  }
  auto x = joint_(torch::cat(parts, 1));
  x = up_(res2_(res1_(x)));
  out.stage = {head_(x), x, stage_index_};
  return out;
}

GeneratorImpl::GeneratorImpl(const ModelConfig& cfg) : cfg_(cfg) {
  cfg.validate();
  ca = register_module("ca", ConditioningAugmentation(cfg.d_word, cfg.d_ca));
  initial = register_module("initial", InitialGenerator(cfg));
  refine1 = register_module("refine1", RefineStage(cfg, 1));
  refine2 = register_module("refine2", RefineStage(cfg, 2));
}

PipelineOutput GeneratorImpl::forward(const TextFeatures& text, const torch::Tensor& z,
                                      const std::optional<torch::Tensor>& ca_noise) {
  PipelineOutput out;
  out.augmented = ca(text.sentence, ca_noise);
  const auto& s_ca = out.augmented.sentence;
  out.stages.push_back(generate_initial(s_ca, z, initial));

  for (auto* stage : {&refine1, &refine2}) {
    const auto& prev = out.stages.back();
    RefineOutput r;
    if (cfg_.attention_source == AttentionSource::kInitial && prev.stage_index > 0) {
      const auto& h0 = out.stages.front().features;
      auto source = torch::upsample_nearest2d(h0, std::vector<int64_t>{prev.features.size(2), prev.features.size(3)});
      r = (*stage)->forward(source, text.words, s_ca);
    } else {
      r = refine_stage(prev, text.words, s_ca, *stage);
    }
    out.stages.push_back(r.stage);
    out.word_attention.push_back(r.word_attention);
    out.sentence_attention.push_back(r.sentence_attention);
  }
  return out;
}

StageOutput generate_initial(const torch::Tensor& sentence, const torch::Tensor& z, InitialGenerator& g) {
  return g->forward(sentence, z);
}

RefineOutput refine_stage(const StageOutput& prev, const WordFeatures& words, const torch::Tensor& sentence,
                          RefineStage& stage) {
  if (prev.stage_index >= ModelConfig::kNumStages - 1) throw PreconditionError("refine_stage: no stage after the last");
  if (stage->stage_index() != prev.stage_index + 1) throw PreconditionError("refine_stage: stage index mismatch");
  return stage->forward(prev.features, words, sentence);
}

PipelineOutput forward_pipeline(const std::vector<Caption>& captions, const torch::Tensor& z, TextEncoder& encoder,
                                Generator& generator, const std::optional<torch::Tensor>& ca_noise) {
  auto text = encode_text(captions, encoder);
  return generator->forward(text, z, ca_noise);
}

}  // namespace ffgan
