#pragma once

#include <optional>
#include <vector>

#include <torch/torch.h>

#include "ffgan/attention.hpp"
#include "ffgan/ff_block.hpp"
#include "ffgan/model_config.hpp"
#include "ffgan/text_encoder.hpp"

namespace ffgan {

struct StageOutput {
  torch::Tensor image;     // [B,3,R,R] in [-1,1]
  torch::Tensor features;  // [B,D_m,R,R], the pre-head features
  int stage_index = 0;
};

// Nearest x2 upsampling, 3x3 conv to 2*out channels, gated linear unit.
class UpBlockImpl : public torch::nn::Module {
 public:
  UpBlockImpl(int64_t in, int64_t out);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Conv2d conv_{nullptr};
};
TORCH_MODULE(UpBlock);

class ResBlockImpl : public torch::nn::Module {
 public:
  explicit ResBlockImpl(int64_t channels);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Conv2d gated_{nullptr};
  torch::nn::Conv2d out_{nullptr};
};
TORCH_MODULE(ResBlock);

// 3x3 conv to RGB followed by tanh.
class ImageHeadImpl : public torch::nn::Module {
 public:
  explicit ImageHeadImpl(int64_t channels);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Conv2d conv_{nullptr};
};
TORCH_MODULE(ImageHead);

// Stage 0: [S_ca, z] -> FC to 4x4x(8*D_m) -> upsampling blocks -> image head.
class InitialGeneratorImpl : public torch::nn::Module {
 public:
  explicit InitialGeneratorImpl(const ModelConfig& cfg);
  StageOutput forward(const torch::Tensor& sentence, const torch::Tensor& z);

 private:
  ModelConfig cfg_;
  torch::nn::Linear fc_{nullptr};
  torch::nn::ModuleList ups_;
  ImageHead head_{nullptr};
};
TORCH_MODULE(InitialGenerator);

struct RefineOutput {
  StageOutput stage;
  std::optional<AttentionWeights> word_attention;
  std::optional<AttentionWeights> sentence_attention;
};

// Refinement stage: FF-Block fusion (or plain concatenation of the word
// context when disabled), optional sentence context, 1x1 joint conv, two
// residual blocks, one upsampling block and an image head.
class RefineStageImpl : public torch::nn::Module {
 public:
  RefineStageImpl(const ModelConfig& cfg, int stage_index);

  // `source` is the map attended over and modulated; its grid sets the input resolution.
  RefineOutput forward(const torch::Tensor& source, const WordFeatures& words, const torch::Tensor& sentence);

  int stage_index() const { return stage_index_; }

  FFBlock ff{nullptr};
  WordAttention word_attention{nullptr};  // baseline fusion only
  SentenceAttention sentence_attention{nullptr};

 private:
  int stage_index_;
  torch::nn::Conv2d joint_{nullptr};
  ResBlock res1_{nullptr};
  ResBlock res2_{nullptr};
  UpBlock up_{nullptr};
  ImageHead head_{nullptr};
};
TORCH_MODULE(RefineStage);

struct PipelineOutput {
  std::vector<StageOutput> stages;
  Augmented augmented;
  std::vector<std::optional<AttentionWeights>> word_attention;      // per refinement stage
  std::vector<std::optional<AttentionWeights>> sentence_attention;  // per refinement stage
};

// CA, the initial stage and two refinement stages.
class GeneratorImpl : public torch::nn::Module {
 public:
  explicit GeneratorImpl(const ModelConfig& cfg);

  // ca_noise == nullopt uses the CA mean.
  PipelineOutput forward(const TextFeatures& text, const torch::Tensor& z,
                         const std::optional<torch::Tensor>& ca_noise);

  const ModelConfig& config() const { return cfg_; }

  ConditioningAugmentation ca{nullptr};
  InitialGenerator initial{nullptr};
  RefineStage refine1{nullptr};
  RefineStage refine2{nullptr};

 private:
  ModelConfig cfg_;
};
TORCH_MODULE(Generator);

StageOutput generate_initial(const torch::Tensor& sentence, const torch::Tensor& z, InitialGenerator& g);

// Throws PreconditionError when prev is already the last stage.
RefineOutput refine_stage(const StageOutput& prev, const WordFeatures& words, const torch::Tensor& sentence,
                          RefineStage& stage);

PipelineOutput forward_pipeline(const std::vector<Caption>& captions, const torch::Tensor& z, TextEncoder& encoder,
                                Generator& generator, const std::optional<torch::Tensor>& ca_noise);

}  // namespace ffgan
