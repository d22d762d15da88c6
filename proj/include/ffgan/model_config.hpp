#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace ffgan {

// Which axis the word-attention softmax normalizes over.
enum class NormAxis : uint8_t {
  kWords,    // each sub-region distributes unit weight over the words
  kRegions,  // each word distributes unit weight over the sub-regions
};

// Which features a refinement stage attends over and modulates.
enum class AttentionSource : uint8_t {
  kChained,  // the previous stage's features
  kInitial,  // stage-0 features, upsampled to the previous stage's grid
};

std::string_view to_string(NormAxis a);
std::string_view to_string(AttentionSource s);
NormAxis parse_norm_axis(std::string_view s);
AttentionSource parse_attention_source(std::string_view s);

struct ModelConfig {
  int64_t vocab_size = 0;  // taken from the dataset vocabulary
  int64_t embed_dim = 32;
  int64_t d_word = 64;     // concatenated bi-LSTM hidden size
  int64_t d_ca = 16;       // augmented sentence size
  int64_t d_model = 16;    // visual feature channels
  int64_t d_z = 16;
  int64_t max_length = 12;
  int64_t base_resolution = 16;  // stage 0; doubles per stage
  int64_t d_disc = 8;            // first discriminator width
  int64_t d_image_feature = 64;  // matching / evaluation image feature size

  NormAxis attn_axis = NormAxis::kWords;
  AttentionSource attention_source = AttentionSource::kChained;
  bool use_ff_block = true;
  bool use_gsr = true;
  bool channel_only_affine = false;

  static constexpr int kNumStages = 3;

  int64_t resolution(int stage) const { return base_resolution << stage; }

  // Throws ConfigurationError on inconsistent settings.
  void validate() const;
};

}  // namespace ffgan
