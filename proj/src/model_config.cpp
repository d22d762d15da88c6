#include "ffgan/model_config.hpp"

#include <bit>

#include "ffgan/errors.hpp"

namespace ffgan {

std::string_view to_string(NormAxis a) { return a == NormAxis::kWords ? "words" : "regions"; }

std::string_view to_string(AttentionSource s) { return s == AttentionSource::kChained ? "chained" : "initial"; }

NormAxis parse_norm_axis(std::string_view s) {
  if (s == "words") return NormAxis::kWords;
  if (s == "regions") return NormAxis::kRegions;
  throw ConfigurationError("unknown attention axis: " + std::string(s));
}

AttentionSource parse_attention_source(std::string_view s) {
  if (s == "chained") return AttentionSource::kChained;
  if (s == "initial") return AttentionSource::kInitial;
  throw ConfigurationError("unknown attention source: " + std::string(s));
}

void ModelConfig::validate() const {
  if (vocab_size < 3) throw ConfigurationError("vocab_size must cover pad, unk and at least one token");
  if (d_word <= 0 || d_word % 2 != 0) throw ConfigurationError("d_word must be positive and even");
  if (embed_dim <= 0 || d_ca <= 0 || d_model <= 0 || d_z <= 0 || d_disc <= 0 || d_image_feature <= 0) {
    throw ConfigurationError("model widths must be positive");
  }
  if (max_length < 1) throw ConfigurationError("max_length must be positive");
  if (base_resolution < 8 || !std::has_single_bit(static_cast<uint64_t>(base_resolution))) {
    throw ConfigurationError("base_resolution must be a power of two >= 8");
  }
}

}  // namespace ffgan
