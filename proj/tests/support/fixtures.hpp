#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "ffgan/model_config.hpp"
#include "ffgan/text_encoder.hpp"

namespace ffgan::testing {

inline torch::TensorOptions f64() { return torch::TensorOptions().dtype(torch::kFloat64); }

// Random word features with the given real lengths; padded columns are zero.
inline WordFeatures random_words(int64_t d_word, int64_t max_len, const std::vector<int64_t>& lengths,
                                 torch::TensorOptions opts = f64()) {
  const auto batch = static_cast<int64_t>(lengths.size());
  auto mask = torch::zeros({batch, max_len}, torch::kBool);
  for (int64_t b = 0; b < batch; ++b) mask[b].narrow(0, 0, lengths[static_cast<size_t>(b)]).fill_(true);
  auto words = torch::randn({batch, d_word, max_len}, opts) * mask.unsqueeze(1).to(opts.dtype());
  return {words, mask};
}

// A small model that keeps forward/backward passes cheap.
inline ModelConfig tiny_model(int64_t vocab_size = 30) {
  ModelConfig cfg;
  cfg.vocab_size = vocab_size;
  cfg.embed_dim = 8;
  cfg.d_word = 8;
  cfg.d_ca = 4;
  cfg.d_model = 4;
  cfg.d_z = 4;
  cfg.d_disc = 4;
  cfg.d_image_feature = 8;
  return cfg;
}

// Fresh, empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("ffgan_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace ffgan::testing
