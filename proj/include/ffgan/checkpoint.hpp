#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <torch/torch.h>

#include "ffgan/discriminator.hpp"
#include "ffgan/generator.hpp"
#include "ffgan/run_config.hpp"
#include "ffgan/text_encoder.hpp"
#include "ffgan/vocabulary.hpp"

namespace ffgan {

// Every network of a run. The text and image encoders come from the matching
// pretraining and stay frozen during adversarial training.
struct Networks {
  TextEncoder text{nullptr};
  ImageEncoder image{nullptr};
  Generator generator{nullptr};
  std::array<Discriminator, ModelConfig::kNumStages> discriminators{nullptr, nullptr, nullptr};

  static Networks create(const ModelConfig& cfg);
  void to(torch::Device device);
};

struct CheckpointManifest {
  int64_t epoch = 0;  // completed epochs
  int64_t step = 0;   // completed steps
  std::string config_hash;
  uint64_t seed = 0;
  std::string rng_digest;
  std::vector<std::string> files;
  std::string status = "ok";

  std::string serialize() const;
  static CheckpointManifest parse(const std::string& text);
};

using NamedModules = std::vector<std::pair<std::string, std::shared_ptr<torch::nn::Module>>>;

// Several modules in one archive, one nested entry per name.
void save_modules(const std::filesystem::path& path, const NamedModules& modules);
void load_modules(const std::filesystem::path& path, const NamedModules& modules);

// Per-network files: g0.pt (CA + stage 0), g1.pt, g2.pt, d0.pt..d2.pt,
// text_encoder.pt, image_encoder.pt, plus config.ini, vocab.tsv, manifest.txt.
void save_checkpoint(const std::filesystem::path& dir, const Networks& nets, const RunConfig& cfg,
                     const Vocabulary& vocab, CheckpointManifest manifest);

struct LoadedCheckpoint {
  std::filesystem::path dir;
  RunConfig config;
  Vocabulary vocab;
  Networks networks;
  CheckpointManifest manifest;
};

// Throws ConfigurationError when the directory is incomplete or the stored
// config does not hash to the manifest's config_hash.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir);

// Frozen matching encoders written by pretraining.
void save_matching_encoders(const std::filesystem::path& dir, TextEncoder& text, ImageEncoder& image,
                            const RunConfig& cfg, const Vocabulary& vocab);
void load_matching_encoders(const std::filesystem::path& dir, TextEncoder& text, ImageEncoder& image);

// Digest of the CPU generator state.
std::string rng_digest();

// Device named by RUN_DEVICE ("cpu" when unset).
torch::Device run_device();

}  // namespace ffgan
