#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ffgan/model_config.hpp"
#include "ffgan/objectives.hpp"

namespace ffgan {

struct RunConfig {
  ModelConfig model;

  // [data]
  std::string data_dir = "data/toyshapes";
  int64_t dataset_size = 5000;
  uint64_t data_seed = 1;

  // [objectives]
  LossWeights weights;
  double damsm_gamma = 10.0;
  bool mismatch_negatives = true;
  bool damsm_word_level = false;  // adds the word-level matching term

  // [train]
  std::string out_dir = "runs/full";
  std::string matching_dir = "runs/matching";
  double learning_rate = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  int64_t batch_size = 16;
  int64_t epochs = 60;
  int64_t max_steps = 0;  // 0: no limit
  uint64_t seed = 0;
  int64_t threads = 1;

  // [pretrain]
  int64_t pretrain_epochs = 20;
  double pretrain_learning_rate = 1e-3;
  int64_t pretrain_batch_size = 32;

  // [eval]
  int64_t eval_samples = 1000;
  int64_t pool_size = 10;
  int64_t r = 1;
  int64_t eval_seeds = 3;

  // Full-scale settings (64 -> 128 -> 256, D_w 256, D_ca 100, L 18).
  static RunConfig paper_preset(bool coco = false);

  // Sets "section.key" from its textual value; throws ConfigurationError on
  // unknown keys or unparsable values.
  void set(const std::string& dotted_key, const std::string& value);
  std::string get(const std::string& dotted_key) const;

  // Canonical "key = value" text with one [section] per module.
  std::string serialize() const;
  static RunConfig parse(const std::string& text);
  static RunConfig load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  // Hex FNV-1a of serialize().
  std::string hash() const;

  // Hash of everything that shapes a training trajectory; ignores the step
  // budget (epochs, max_steps), out_dir and the [eval] section so a run can be
  // extended or moved and still resume.
  std::string trajectory_hash() const;

  void validate() const;

  static std::vector<std::string> keys();
};

}  // namespace ffgan
