#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include <torch/torch.h>

#include "ffgan/checkpoint.hpp"
#include "ffgan/objectives.hpp"
#include "ffgan/run_config.hpp"
#include "ffgan/toyshapes.hpp"

namespace ffgan {

// Loads the dataset and vocabulary named by cfg.data_dir and records the
// vocabulary size in cfg.model. Throws ConfigurationError when missing.
toyshapes::ImageStore open_dataset(RunConfig& cfg);

struct PretrainSummary {
  int64_t steps = 0;
  double final_loss = 0.0;
};

// Trains the text and image encoders with the matching loss and writes them
// to cfg.matching_dir.
PretrainSummary pretrain_matching(RunConfig cfg);

struct TrainSummary {
  int64_t epochs_completed = 0;
  int64_t steps = 0;
  LossBreakdown last;
};

// Alternating discriminator / generator updates over the train split.
// Checkpoints to <out_dir>/checkpoint after every epoch and resumes from it.
// Per-step losses go to <out_dir>/losses.csv.
class Trainer {
 public:
  explicit Trainer(RunConfig cfg);

  TrainSummary run(const std::function<void(int64_t step, const LossBreakdown&)>& on_step = {});

  int64_t steps_per_epoch() const;
  int64_t completed_steps() const { return step_; }
  int64_t completed_epochs() const { return epoch_; }
  const RunConfig& config() const { return cfg_; }
  Networks& networks() { return nets_; }

  std::filesystem::path checkpoint_dir() const;
  std::filesystem::path diagnostic_dir() const;
  std::filesystem::path loss_csv() const;

 private:
  LossBreakdown train_step(const std::vector<int64_t>& indices, uint64_t step_seed);
  void save(const std::filesystem::path& dir, const std::string& status);
  [[noreturn]] void abort_non_finite(const std::string& what);
  void resume();

  RunConfig cfg_;
  toyshapes::ImageStore data_;
  torch::Device device_;
  Networks nets_;
  std::unique_ptr<torch::optim::Adam> g_optim_;
  std::vector<std::unique_ptr<torch::optim::Adam>> d_optims_;
  int64_t epoch_ = 0;
  int64_t step_ = 0;
};

}  // namespace ffgan
