#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ffgan/evaluate.hpp"
#include "ffgan/run_config.hpp"

namespace ffgan {

struct AblationVariant {
  std::string name;
  bool use_ff_block;
  bool use_gsr;
};

// baseline (concatenation fusion, no GSR), +ff_block, +gsr, full.
const std::vector<AblationVariant>& ablation_variants();

struct ExperimentRow {
  std::string label;
  RunConfig config;
  EvalReport report;
};

// Trains (or resumes) one run and evaluates its final checkpoint with the
// run seed as evaluation seed.
ExperimentRow train_and_evaluate(const RunConfig& cfg, const std::string& label);

// Every variant for every seed, all under base.out_dir/ablate/<variant>_s<seed>.
// Writes base.out_dir/ablate.csv.
std::vector<ExperimentRow> ablate(const RunConfig& base, const std::vector<uint64_t>& seeds,
                                  const std::vector<AblationVariant>& variants = ablation_variants());

// One run per lambda2 value with the base seed. Writes base.out_dir/sweep_lambda2.csv.
std::vector<ExperimentRow> sweep_lambda2(const RunConfig& base, const std::vector<double>& values);

inline constexpr const char* kAblationCsvHeader = "variant,use_ff_block,use_gsr,seed,epoch,fid,r_precision";
inline constexpr const char* kSweepCsvHeader = "lambda2,seed,epoch,fid,r_precision";

}  // namespace ffgan
