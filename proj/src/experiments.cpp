#include "ffgan/experiments.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>

#include "ffgan/errors.hpp"
#include "ffgan/trainer.hpp"

namespace ffgan {

const std::vector<AblationVariant>& ablation_variants() {
  static const std::vector<AblationVariant> kVariants = {
      {"baseline", false, false},
      {"ff_block", true, false},
      {"gsr", false, true},
      {"full", true, true},
  };
  return kVariants;
}

ExperimentRow train_and_evaluate(const RunConfig& cfg, const std::string& label) {
  Trainer trainer(cfg);
  trainer.run();
  auto ck = load_checkpoint(trainer.checkpoint_dir());
  ExperimentRow row{label, trainer.config(),
                    evaluate_model(ck, cfg.eval_samples, cfg.pool_size, static_cast<int>(cfg.r), cfg.seed)};
  std::cerr << label << ": " << row.report.summary() << '\n';
  return row;
}

std::vector<ExperimentRow> ablate(const RunConfig& base, const std::vector<uint64_t>& seeds,
                                  const std::vector<AblationVariant>& variants) {
  if (seeds.empty()) throw ConfigurationError("ablate: no seeds");
  const std::filesystem::path root(base.out_dir);
  std::filesystem::create_directories(root);
  std::ofstream csv(root / "ablate.csv", std::ios::binary);
  csv << kAblationCsvHeader << '\n';
  std::vector<ExperimentRow> rows;
  for (auto seed : seeds) {
    for (const auto& v : variants) {
      auto cfg = base;
      cfg.seed = seed;
      cfg.model.use_ff_block = v.use_ff_block;
      cfg.model.use_gsr = v.use_gsr;
      cfg.out_dir = (root / "ablate" / (v.name + "_s" + std::to_string(seed))).string();
      rows.push_back(train_and_evaluate(cfg, v.name));
      const auto& r = rows.back().report;
      char buf[256];
      std::snprintf(buf, sizeof(buf), "%s,%d,%d,%llu,%lld,%.6f,%.6f", v.name.c_str(), v.use_ff_block ? 1 : 0,
                    v.use_gsr ? 1 : 0, static_cast<unsigned long long>(seed), static_cast<long long>(r.epoch), r.fid,
                    r.r_precision);
      csv << buf << '\n';
      csv.flush();
    }
  }
  return rows;
}

std::vector<ExperimentRow> sweep_lambda2(const RunConfig& base, const std::vector<double>& values) {
  if (values.empty()) throw ConfigurationError("sweep: no lambda2 values");
  const std::filesystem::path root(base.out_dir);
  std::filesystem::create_directories(root);
  std::ofstream csv(root / "sweep_lambda2.csv", std::ios::binary);
  csv << kSweepCsvHeader << '\n';
  std::vector<ExperimentRow> rows;
  for (double value : values) {
    auto cfg = base;
    cfg.weights.lambda2 = value;
    char name[64];
    std::snprintf(name, sizeof(name), "lambda2_%g", value);
    cfg.out_dir = (root / "sweep" / name).string();
    rows.push_back(train_and_evaluate(cfg, name));
    const auto& r = rows.back().report;
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%g,%llu,%lld,%.6f,%.6f", value, static_cast<unsigned long long>(cfg.seed),
                  static_cast<long long>(r.epoch), r.fid, r.r_precision);
    csv << buf << '\n';
    csv.flush();
  }
  return rows;
}

}  // namespace ffgan
