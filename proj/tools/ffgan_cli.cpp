// Command-line front end: gen-data, pretrain, train, sample, dump-attn,
// evaluate, ablate, sweep.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <torch/torch.h>

#include "ffgan/errors.hpp"
#include "ffgan/evaluate.hpp"
#include "ffgan/experiments.hpp"
#include "ffgan/run_config.hpp"
#include "ffgan/toyshapes.hpp"
#include "ffgan/trainer.hpp"

namespace {

struct CommonOptions {
  std::string config_path;
  std::string preset = "desk";
  std::vector<std::string> overrides;

  ffgan::RunConfig resolve() const {
    ffgan::RunConfig cfg;
    if (preset == "paper") {
      cfg = ffgan::RunConfig::paper_preset(false);
    } else if (preset == "paper-coco") {
      cfg = ffgan::RunConfig::paper_preset(true);
    } else if (preset != "desk") {
      throw ffgan::ConfigurationError("unknown preset: " + preset);
    }
    if (!config_path.empty()) cfg = ffgan::RunConfig::load(config_path);
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ffgan::ConfigurationError("--set expects section.key=value, got " + kv);
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    cfg.validate();
    torch::set_num_threads(static_cast<int>(cfg.threads));
    return cfg;
  }
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("-c,--config", opts.config_path, "Config file (key = value with [sections])");
  cmd->add_option("--preset", opts.preset, "desk | paper | paper-coco (ignored with --config)")
      ->check(CLI::IsMember({"desk", "paper", "paper-coco"}));
  cmd->add_option("-s,--set", opts.overrides, "Override, e.g. --set train.epochs=5");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FF-GAN text-to-image toolkit"};
  app.require_subcommand(1);
  CommonOptions common;

  auto* gen = app.add_subcommand("gen-data", "Render the shapes-and-captions dataset");
  add_common(gen, common);

  auto* pretrain = app.add_subcommand("pretrain", "Pretrain the text/image matching encoders");
  add_common(pretrain, common);

  auto* train = app.add_subcommand("train", "Adversarial training (resumes from the last checkpoint)");
  add_common(train, common);

  std::string checkpoint;
  uint64_t seed = 0;
  std::vector<std::string> captions;
  std::string out;

  auto* sample = app.add_subcommand("sample", "Write a per-stage image grid for captions");
  sample->add_option("--checkpoint", checkpoint)->required();
  sample->add_option("--caption", captions)->required();
  sample->add_option("--seed", seed);
  sample->add_option("-o,--out", out)->required();

  auto* dump = app.add_subcommand("dump-attn", "Write word attention heatmaps for stages 1 and 2");
  dump->add_option("--checkpoint", checkpoint)->required();
  dump->add_option("--caption", captions)->required()->expected(1);
  dump->add_option("--seed", seed);
  dump->add_option("-o,--out", out)->required();

  int64_t samples = 0;
  int64_t pool = 0;
  int64_t eval_seeds = 0;
  auto* evaluate = app.add_subcommand("evaluate", "FID and R-precision of a checkpoint");
  evaluate->add_option("--checkpoint", checkpoint)->required();
  evaluate->add_option("--samples", samples, "Default: eval.samples from the checkpoint config");
  evaluate->add_option("--pool", pool, "Default: eval.pool_size");
  evaluate->add_option("--seeds", eval_seeds, "Default: eval.seeds");
  evaluate->add_option("--seed", seed);
  evaluate->add_option("--csv", out, "Append report rows to this CSV");

  std::vector<uint64_t> seeds{0, 1, 2};
  auto* ablate = app.add_subcommand("ablate", "Baseline / +FF-Block / +GSR / full comparison");
  add_common(ablate, common);
  ablate->add_option("--seeds", seeds)->delimiter(',');

  std::vector<double> values{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  auto* sweep = app.add_subcommand("sweep", "One run per lambda2 value");
  add_common(sweep, common);
  sweep->add_option("--values", values)->delimiter(',');

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      auto cfg = common.resolve();
      auto manifest = ffgan::toyshapes::generate_dataset(cfg.dataset_size, cfg.data_seed, cfg.data_dir);
      std::cout << "wrote " << manifest.records.size() << " records to " << cfg.data_dir << '\n';
    } else if (pretrain->parsed()) {
      auto s = ffgan::pretrain_matching(common.resolve());
      std::cout << "pretrained " << s.steps << " steps, final matching loss " << s.final_loss << '\n';
    } else if (train->parsed()) {
      ffgan::Trainer trainer(common.resolve());
      auto s = trainer.run([&](int64_t step, const ffgan::LossBreakdown& b) {
        if (step % 50 == 0) std::cerr << "step " << step << " L_G " << b.generator_total << " L_D " << b.discriminator_total << '\n';
      });
      std::cout << "trained to epoch " << s.epochs_completed << " (" << s.steps << " steps); losses in "
                << trainer.loss_csv().string() << '\n';
    } else if (sample->parsed()) {
      auto ck = ffgan::load_checkpoint(checkpoint);
      ffgan::write_png(out, ffgan::sample_grid(ck, captions, seed));
      std::cout << "wrote " << out << '\n';
    } else if (dump->parsed()) {
      auto ck = ffgan::load_checkpoint(checkpoint);
      for (const auto& p : ffgan::dump_attention(ck, captions.front(), seed, out)) std::cout << p.string() << '\n';
    } else if (evaluate->parsed()) {
      auto ck = ffgan::load_checkpoint(checkpoint);
      const auto& cfg = ck.config;
      auto agg = ffgan::evaluate_seeds(ck, samples ? samples : cfg.eval_samples, pool ? pool : cfg.pool_size,
                                       static_cast<int>(cfg.r), seed, eval_seeds ? eval_seeds : cfg.eval_seeds);
      for (const auto& r : agg.runs) std::cout << r.summary() << '\n';
      std::cout << agg.summary() << '\n';
      if (!out.empty()) {
        const bool fresh = !std::filesystem::exists(out);
        std::ofstream csv(out, std::ios::app);
        if (fresh) csv << ffgan::EvalReport::kCsvHeader << '\n';
        for (const auto& r : agg.runs) csv << r.csv_row() << '\n';
      }
    } else if (ablate->parsed()) {
      auto rows = ffgan::ablate(common.resolve(), seeds);
      std::cout << "wrote " << rows.size() << " rows to " << (std::filesystem::path(rows.front().config.out_dir).parent_path().parent_path() / "ablate.csv").string() << '\n';
    } else if (sweep->parsed()) {
      auto cfg = common.resolve();
      auto rows = ffgan::sweep_lambda2(cfg, values);
      std::cout << "wrote " << rows.size() << " rows to " << (std::filesystem::path(cfg.out_dir) / "sweep_lambda2.csv").string() << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
