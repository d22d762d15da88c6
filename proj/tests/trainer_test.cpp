#include <gtest/gtest.h>

#include <fstream>
#include <regex>

#include "ffgan/checkpoint.hpp"
#include "ffgan/errors.hpp"
#include "ffgan/evaluate.hpp"
#include "ffgan/experiments.hpp"
#include "ffgan/trainer.hpp"
#include "support/fixtures.hpp"

namespace ffgan {
namespace {

namespace fs = std::filesystem;

std::vector<std::string> lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

// 76 records: ids 5, 11, ..., 71 are test, leaving 64 train records.
class TrainerTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = testing::scratch_dir("trainer");
    toyshapes::generate_dataset(76, 4, root_ / "data");
    auto cfg = base();
    cfg.pretrain_epochs = 1;
    pretrain_matching(cfg);
  }

  static RunConfig base() {
    RunConfig cfg;
    cfg.model = testing::tiny_model(0);
    cfg.data_dir = (root_ / "data").string();
    cfg.matching_dir = (root_ / "matching").string();
    cfg.batch_size = 8;
    cfg.pretrain_batch_size = 16;
    cfg.epochs = 1;
    cfg.eval_samples = 24;
    cfg.pool_size = 5;
    cfg.eval_seeds = 2;
    return cfg;
  }

  static RunConfig in(const std::string& name) {
    auto cfg = base();
    cfg.out_dir = (root_ / name).string();
    fs::remove_all(cfg.out_dir);
    return cfg;
  }

  static fs::path root_;
};

fs::path TrainerTest::root_;

TEST_F(TrainerTest, OneEpochIsEightSteps) {
  Trainer t(in("one_epoch"));
  EXPECT_EQ(t.steps_per_epoch(), 8);
  int64_t calls = 0;
  auto summary = t.run([&](int64_t step, const LossBreakdown& b) {
    EXPECT_EQ(step, calls++);
    EXPECT_TRUE(b.finite());
  });
  EXPECT_EQ(summary.steps, 8);
  EXPECT_EQ(summary.epochs_completed, 1);
  auto rows = lines(t.loss_csv());
  ASSERT_EQ(rows.size(), 9u);
  EXPECT_EQ(rows[0], LossLog::kHeader);
  for (size_t i = 1; i < rows.size(); ++i) EXPECT_EQ(rows[i].substr(0, rows[i].find(',')), std::to_string(i - 1));
  auto m = CheckpointManifest::parse(testing::read_file(t.checkpoint_dir() / "manifest.txt"));
  EXPECT_EQ(m.epoch, 1);
  EXPECT_EQ(m.step, 8);
  EXPECT_EQ(m.status, "ok");
  for (const char* f : {"g0.pt", "g1.pt", "g2.pt", "d0.pt", "d1.pt", "d2.pt", "text_encoder.pt", "image_encoder.pt",
                        "config.ini", "vocab.tsv", "manifest.txt"}) {
    EXPECT_TRUE(fs::exists(t.checkpoint_dir() / f)) << f;
  }
}

TEST_F(TrainerTest, SameSeedGivesIdenticalLossCsv) {
  auto a = in("det_a");
  auto b = in("det_b");
  auto c = in("det_c");
  c.seed = 1;
  Trainer(a).run();
  Trainer(b).run();
  Trainer(c).run();
  const auto la = testing::read_file(fs::path(a.out_dir) / "losses.csv");
  EXPECT_EQ(la, testing::read_file(fs::path(b.out_dir) / "losses.csv"));
  EXPECT_NE(la, testing::read_file(fs::path(c.out_dir) / "losses.csv"));
}

TEST_F(TrainerTest, ResumeContinuesTheStepIndexExactly) {
  auto split = in("resume_split");
  Trainer(split).run();
  split.epochs = 2;
  {
    Trainer t(split);
    EXPECT_EQ(t.completed_steps(), 8);
    EXPECT_EQ(t.completed_epochs(), 1);
    t.run();
  }
  auto straight = in("resume_straight");
  straight.epochs = 2;
  Trainer(straight).run();
  auto rows = lines(fs::path(split.out_dir) / "losses.csv");
  ASSERT_EQ(rows.size(), 17u);
  for (size_t i = 1; i < rows.size(); ++i) EXPECT_EQ(rows[i].substr(0, rows[i].find(',')), std::to_string(i - 1));
  EXPECT_EQ(rows, lines(fs::path(straight.out_dir) / "losses.csv"));
}

TEST_F(TrainerTest, RowsPastTheCheckpointAreDroppedOnResume) {
  auto cfg = in("truncate");
  cfg.epochs = 2;
  cfg.max_steps = 11;  // one checkpoint at step 8, then three more steps
  Trainer(cfg).run();
  EXPECT_EQ(lines(fs::path(cfg.out_dir) / "losses.csv").size(), 12u);
  cfg.max_steps = 0;
  Trainer t(cfg);
  EXPECT_EQ(t.completed_steps(), 8);
  EXPECT_EQ(lines(t.loss_csv()).size(), 9u);
  t.run();
  EXPECT_EQ(lines(t.loss_csv()).size(), 17u);
}

TEST_F(TrainerTest, ResumeRejectsAnotherModel) {
  auto cfg = in("mismatch");
  Trainer(cfg).run();
  cfg.model.d_model = 6;
  EXPECT_THROW(Trainer{cfg}, ConfigurationError);
}

TEST_F(TrainerTest, NonFiniteLossAbortsWithALoadableDump) {
  auto cfg = in("nan");
  cfg.learning_rate = 1e30;
  Trainer t(cfg);
  int64_t steps = 0;
  EXPECT_THROW(t.run([&](int64_t, const LossBreakdown&) { ++steps; }), NumericalError);
  EXPECT_LT(steps, 8);
  // The failing step is never logged.
  EXPECT_EQ(static_cast<int64_t>(lines(t.loss_csv()).size()), steps + 1);
  auto dump = load_checkpoint(t.diagnostic_dir());
  EXPECT_EQ(dump.manifest.status.rfind("diagnostic:", 0), 0u) << dump.manifest.status;
  EXPECT_EQ(dump.manifest.step, steps);
  EXPECT_EQ(dump.config.hash(), t.config().hash());
}

TEST_F(TrainerTest, MissingInputsAreConfigurationErrors) {
  auto no_data = in("no_data");
  no_data.data_dir = (root_ / "absent").string();
  EXPECT_THROW(Trainer{no_data}, ConfigurationError);
  auto no_matching = in("no_matching");
  no_matching.matching_dir = (root_ / "absent").string();
  EXPECT_THROW(Trainer{no_matching}, ConfigurationError);
}

TEST_F(TrainerTest, WordLevelMatchingNeedsMatchingEncodersTrainedWithIt) {
  auto cfg = in("word_level");
  cfg.damsm_word_level = true;
  EXPECT_THROW(Trainer{cfg}, ConfigurationError);
  cfg.matching_dir = (root_ / "matching_word").string();
  cfg.pretrain_epochs = 1;
  pretrain_matching(cfg);
  Trainer t(cfg);
  auto summary = t.run([](int64_t, const LossBreakdown& b) { EXPECT_TRUE(b.finite()); });
  EXPECT_EQ(summary.steps, 8);
}

TEST_F(TrainerTest, CheckpointReproducesTheGenerator) {
  auto cfg = in("reload");
  Trainer t(cfg);
  t.run();
  auto ck = load_checkpoint(t.checkpoint_dir());
  EXPECT_EQ(ck.manifest.config_hash, ck.config.hash());
  auto store = open_dataset(cfg);
  auto batch = store.batch({0, 1, 2}, 16);
  auto z = torch::randn({3, cfg.model.d_z});
  t.networks().generator->eval();
  ck.networks.generator->eval();
  torch::NoGradGuard g;
  auto a = forward_pipeline(batch.captions, z, t.networks().text, t.networks().generator, std::nullopt);
  auto b = forward_pipeline(batch.captions, z, ck.networks.text, ck.networks.generator, std::nullopt);
  EXPECT_TRUE(torch::equal(a.stages[2].image, b.stages[2].image));

  // A tampered config no longer matches the manifest hash.
  const auto copy = root_ / "tampered";
  fs::remove_all(copy);
  fs::copy(t.checkpoint_dir(), copy);
  std::ofstream(copy / "config.ini", std::ios::app) << "[train]\nepochs = 99\n";
  EXPECT_THROW(load_checkpoint(copy), ConfigurationError);
}

TEST_F(TrainerTest, EvaluationAndDumpsRun) {
  auto cfg = in("eval");
  Trainer t(cfg);
  t.run();
  auto ck = load_checkpoint(t.checkpoint_dir());
  auto report = evaluate_model(ck, 24, 5, 1, 0);
  EXPECT_TRUE(std::isfinite(report.fid));
  EXPECT_GE(report.fid, 0.0);
  EXPECT_GE(report.r_precision, 0.0);
  EXPECT_LE(report.r_precision, 1.0);
  EXPECT_EQ(report.n_samples, 24);
  EXPECT_EQ(report.pool_size, 5);
  EXPECT_EQ(report.epoch, 1);
  EXPECT_TRUE(std::regex_match(report.csv_row(), std::regex("[^,]+,1,[0-9.e+-]+,[0-9.e+-]+,24,5")))
      << report.csv_row();
  auto again = evaluate_model(ck, 24, 5, 1, 0);
  EXPECT_EQ(again.fid, report.fid);
  EXPECT_EQ(again.r_precision, report.r_precision);

  auto agg = evaluate_seeds(ck, 24, 5, 1, 0, 2);
  EXPECT_EQ(agg.runs.size(), 2u);
  EXPECT_GE(agg.fid_std, 0.0);

  auto grid = sample_grid(ck, {"a small red circle at the center on a blue background", "green square"}, 3);
  EXPECT_EQ(grid.channels, 3);
  EXPECT_GT(grid.width, 3 * 64);
  EXPECT_GT(grid.height, 2 * 64);

  auto out = root_ / "attn";
  fs::remove_all(out);
  auto files = dump_attention(ck, "a large blue square", 1, out);
  EXPECT_EQ(files.size(), 8u);  // 4 words x 2 refinement stages
  EXPECT_TRUE(fs::exists(out / "1_0_a.png"));
  EXPECT_TRUE(fs::exists(out / "2_3_square.png"));

  auto grounding = attention_grounding(ck, 10, 0);
  EXPECT_EQ(grounding.captions, 10);
  EXPECT_GE(grounding.rate(), 0.0);
  auto dist = stage_distances(ck, 10, 0);
  ASSERT_EQ(dist.size(), 3u);
  for (double d : dist) EXPECT_TRUE(std::isfinite(d));

  EXPECT_THROW(evaluate_model(ck, 24, 200, 1, 0), ConfigurationError);
}

TEST_F(TrainerTest, AblationWritesOneRowPerVariantAndSeed) {
  auto cfg = in("ablate");
  auto rows = ablate(cfg, {0});
  ASSERT_EQ(rows.size(), 4u);
  auto csv = lines(fs::path(cfg.out_dir) / "ablate.csv");
  ASSERT_EQ(csv.size(), 5u);
  EXPECT_EQ(csv[0], kAblationCsvHeader);
  EXPECT_EQ(csv[1].rfind("baseline,0,0,0,1,", 0), 0u) << csv[1];
  EXPECT_EQ(csv[4].rfind("full,1,1,0,1,", 0), 0u) << csv[4];

  auto sweep = in("sweep");
  auto srows = sweep_lambda2(sweep, {1.0, 2.0});
  ASSERT_EQ(srows.size(), 2u);
  auto scsv = lines(fs::path(sweep.out_dir) / "sweep_lambda2.csv");
  ASSERT_EQ(scsv.size(), 3u);
  EXPECT_EQ(scsv[0], kSweepCsvHeader);
}

}  // namespace
}  // namespace ffgan
