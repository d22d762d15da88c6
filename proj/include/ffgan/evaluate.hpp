#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ffgan/checkpoint.hpp"
#include "ffgan/image_io.hpp"
#include "ffgan/metrics.hpp"
#include "ffgan/toyshapes.hpp"

namespace ffgan {

struct EvalReport {
  std::string checkpoint;
  int64_t epoch = 0;
  double fid = 0.0;
  double r_precision = 0.0;
  int64_t n_samples = 0;
  int64_t pool_size = 0;
  uint64_t seed = 0;

  static constexpr const char* kCsvHeader = "checkpoint,epoch,fid,r_precision,n_samples,pool_size";
  std::string csv_row() const;
  std::string summary() const;
};

struct EvalAggregate {
  std::vector<EvalReport> runs;
  double fid_mean = 0.0;
  double fid_std = 0.0;
  double r_precision_mean = 0.0;
  double r_precision_std = 0.0;

  std::string summary() const;
};

// Generated stage-2 images for test captions, their captions and records.
struct TestSamples {
  torch::Tensor images;  // [n,3,R,R]
  std::vector<int64_t> records;
  std::vector<int> caption_choice;
  PipelineOutput last_chunk;
};

// Generates n_samples images, cycling through the test split.
TestSamples sample_test_set(LoadedCheckpoint& ck, const toyshapes::Manifest& manifest, int64_t n_samples,
                            uint64_t seed, int64_t chunk = 50);

// FID of generated stage-2 images against the test split's real images, and
// R-precision with 1 matched + (pool_size - 1) mismatched test captions per
// generated image. Mismatched captions come from records with another spec.
EvalReport evaluate_model(LoadedCheckpoint& ck, int64_t n_samples, int64_t pool_size, int r, uint64_t seed);
EvalReport evaluate_model(const std::filesystem::path& checkpoint, int64_t n_samples, int64_t pool_size, int r,
                          uint64_t seed);

// Mean and standard deviation over `seeds` consecutive evaluation seeds.
EvalAggregate evaluate_seeds(LoadedCheckpoint& ck, int64_t n_samples, int64_t pool_size, int r, uint64_t first_seed,
                             int64_t seeds);

// Per-caption stage images, laid out one row per caption, stages left to right,
// each upscaled to the last stage's resolution.
Image8 sample_grid(LoadedCheckpoint& ck, const std::vector<std::string>& captions, uint64_t seed);

// Writes <stage>_<wordindex>_<token>.png for refinement stages 1 and 2.
std::vector<std::filesystem::path> dump_attention(LoadedCheckpoint& ck, const std::string& caption, uint64_t seed,
                                                  const std::filesystem::path& out_dir);

struct GroundingResult {
  int64_t captions = 0;
  int64_t grounded = 0;  // mean weight inside the shape mask > mean outside
  double rate() const { return captions ? static_cast<double>(grounded) / static_cast<double>(captions) : 0.0; }
};

// Checks the stage-2 word-attention map of the shape-color word against the
// renderer's mask for the first n test records.
GroundingResult attention_grounding(LoadedCheckpoint& ck, int64_t n_captions, uint64_t seed);

// Mean per-pixel RGB L2 distance between each stage's output (nearest
// upsampled to 64) and the matched real image, over n test records.
std::vector<double> stage_distances(LoadedCheckpoint& ck, int64_t n_records, uint64_t seed);

}  // namespace ffgan
