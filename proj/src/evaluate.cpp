#include "ffgan/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>
#include <sstream>

#include "ffgan/errors.hpp"
#include "ffgan/hash.hpp"

namespace ffgan {
namespace {

void eval_mode(Networks& n) {
  n.text->eval();
  n.image->eval();
  n.generator->eval();
  for (auto& d : n.discriminators) d->eval();
}

torch::Tensor to_encoder_resolution(const torch::Tensor& images) {
  const auto res = images.size(-1);
  if (res == ImageEncoderImpl::kResolution) return images;
  if (res > ImageEncoderImpl::kResolution) return toyshapes::box_resize(images, ImageEncoderImpl::kResolution);
  return torch::upsample_nearest2d(images, std::vector<int64_t>{ImageEncoderImpl::kResolution, ImageEncoderImpl::kResolution});
}

// Runs the generator on captions with seeded noise (CA noise included).
PipelineOutput generate(LoadedCheckpoint& ck, const std::vector<Caption>& captions, std::mt19937_64& rng) {
  const auto& mc = ck.config.model;
  const auto n = static_cast<int64_t>(captions.size());
  torch::manual_seed(rng());
  auto z = torch::randn({n, mc.d_z});
  auto ca_noise = torch::randn({n, mc.d_ca});
  return forward_pipeline(captions, z, ck.networks.text, ck.networks.generator, ca_noise);
}

toyshapes::Manifest dataset_manifest(const LoadedCheckpoint& ck) {
  return toyshapes::load_manifest(ck.config.data_dir);
}

double stddev(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

std::string EvalReport::csv_row() const {
  char buf[512];
  std::snprintf(buf, sizeof(buf), "%s,%lld,%.6f,%.6f,%lld,%lld", checkpoint.c_str(), static_cast<long long>(epoch), fid,
                r_precision, static_cast<long long>(n_samples), static_cast<long long>(pool_size));
  return buf;
}

std::string EvalReport::summary() const {
  std::ostringstream os;
  os << "checkpoint " << checkpoint << " (epoch " << epoch << ", seed " << seed << "): FID " << fid
     << ", R-precision " << r_precision << " over " << n_samples << " samples, pool " << pool_size;
  return os.str();
}

std::string EvalAggregate::summary() const {
  std::ostringstream os;
  os << "FID " << fid_mean << " +- " << fid_std << ", R-precision " << r_precision_mean << " +- " << r_precision_std
     << " over " << runs.size() << " evaluation seeds";
  return os.str();
}

TestSamples sample_test_set(LoadedCheckpoint& ck, const toyshapes::Manifest& manifest, int64_t n_samples,
                            uint64_t seed, int64_t chunk) {
  torch::NoGradGuard no_grad;
  eval_mode(ck.networks);
  const auto test = manifest.indices(toyshapes::Split::kTest);
  if (test.empty()) throw ConfigurationError("evaluation: dataset has no test records");
  std::mt19937_64 rng(splitmix64(seed));
  TestSamples out;
  std::vector<torch::Tensor> images;
  for (int64_t start = 0; start < n_samples; start += chunk) {
    std::vector<Caption> captions;
    for (int64_t k = start; k < std::min(n_samples, start + chunk); ++k) {
      const auto rec = test[static_cast<size_t>(k) % test.size()];
      const int choice = static_cast<int>(rng() & 1U);
      out.records.push_back(rec);
      out.caption_choice.push_back(choice);
      captions.push_back(encode_caption(manifest.records[static_cast<size_t>(rec)].captions[static_cast<size_t>(choice)],
                                        ck.vocab, ck.config.model.max_length));
    }
    out.last_chunk = generate(ck, captions, rng);
    images.push_back(out.last_chunk.stages.back().image);
  }
  out.images = torch::cat(images, 0);
  return out;
}

EvalReport evaluate_model(LoadedCheckpoint& ck, int64_t n_samples, int64_t pool_size, int r, uint64_t seed) {
  if (n_samples < 2) throw ConfigurationError("evaluation: need at least two samples");
  if (pool_size <= r) throw ConfigurationError("evaluation: pool_size must exceed R");
  torch::NoGradGuard no_grad;
  const auto manifest = dataset_manifest(ck);
  const auto test = manifest.indices(toyshapes::Split::kTest);

  auto samples = sample_test_set(ck, manifest, n_samples, seed);
  auto fake = extract_features(to_encoder_resolution(samples.images), ck.networks.image);

  std::vector<torch::Tensor> real_images;
  for (auto idx : test) real_images.push_back(image_to_tensor(read_png(manifest.image_path(idx))));
  auto real = extract_features(torch::stack(real_images), ck.networks.image);

  // Sentence features for both captions of every test record.
  std::vector<Caption> captions;
  for (auto idx : test) {
    for (int c = 0; c < 2; ++c) {
      captions.push_back(encode_caption(manifest.records[static_cast<size_t>(idx)].captions[static_cast<size_t>(c)],
                                        ck.vocab, ck.config.model.max_length));
    }
  }
  auto sentence = to_feature_matrix(encode_text(captions, ck.networks.text).sentence);
  std::map<int64_t, size_t> test_pos;
  for (size_t i = 0; i < test.size(); ++i) test_pos[test[i]] = i;

  std::mt19937_64 rng(splitmix64(seed ^ 0x9001ULL));
  std::vector<RetrievalPool> pools;
  for (size_t k = 0; k < samples.records.size(); ++k) {
    const auto rec = samples.records[k];
    const auto& spec = manifest.records[static_cast<size_t>(rec)].spec;
    RetrievalPool pool;
    pool.query = fake.row(static_cast<Eigen::Index>(k)).transpose();
    pool.matched.push_back(sentence.row(static_cast<Eigen::Index>(2 * test_pos[rec] + samples.caption_choice[k])).transpose());
    // Mismatched captions are distinct test captions of other specs.
    std::vector<Eigen::Index> candidates;
    for (size_t j = 0; j < test.size(); ++j) {
      if (manifest.records[static_cast<size_t>(test[j])].spec == spec) continue;
      candidates.push_back(static_cast<Eigen::Index>(2 * j));
      candidates.push_back(static_cast<Eigen::Index>(2 * j + 1));
    }
    const auto need = static_cast<size_t>(pool_size - 1);
    if (candidates.size() < need) throw ConfigurationError("evaluation: too few distinct test captions for the pool");
    for (size_t m = 0; m < need; ++m) {
      std::swap(candidates[m], candidates[m + rng() % (candidates.size() - m)]);
      pool.mismatched.push_back(sentence.row(candidates[m]).transpose());
    }
    pools.push_back(std::move(pool));
  }

  EvalReport report;
  report.checkpoint = ck.dir.string();
  report.epoch = ck.manifest.epoch;
  report.fid = frechet_distance(gaussian_stats(fake), gaussian_stats(real));
  report.r_precision = r_precision(pools, r);
  report.n_samples = n_samples;
  report.pool_size = pool_size;
  report.seed = seed;
  return report;
}

EvalReport evaluate_model(const std::filesystem::path& checkpoint, int64_t n_samples, int64_t pool_size, int r,
                          uint64_t seed) {
  auto ck = load_checkpoint(checkpoint);
  return evaluate_model(ck, n_samples, pool_size, r, seed);
}

EvalAggregate evaluate_seeds(LoadedCheckpoint& ck, int64_t n_samples, int64_t pool_size, int r, uint64_t first_seed,
                             int64_t seeds) {
  EvalAggregate agg;
  std::vector<double> fid;
  std::vector<double> rp;
  for (int64_t s = 0; s < seeds; ++s) {
    agg.runs.push_back(evaluate_model(ck, n_samples, pool_size, r, first_seed + static_cast<uint64_t>(s)));
    fid.push_back(agg.runs.back().fid);
    rp.push_back(agg.runs.back().r_precision);
  }
  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
  };
  agg.fid_mean = mean(fid);
  agg.fid_std = stddev(fid, agg.fid_mean);
  agg.r_precision_mean = mean(rp);
  agg.r_precision_std = stddev(rp, agg.r_precision_mean);
  return agg;
}

Image8 sample_grid(LoadedCheckpoint& ck, const std::vector<std::string>& captions, uint64_t seed) {
  if (captions.empty()) throw PreconditionError("sample: no captions");
  torch::NoGradGuard no_grad;
  eval_mode(ck.networks);
  std::vector<Caption> encoded;
  for (const auto& c : captions) encoded.push_back(encode_caption(tokenize(c), ck.vocab, ck.config.model.max_length));
  std::mt19937_64 rng(splitmix64(seed));
  auto out = generate(ck, encoded, rng);
  const auto final_res = out.stages.back().image.size(-1);
  std::vector<Image8> tiles;
  for (size_t b = 0; b < captions.size(); ++b) {
    for (const auto& stage : out.stages) {
      auto img = torch::upsample_nearest2d(stage.image[static_cast<int64_t>(b)].unsqueeze(0),
                                           std::vector<int64_t>{final_res, final_res});
      tiles.push_back(tensor_to_image(img.squeeze(0)));
    }
  }
  return tile_images(tiles, static_cast<int>(out.stages.size()));
}

std::vector<std::filesystem::path> dump_attention(LoadedCheckpoint& ck, const std::string& caption, uint64_t seed,
                                                  const std::filesystem::path& out_dir) {
  torch::NoGradGuard no_grad;
  eval_mode(ck.networks);
  const auto tokens = tokenize(caption);
  auto encoded = encode_caption(tokens, ck.vocab, ck.config.model.max_length);
  std::mt19937_64 rng(splitmix64(seed));
  auto out = generate(ck, {encoded}, rng);
  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> written;
  for (size_t s = 0; s < out.word_attention.size(); ++s) {
    if (!out.word_attention[s]) continue;
    const int stage = static_cast<int>(s) + 1;
    const auto res = static_cast<int>(out.stages[s + 1].image.size(-1));
    auto maps = attention_heatmaps(*out.word_attention[s], encoded, res);
    for (size_t i = 0; i < maps.size(); ++i) {
      auto path = out_dir / (std::to_string(stage) + "_" + std::to_string(i) + "_" + tokens[i] + ".png");
      write_png(path, maps[i]);
      written.push_back(path);
    }
  }
  return written;
}

GroundingResult attention_grounding(LoadedCheckpoint& ck, int64_t n_captions, uint64_t seed) {
  torch::NoGradGuard no_grad;
  eval_mode(ck.networks);
  const auto manifest = dataset_manifest(ck);
  const auto test = manifest.indices(toyshapes::Split::kTest);
  std::mt19937_64 rng(splitmix64(seed));
  GroundingResult result;
  for (int64_t k = 0; k < n_captions && k < static_cast<int64_t>(test.size()); ++k) {
    const auto& rec = manifest.records[static_cast<size_t>(test[static_cast<size_t>(k)])];
    const auto& tokens = rec.captions[0];
    const auto color = std::string(toyshapes::kColorNames[static_cast<size_t>(rec.spec.shape_color)]);
    const auto word = std::find(tokens.begin(), tokens.end(), color) - tokens.begin();
    auto out = generate(ck, {encode_caption(tokens, ck.vocab, ck.config.model.max_length)}, rng);
    const auto& att = out.word_attention.back();
    if (!att) throw ConfigurationError("attention grounding: stage 2 has no word attention");
    const auto grid = static_cast<int>(att->height);
    auto mask = toyshapes::render_sample(rec.spec, grid).mask.flatten();
    auto row = att->weights[0][word].to(torch::kFloat64);
    const auto inside = row.masked_select(mask);
    const auto outside = row.masked_select(mask.logical_not());
    ++result.captions;
    if (inside.numel() > 0 && outside.numel() > 0 && inside.mean().item<double>() > outside.mean().item<double>()) {
      ++result.grounded;
    }
  }
  return result;
}

std::vector<double> stage_distances(LoadedCheckpoint& ck, int64_t n_records, uint64_t seed) {
  torch::NoGradGuard no_grad;
  const auto manifest = dataset_manifest(ck);
  eval_mode(ck.networks);
  const auto test = manifest.indices(toyshapes::Split::kTest);
  std::mt19937_64 rng(splitmix64(seed));
  std::vector<double> sums(ModelConfig::kNumStages, 0.0);
  int64_t count = 0;
  const int64_t chunk = 50;
  for (int64_t start = 0; start < n_records; start += chunk) {
    std::vector<Caption> captions;
    std::vector<torch::Tensor> reals;
    for (int64_t k = start; k < std::min(n_records, start + chunk); ++k) {
      const auto rec = test[static_cast<size_t>(k) % test.size()];
      captions.push_back(encode_caption(manifest.records[static_cast<size_t>(rec)].captions[0], ck.vocab,
                                        ck.config.model.max_length));
      reals.push_back(image_to_tensor(read_png(manifest.image_path(rec))));
    }
    auto real = torch::stack(reals);
    auto out = generate(ck, captions, rng);
    for (size_t s = 0; s < out.stages.size(); ++s) {
      auto img = torch::upsample_nearest2d(out.stages[s].image, std::vector<int64_t>{real.size(2), real.size(3)});
      sums[s] += (img - real).pow(2).sum(1).sqrt().mean({1, 2}).sum().item<double>();
    }
    count += static_cast<int64_t>(captions.size());
  }
  for (auto& s : sums) s /= static_cast<double>(count);
  return sums;
}

}  // namespace ffgan
