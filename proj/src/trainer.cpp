#include "ffgan/trainer.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "ffgan/errors.hpp"
#include "ffgan/hash.hpp"

namespace ffgan {
namespace {

std::vector<int64_t> epoch_order(const std::vector<int64_t>& indices, uint64_t seed, int64_t epoch) {
  auto order = indices;
  std::mt19937_64 rng(splitmix64(seed ^ splitmix64(static_cast<uint64_t>(epoch) + 0x5eedULL)));
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

std::vector<int> caption_choices(size_t n, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<int> out(n);
  for (auto& c : out) c = static_cast<int>(rng() & 1U);
  return out;
}

torch::Tensor resize_for_encoder(const torch::Tensor& images) {
  return images.size(-1) == ImageEncoderImpl::kResolution ? images
                                                           : toyshapes::box_resize(images, ImageEncoderImpl::kResolution);
}

void set_frozen(torch::nn::Module& m) {
  m.eval();
  for (auto& p : m.parameters()) p.set_requires_grad(false);
}

}  // namespace

toyshapes::ImageStore open_dataset(RunConfig& cfg) {
  const std::filesystem::path dir(cfg.data_dir);
  if (!std::filesystem::exists(dir / "manifest.tsv")) {
    throw ConfigurationError("dataset not found in " + dir.string() + " (run gen-data first)");
  }
  auto manifest = toyshapes::load_manifest(dir);
  auto vocab = Vocabulary::load(dir / "vocab.tsv");
  cfg.model.vocab_size = vocab.size();
  return toyshapes::ImageStore(manifest, std::move(vocab), cfg.model.max_length);
}

PretrainSummary pretrain_matching(RunConfig cfg) {
  torch::set_num_threads(static_cast<int>(cfg.threads));
  auto data = open_dataset(cfg);
  cfg.validate();
  torch::manual_seed(cfg.seed);
  const auto device = run_device();

  TextEncoder text(cfg.model.vocab_size, cfg.model.embed_dim, cfg.model.d_word);
  ImageEncoder image(cfg.model.d_image_feature);
  if (cfg.model.d_image_feature != cfg.model.d_word) {
    throw ConfigurationError("pretrain: d_image_feature must equal d_word for the matching loss");
  }
  text->to(device);
  image->to(device);
  std::vector<torch::Tensor> params = text->parameters();
  for (auto& p : image->parameters()) params.push_back(p);
  torch::optim::Adam optim(params, torch::optim::AdamOptions(cfg.pretrain_learning_rate));

  const auto train = data.manifest().indices(toyshapes::Split::kTrain);
  const auto per_epoch = static_cast<int64_t>(train.size()) / cfg.pretrain_batch_size;
  if (per_epoch < 1) throw ConfigurationError("pretrain: fewer train records than one batch");

  PretrainSummary summary;
  for (int64_t epoch = 0; epoch < cfg.pretrain_epochs; ++epoch) {
    auto order = epoch_order(train, cfg.seed ^ 0x9e7ULL, epoch);
    for (int64_t b = 0; b < per_epoch; ++b) {
      std::vector<int64_t> idx(order.begin() + b * cfg.pretrain_batch_size,
                               order.begin() + (b + 1) * cfg.pretrain_batch_size);
      auto batch = data.batch(idx, ImageEncoderImpl::kResolution,
                              caption_choices(idx.size(), splitmix64(cfg.seed ^ 0xca9ULL ^ static_cast<uint64_t>(summary.steps))));
      auto text_features = encode_text(batch.captions, text);
      auto [global, regions] = image->encode(batch.images.to(device));
      auto loss = damsm_loss(global, text_features.sentence, cfg.damsm_gamma);
      if (cfg.damsm_word_level) {
        loss = loss + damsm_word_loss(regions, text_features.words.words, text_features.words.mask, kDamsmGamma1,
                                      kDamsmGamma2, cfg.damsm_gamma);
      }
      optim.zero_grad();
      loss.backward();
      optim.step();
      summary.final_loss = loss.item<double>();
      ++summary.steps;
    }
    std::cerr << "pretrain epoch " << epoch + 1 << "/" << cfg.pretrain_epochs << " loss " << summary.final_loss << '\n';
  }
  save_matching_encoders(cfg.matching_dir, text, image, cfg, data.vocab());
  return summary;
}

Trainer::Trainer(RunConfig cfg) : cfg_(std::move(cfg)), data_(open_dataset(cfg_)), device_(run_device()) {
  cfg_.validate();
  torch::set_num_threads(static_cast<int>(cfg_.threads));
  torch::manual_seed(cfg_.seed);
  nets_ = Networks::create(cfg_.model);

  const std::filesystem::path matching(cfg_.matching_dir);
  if (!std::filesystem::exists(matching / "text_encoder.pt")) {
    throw ConfigurationError("matching encoders not found in " + matching.string() + " (run pretrain first)");
  }
  if (cfg_.damsm_word_level && !RunConfig::load(matching / "config.ini").damsm_word_level) {
    throw ConfigurationError("damsm_word_level needs matching encoders pretrained with it");
  }
  load_matching_encoders(matching, nets_.text, nets_.image);
  nets_.to(device_);
  set_frozen(*nets_.text);
  set_frozen(*nets_.image);

  const auto adam = torch::optim::AdamOptions(cfg_.learning_rate).betas({cfg_.beta1, cfg_.beta2});
  g_optim_ = std::make_unique<torch::optim::Adam>(nets_.generator->parameters(), adam);
  for (auto& d : nets_.discriminators) d_optims_.push_back(std::make_unique<torch::optim::Adam>(d->parameters(), adam));

  std::filesystem::create_directories(cfg_.out_dir);
  cfg_.save(std::filesystem::path(cfg_.out_dir) / "config.ini");
  resume();
}

std::filesystem::path Trainer::checkpoint_dir() const { return std::filesystem::path(cfg_.out_dir) / "checkpoint"; }
std::filesystem::path Trainer::diagnostic_dir() const { return std::filesystem::path(cfg_.out_dir) / "diagnostic"; }
std::filesystem::path Trainer::loss_csv() const { return std::filesystem::path(cfg_.out_dir) / "losses.csv"; }

int64_t Trainer::steps_per_epoch() const {
  return static_cast<int64_t>(data_.manifest().indices(toyshapes::Split::kTrain).size()) / cfg_.batch_size;
}

void Trainer::resume() {
  std::vector<std::string> kept;
  if (std::filesystem::exists(checkpoint_dir() / "manifest.txt")) {
    auto ck = load_checkpoint(checkpoint_dir());
    if (ck.config.trajectory_hash() != cfg_.trajectory_hash()) {
      throw ConfigurationError("existing checkpoint in " + checkpoint_dir().string() + " was produced by another config");
    }
    for (int i = 0; i < ModelConfig::kNumStages; ++i) {
      load_modules(checkpoint_dir() / ("g" + std::to_string(i) + ".pt"),
                   i == 0 ? NamedModules{{"ca", nets_.generator->ca.ptr()}, {"initial", nets_.generator->initial.ptr()}}
                          : NamedModules{{"refine", i == 1 ? nets_.generator->refine1.ptr() : nets_.generator->refine2.ptr()}});
      load_modules(checkpoint_dir() / ("d" + std::to_string(i) + ".pt"),
                   {{"discriminator", nets_.discriminators[static_cast<size_t>(i)].ptr()}});
    }
    torch::load(*g_optim_, (checkpoint_dir() / "optim_g.pt").string());
    for (size_t i = 0; i < d_optims_.size(); ++i) {
      torch::load(*d_optims_[i], (checkpoint_dir() / ("optim_d" + std::to_string(i) + ".pt")).string());
    }
    nets_.to(device_);
    epoch_ = ck.manifest.epoch;
    step_ = ck.manifest.step;

    // Drop rows logged after the checkpoint was taken.
    std::ifstream in(loss_csv());
    std::string line;
    while (std::getline(in, line)) {
      if (kept.empty()) {
        kept.push_back(line);
        continue;
      }
      if (std::stoll(line.substr(0, line.find(','))) < step_) kept.push_back(line);
    }
  }
  std::ofstream out(loss_csv(), std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + loss_csv().string());
  if (kept.empty()) kept.emplace_back(LossLog::kHeader);
  for (const auto& l : kept) out << l << '\n';
}

void Trainer::save(const std::filesystem::path& dir, const std::string& status) {
  CheckpointManifest m;
  m.epoch = epoch_;
  m.step = step_;
  m.rng_digest = rng_digest();
  m.status = status;
  save_checkpoint(dir, nets_, cfg_, data_.vocab(), m);
  torch::save(*g_optim_, (dir / "optim_g.pt").string());
  for (size_t i = 0; i < d_optims_.size(); ++i) torch::save(*d_optims_[i], (dir / ("optim_d" + std::to_string(i) + ".pt")).string());
}

void Trainer::abort_non_finite(const std::string& what) {
  const auto reason = "non-finite " + what + " at step " + std::to_string(step_);
  save(diagnostic_dir(), "diagnostic: " + reason);
  throw NumericalError(reason + "; state dumped to " + diagnostic_dir().string());
}

LossBreakdown Trainer::train_step(const std::vector<int64_t>& indices, uint64_t step_seed) {
  torch::manual_seed(step_seed);
  const auto& mc = cfg_.model;
  auto batch = data_.batch(indices, toyshapes::kBaseResolution, caption_choices(indices.size(), step_seed));
  const auto batch_size = static_cast<int64_t>(indices.size());
  std::array<torch::Tensor, ModelConfig::kNumStages> real;
  for (int i = 0; i < ModelConfig::kNumStages; ++i) {
    real[static_cast<size_t>(i)] = toyshapes::box_resize(batch.images, static_cast<int>(mc.resolution(i))).to(device_);
  }

  TextFeatures text;
  {
    torch::NoGradGuard no_grad;
    text = encode_text(batch.captions, nets_.text);
  }
  auto z = torch::randn({batch_size, mc.d_z}, device_);
  auto ca_noise = torch::randn({batch_size, mc.d_ca}, device_);
  auto out = nets_.generator->forward(text, z, ca_noise);
  auto s_ca = out.augmented.sentence.detach();
  auto wrong = s_ca.roll(1, 0);

  LossBreakdown b;

  // Discriminator update.
  std::vector<torch::Tensor> d_losses;
  for (int i = 0; i < ModelConfig::kNumStages; ++i) {
    auto& d = nets_.discriminators[static_cast<size_t>(i)];
    auto real_code = d->encode(real[static_cast<size_t>(i)]);
    auto real_logits = d->heads(real_code, s_ca);
    auto fake_logits = d->forward(out.stages[static_cast<size_t>(i)].image.detach(), s_ca);
    std::optional<torch::Tensor> p_wrong;
    if (cfg_.mismatch_negatives) p_wrong = torch::sigmoid(d->heads(real_code, wrong).cond);
    d_losses.push_back(discriminator_stage_loss(torch::sigmoid(real_logits.uncond), torch::sigmoid(fake_logits.uncond),
                                                torch::sigmoid(real_logits.cond), torch::sigmoid(fake_logits.cond),
                                                p_wrong));
    b.discriminator_stages[static_cast<size_t>(i)] = d_losses.back().item<double>();
  }
  auto d_total = total_discriminator_loss<torch::Tensor>(d_losses);
  if (!std::isfinite(d_total.item<double>())) abort_non_finite("discriminator loss");
  for (auto& o : d_optims_) o->zero_grad();
  d_total.backward();
  for (auto& o : d_optims_) o->step();

  // Generator update.
  std::vector<torch::Tensor> g_losses;
  for (int i = 0; i < ModelConfig::kNumStages; ++i) {
    auto logits = nets_.discriminators[static_cast<size_t>(i)]->forward(out.stages[static_cast<size_t>(i)].image, s_ca);
    g_losses.push_back(generator_stage_loss(torch::sigmoid(logits.uncond), torch::sigmoid(logits.cond)));
    b.generator_stages[static_cast<size_t>(i)] = g_losses.back().item<double>();
  }
  auto ca = ca_regularizer(out.augmented.params.mu, out.augmented.params.log_var);
  auto [global, regions] = nets_.image->encode(resize_for_encoder(out.stages.back().image));
  auto damsm = damsm_loss(global, text.sentence, cfg_.damsm_gamma);
  if (cfg_.damsm_word_level) {
    damsm = damsm +
            damsm_word_loss(regions, text.words.words, text.words.mask, kDamsmGamma1, kDamsmGamma2, cfg_.damsm_gamma);
  }
  auto g_total = total_generator_loss<torch::Tensor>(g_losses, ca, damsm, cfg_.weights);
  b.ca = ca.item<double>();
  b.damsm = damsm.item<double>();
  if (!std::isfinite(g_total.item<double>())) abort_non_finite("generator loss");
  g_optim_->zero_grad();
  g_total.backward();
  g_optim_->step();

  b.finalize(cfg_.weights);
  return b;
}

TrainSummary Trainer::run(const std::function<void(int64_t, const LossBreakdown&)>& on_step) {
  const auto train = data_.manifest().indices(toyshapes::Split::kTrain);
  const auto per_epoch = steps_per_epoch();
  if (per_epoch < 1) throw ConfigurationError("train: fewer train records than one batch");

  std::ofstream csv(loss_csv(), std::ios::binary | std::ios::app);
  TrainSummary summary;
  nets_.generator->train();
  for (auto& d : nets_.discriminators) d->train();

  while (epoch_ < cfg_.epochs) {
    if (cfg_.max_steps > 0 && step_ >= cfg_.max_steps) break;
    auto order = epoch_order(train, cfg_.seed, epoch_);
    // Resume inside an epoch is not supported; checkpoints land on epoch ends.
    for (int64_t b = 0; b < per_epoch; ++b) {
      if (cfg_.max_steps > 0 && step_ >= cfg_.max_steps) break;
      std::vector<int64_t> idx(order.begin() + b * cfg_.batch_size, order.begin() + (b + 1) * cfg_.batch_size);
      auto losses = train_step(idx, splitmix64(cfg_.seed ^ splitmix64(static_cast<uint64_t>(step_))));
      csv << LossLog::format_row(step_, epoch_, losses) << '\n';
      summary.last = losses;
      if (on_step) on_step(step_, losses);
      ++step_;
    }
    csv.flush();
    if (step_ % per_epoch != 0) break;  // stopped by max_steps mid-epoch
    ++epoch_;
    save(checkpoint_dir(), "ok");
  }
  summary.epochs_completed = epoch_;
  summary.steps = step_;
  return summary;
}

}  // namespace ffgan
