#include "ffgan/checkpoint.hpp"

#include <ATen/CPUGeneratorImpl.h>

#include <cstdio>
#include <mutex>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "ffgan/errors.hpp"
#include "ffgan/hash.hpp"

namespace ffgan {
namespace {

NamedModules generator_files(const Networks& n, int stage) {
  switch (stage) {
    case 0: return {{"ca", n.generator->ca.ptr()}, {"initial", n.generator->initial.ptr()}};
    case 1: return {{"refine", n.generator->refine1.ptr()}};
    default: return {{"refine", n.generator->refine2.ptr()}};
  }
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigurationError("missing checkpoint file: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

}  // namespace

Networks Networks::create(const ModelConfig& cfg) {
  cfg.validate();
  Networks n;
  n.text = TextEncoder(cfg.vocab_size, cfg.embed_dim, cfg.d_word);
  n.image = ImageEncoder(cfg.d_image_feature);
  n.generator = Generator(cfg);
  for (int i = 0; i < ModelConfig::kNumStages; ++i) {
    n.discriminators[static_cast<size_t>(i)] = Discriminator(cfg.resolution(i), cfg.d_disc, cfg.d_ca);
  }
  return n;
}

void Networks::to(torch::Device device) {
  text->to(device);
  image->to(device);
  generator->to(device);
  for (auto& d : discriminators) d->to(device);
}

std::string CheckpointManifest::serialize() const {
  std::ostringstream os;
  os << "epoch = " << epoch << '\n'
     << "step = " << step << '\n'
     << "config_hash = " << config_hash << '\n'
     << "seed = " << seed << '\n'
     << "rng_digest = " << rng_digest << '\n'
     << "status = " << status << '\n'
     << "files =";
  for (const auto& f : files) os << ' ' << f;
  os << '\n';
  return os.str();
}

CheckpointManifest CheckpointManifest::parse(const std::string& text) {
  CheckpointManifest m;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find(" =");
    if (eq == std::string::npos) continue;
    const auto key = line.substr(0, eq);
    auto value = line.size() > eq + 3 ? line.substr(eq + 3) : std::string();
    if (key == "epoch") {
      m.epoch = std::stoll(value);
    } else if (key == "step") {
      m.step = std::stoll(value);
    } else if (key == "config_hash") {
      m.config_hash = value;
    } else if (key == "seed") {
      m.seed = std::stoull(value);
    } else if (key == "rng_digest") {
      m.rng_digest = value;
    } else if (key == "status") {
      m.status = value;
    } else if (key == "files") {
      std::istringstream fs(value);
      std::string f;
      while (fs >> f) m.files.push_back(f);
    }
  }
  return m;
}

void save_modules(const std::filesystem::path& path, const NamedModules& modules) {
  torch::serialize::OutputArchive archive;
  for (const auto& [name, module] : modules) {
    torch::serialize::OutputArchive sub;
    module->save(sub);
    archive.write(name, sub);
  }
  archive.save_to(path.string());
}

void load_modules(const std::filesystem::path& path, const NamedModules& modules) {
  if (!std::filesystem::exists(path)) throw ConfigurationError("missing checkpoint file: " + path.string());
  torch::serialize::InputArchive archive;
  archive.load_from(path.string());
  for (const auto& [name, module] : modules) {
    torch::serialize::InputArchive sub;
    archive.read(name, sub);
    module->load(sub);
  }
}

void save_checkpoint(const std::filesystem::path& dir, const Networks& nets, const RunConfig& cfg,
                     const Vocabulary& vocab, CheckpointManifest manifest) {
  std::filesystem::create_directories(dir);
  manifest.files.clear();
  for (int i = 0; i < ModelConfig::kNumStages; ++i) {
    const auto g = "g" + std::to_string(i) + ".pt";
    save_modules(dir / g, generator_files(nets, i));
    const auto d = "d" + std::to_string(i) + ".pt";
    save_modules(dir / d, {{"discriminator", nets.discriminators[static_cast<size_t>(i)].ptr()}});
    manifest.files.push_back(g);
    manifest.files.push_back(d);
  }
  save_modules(dir / "text_encoder.pt", {{"text_encoder", nets.text.ptr()}});
  save_modules(dir / "image_encoder.pt", {{"image_encoder", nets.image.ptr()}});
  manifest.files.insert(manifest.files.end(), {"text_encoder.pt", "image_encoder.pt", "config.ini", "vocab.tsv"});
  cfg.save(dir / "config.ini");
  vocab.save(dir / "vocab.tsv");
  manifest.config_hash = cfg.hash();
  manifest.seed = cfg.seed;
  write_text(dir / "manifest.txt", manifest.serialize());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir) {
  LoadedCheckpoint ck;
  ck.dir = dir;
  ck.manifest = CheckpointManifest::parse(read_text(dir / "manifest.txt"));
  ck.config = RunConfig::load(dir / "config.ini");
  if (ck.config.hash() != ck.manifest.config_hash) {
    throw ConfigurationError("checkpoint config hash mismatch in " + dir.string());
  }
  ck.vocab = Vocabulary::load(dir / "vocab.tsv");
  ck.networks = Networks::create(ck.config.model);
  for (int i = 0; i < ModelConfig::kNumStages; ++i) {
    load_modules(dir / ("g" + std::to_string(i) + ".pt"), generator_files(ck.networks, i));
    load_modules(dir / ("d" + std::to_string(i) + ".pt"),
                 {{"discriminator", ck.networks.discriminators[static_cast<size_t>(i)].ptr()}});
  }
  load_modules(dir / "text_encoder.pt", {{"text_encoder", ck.networks.text.ptr()}});
  load_modules(dir / "image_encoder.pt", {{"image_encoder", ck.networks.image.ptr()}});
  return ck;
}

void save_matching_encoders(const std::filesystem::path& dir, TextEncoder& text, ImageEncoder& image,
                            const RunConfig& cfg, const Vocabulary& vocab) {
  std::filesystem::create_directories(dir);
  save_modules(dir / "text_encoder.pt", {{"text_encoder", text.ptr()}});
  save_modules(dir / "image_encoder.pt", {{"image_encoder", image.ptr()}});
  cfg.save(dir / "config.ini");
  vocab.save(dir / "vocab.tsv");
  CheckpointManifest m;
  m.epoch = cfg.pretrain_epochs;
  m.config_hash = cfg.hash();
  m.seed = cfg.seed;
  m.rng_digest = rng_digest();
  m.files = {"text_encoder.pt", "image_encoder.pt", "config.ini", "vocab.tsv"};
  write_text(dir / "manifest.txt", m.serialize());
}

void load_matching_encoders(const std::filesystem::path& dir, TextEncoder& text, ImageEncoder& image) {
  load_modules(dir / "text_encoder.pt", {{"text_encoder", text.ptr()}});
  load_modules(dir / "image_encoder.pt", {{"image_encoder", image.ptr()}});
}

std::string rng_digest() {
  auto gen = at::detail::getDefaultCPUGenerator();
  torch::Tensor state;
  {
    std::lock_guard<std::mutex> lock(gen.mutex());
    state = gen.get_state();
  }
  const auto* bytes = state.data_ptr<uint8_t>();
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(
                    fnv1a64(std::string_view(reinterpret_cast<const char*>(bytes), static_cast<size_t>(state.numel())))));
  return buf;
}

torch::Device run_device() {
  const char* env = std::getenv("RUN_DEVICE");
  if (!env || std::string(env).empty() || std::string(env) == "cpu") return torch::kCPU;
  const std::string name(env);
  if (name.rfind("cuda", 0) == 0) {
    if (!torch::cuda::is_available()) throw ConfigurationError("RUN_DEVICE=" + name + " but CUDA is unavailable");
    return torch::Device(name);
  }
  throw ConfigurationError("unknown RUN_DEVICE: " + name);
}

}  // namespace ffgan
