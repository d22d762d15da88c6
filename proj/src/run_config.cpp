#include "ffgan/run_config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "ffgan/errors.hpp"
#include "ffgan/hash.hpp"

namespace ffgan {
namespace {

struct Field {
  const char* section;
  const char* key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

int64_t parse_int(const std::string& v) {
  int64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigurationError("not an integer: '" + v + "'");
  return out;
}

double parse_double(const std::string& v) {
  try {
    size_t pos = 0;
    const double out = std::stod(v, &pos);
    if (pos != v.size()) throw ConfigurationError("not a number: '" + v + "'");
    return out;
  } catch (const std::logic_error&) {
    throw ConfigurationError("not a number: '" + v + "'");
  }
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigurationError("not a boolean: '" + v + "'");
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

#define INT_FIELD(sec, name, member)                                                     \
  Field {                                                                                \
    sec, name, [](const RunConfig& c) { return std::to_string(c.member); },             \
        [](RunConfig& c, const std::string& v) { c.member = parse_int(v); }              \
  }
#define UINT_FIELD(sec, name, member)                                                    \
  Field {                                                                                \
    sec, name, [](const RunConfig& c) { return std::to_string(c.member); },             \
        [](RunConfig& c, const std::string& v) { c.member = static_cast<uint64_t>(parse_int(v)); } \
  }
#define DOUBLE_FIELD(sec, name, member)                                                  \
  Field {                                                                                \
    sec, name, [](const RunConfig& c) { return fmt_double(c.member); },                 \
        [](RunConfig& c, const std::string& v) { c.member = parse_double(v); }           \
  }
#define BOOL_FIELD(sec, name, member)                                                    \
  Field {                                                                                \
    sec, name, [](const RunConfig& c) { return std::string(c.member ? "true" : "false"); }, \
        [](RunConfig& c, const std::string& v) { c.member = parse_bool(v); }             \
  }
#define STRING_FIELD(sec, name, member)                                                  \
  Field {                                                                                \
    sec, name, [](const RunConfig& c) { return c.member; },                             \
        [](RunConfig& c, const std::string& v) { c.member = v; }                         \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> kFields = {
      INT_FIELD("text", "vocab_size", model.vocab_size),
      INT_FIELD("text", "embed_dim", model.embed_dim),
      INT_FIELD("text", "d_word", model.d_word),
      INT_FIELD("text", "d_ca", model.d_ca),
      INT_FIELD("text", "max_length", model.max_length),
      Field{"attention", "norm_axis", [](const RunConfig& c) { return std::string(to_string(c.model.attn_axis)); },
            [](RunConfig& c, const std::string& v) { c.model.attn_axis = parse_norm_axis(v); }},
      Field{"attention", "source",
            [](const RunConfig& c) { return std::string(to_string(c.model.attention_source)); },
            [](RunConfig& c, const std::string& v) { c.model.attention_source = parse_attention_source(v); }},
      BOOL_FIELD("fusion", "use_ff_block", model.use_ff_block),
      BOOL_FIELD("fusion", "use_gsr", model.use_gsr),
      BOOL_FIELD("fusion", "channel_only", model.channel_only_affine),
      INT_FIELD("stages", "d_model", model.d_model),
      INT_FIELD("stages", "d_z", model.d_z),
      INT_FIELD("stages", "base_resolution", model.base_resolution),
      INT_FIELD("stages", "d_disc", model.d_disc),
      INT_FIELD("stages", "d_image_feature", model.d_image_feature),
      DOUBLE_FIELD("objectives", "lambda1", weights.lambda1),
      DOUBLE_FIELD("objectives", "lambda2", weights.lambda2),
      DOUBLE_FIELD("objectives", "damsm_gamma", damsm_gamma),
      BOOL_FIELD("objectives", "mismatch_negatives", mismatch_negatives),
      BOOL_FIELD("objectives", "damsm_word_level", damsm_word_level),
      STRING_FIELD("data", "dir", data_dir),
      INT_FIELD("data", "size", dataset_size),
      UINT_FIELD("data", "seed", data_seed),
      STRING_FIELD("train", "out_dir", out_dir),
      STRING_FIELD("train", "matching_dir", matching_dir),
      DOUBLE_FIELD("train", "learning_rate", learning_rate),
      DOUBLE_FIELD("train", "beta1", beta1),
      DOUBLE_FIELD("train", "beta2", beta2),
      INT_FIELD("train", "batch_size", batch_size),
      INT_FIELD("train", "epochs", epochs),
      INT_FIELD("train", "max_steps", max_steps),
      UINT_FIELD("train", "seed", seed),
      INT_FIELD("train", "threads", threads),
      INT_FIELD("pretrain", "epochs", pretrain_epochs),
      DOUBLE_FIELD("pretrain", "learning_rate", pretrain_learning_rate),
      INT_FIELD("pretrain", "batch_size", pretrain_batch_size),
      INT_FIELD("eval", "samples", eval_samples),
      INT_FIELD("eval", "pool_size", pool_size),
      INT_FIELD("eval", "r", r),
      INT_FIELD("eval", "seeds", eval_seeds),
  };
  return kFields;
}

#undef INT_FIELD
#undef UINT_FIELD
#undef DOUBLE_FIELD
#undef BOOL_FIELD
#undef STRING_FIELD

const Field& find_field(const std::string& dotted) {
  for (const auto& f : fields()) {
    if (dotted == std::string(f.section) + "." + f.key) return f;
  }
  throw ConfigurationError("unknown config key: " + dotted);
}

}  // namespace

RunConfig RunConfig::paper_preset(bool coco) {
  RunConfig c;
  c.model.d_word = 256;
  c.model.d_ca = 100;
  c.model.max_length = 18;
  c.model.d_z = 100;
  c.model.d_model = 32;
  c.model.base_resolution = 64;
  c.model.d_disc = 64;
  c.model.d_image_feature = 256;
  c.model.embed_dim = 300;
  c.weights.lambda2 = coco ? 50.0 : 5.0;
  c.epochs = coco ? 120 : 600;
  c.pool_size = 100;
  return c;
}

void RunConfig::set(const std::string& dotted_key, const std::string& value) {
  find_field(dotted_key).set(*this, trim(value));
}

std::string RunConfig::get(const std::string& dotted_key) const { return find_field(dotted_key).get(*this); }

std::vector<std::string> RunConfig::keys() {
  std::vector<std::string> out;
  for (const auto& f : fields()) out.push_back(std::string(f.section) + "." + f.key);
  return out;
}

std::string RunConfig::serialize() const {
  std::ostringstream os;
  std::string section;
  for (const auto& f : fields()) {
    if (section != f.section) {
      if (!section.empty()) os << '\n';
      section = f.section;
      os << '[' << section << "]\n";
    }
    os << f.key << " = " << f.get(*this) << '\n';
  }
  return os.str();
}

RunConfig RunConfig::parse(const std::string& text) {
  RunConfig c;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigurationError("config line " + std::to_string(lineno) + ": bad section");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigurationError("config line " + std::to_string(lineno) + ": expected key = value");
    if (section.empty()) throw ConfigurationError("config line " + std::to_string(lineno) + ": key outside a section");
    c.set(section + "." + trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigurationError("cannot read config: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void RunConfig::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write config: " + path.string());
  out << serialize();
}

std::string RunConfig::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64(serialize())));
  return buf;
}

std::string RunConfig::trajectory_hash() const {
  RunConfig c = *this;
  const RunConfig defaults;
  c.epochs = 0;
  c.max_steps = 0;
  c.out_dir.clear();
  c.eval_samples = defaults.eval_samples;
  c.pool_size = defaults.pool_size;
  c.r = defaults.r;
  c.eval_seeds = defaults.eval_seeds;
  return c.hash();
}

void RunConfig::validate() const {
  if (weights.lambda1 < 0.0 || weights.lambda2 < 0.0) throw ConfigurationError("lambda1 and lambda2 must be >= 0");
  if (batch_size < 2) throw ConfigurationError("batch_size must be at least 2");
  if (pretrain_batch_size < 2) throw ConfigurationError("pretrain batch_size must be at least 2");
  if (epochs < 0 || max_steps < 0) throw ConfigurationError("epochs and max_steps must be >= 0");
  if (learning_rate <= 0.0) throw ConfigurationError("learning_rate must be positive");
  if (pool_size < r + 1 || r < 1) throw ConfigurationError("pool_size must exceed r >= 1");
  if (threads < 1) throw ConfigurationError("threads must be >= 1");
  if (model.vocab_size != 0) model.validate();
}

}  // namespace ffgan
