#include "ffgan/toyshapes.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "ffgan/errors.hpp"
#include "ffgan/hash.hpp"
#include "ffgan/image_io.hpp"

namespace ffgan::toyshapes {
namespace {

template <size_t N>
int index_of(const std::array<std::string_view, N>& names, std::string_view word) {
  auto it = std::find(names.begin(), names.end(), word);
  if (it == names.end()) throw ConfigurationError("unknown attribute word: " + std::string(word));
  return static_cast<int>(it - names.begin());
}

// Shape geometry in base-resolution pixel units.
constexpr double kPositionOffset = 16.0;
constexpr double kCircleRadius[] = {12.0, 24.0};
constexpr double kSquareHalfSide[] = {10.0, 20.0};
constexpr double kTriangleHalfHeight[] = {11.0, 22.0};

std::pair<double, double> shape_center(Position p) {
  const double c = kBaseResolution / 2.0;
  switch (p) {
    case Position::kCenter: return {c, c};
    case Position::kLeft: return {c - kPositionOffset, c};
    case Position::kRight: return {c + kPositionOffset, c};
    case Position::kTop: return {c, c - kPositionOffset};
    case Position::kBottom: return {c, c + kPositionOffset};
  }
  return {c, c};
}

bool inside(const SceneSpec& spec, double x, double y) {
  const auto [cx, cy] = shape_center(spec.position);
  const int s = static_cast<int>(spec.size);
  const double dx = x - cx;
  const double dy = y - cy;
  switch (spec.shape) {
    case Shape::kCircle: return dx * dx + dy * dy <= kCircleRadius[s] * kCircleRadius[s];
    case Shape::kSquare: return std::abs(dx) <= kSquareHalfSide[s] && std::abs(dy) <= kSquareHalfSide[s];
    case Shape::kTriangle: {
      // Apex up; half-width grows linearly from 0 at the apex to h at the base.
      const double h = kTriangleHalfHeight[s];
      if (dy < -h || dy > h) return false;
      return std::abs(dx) <= (dy + h) / 2.0;
    }
  }
  return false;
}

std::string fill_template(const std::string& tmpl, const SceneSpec& spec) {
  std::string out = tmpl;
  auto replace = [&out](std::string_view slot, std::string_view word) {
    auto pos = out.find(slot);
    if (pos != std::string::npos) out.replace(pos, slot.size(), word);
  };
  replace("{size}", kSizeNames[static_cast<size_t>(spec.size)]);
  replace("{color}", kColorNames[static_cast<size_t>(spec.shape_color)]);
  replace("{shape}", kShapeNames[static_cast<size_t>(spec.shape)]);
  replace("{position}", kPositionNames[static_cast<size_t>(spec.position)]);
  replace("{bg}", kColorNames[static_cast<size_t>(spec.background_color)]);
  return out;
}

uint64_t caption_seed(uint64_t seed, int64_t id, int k) {
  return splitmix64(splitmix64(seed) ^ (static_cast<uint64_t>(id) * 2 + static_cast<uint64_t>(k)));
}

// Next spec from a split's pool: a fresh shuffle each time the pool is exhausted.
class SpecStream {
 public:
  SpecStream(std::vector<SceneSpec> pool, uint64_t seed) : pool_(std::move(pool)), rng_(seed) {}

  const SceneSpec& next() {
    if (cursor_ == pool_.size()) cursor_ = 0;
    if (cursor_ == 0) std::shuffle(pool_.begin(), pool_.end(), rng_);
    return pool_[cursor_++];
  }

 private:
  std::vector<SceneSpec> pool_;
  std::mt19937_64 rng_;
  size_t cursor_ = 0;
};

std::string join(const TokenList& tokens) {
  std::string out;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

}  // namespace

void SceneSpec::validate() const {
  if (static_cast<size_t>(shape) >= kShapeNames.size() || static_cast<size_t>(size) >= kSizeNames.size() ||
      static_cast<size_t>(position) >= kPositionNames.size()) {
    throw ConfigurationError("SceneSpec: enum field out of range");
  }
  if (shape_color < 0 || shape_color >= kNumColors || background_color < 0 || background_color >= kNumColors) {
    throw ConfigurationError("SceneSpec: color out of range");
  }
  if (shape_color == background_color) throw ConfigurationError("SceneSpec: shape color equals background color");
}

std::string SceneSpec::to_string() const {
  std::ostringstream os;
  os << kShapeNames[static_cast<size_t>(shape)] << ',' << kColorNames[static_cast<size_t>(shape_color)] << ','
     << kColorNames[static_cast<size_t>(background_color)] << ',' << kSizeNames[static_cast<size_t>(size)] << ','
     << kPositionNames[static_cast<size_t>(position)];
  return os.str();
}

SceneSpec SceneSpec::parse(std::string_view text) {
  std::vector<std::string_view> parts;
  size_t start = 0;
  while (true) {
    auto comma = text.find(',', start);
    parts.push_back(text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (parts.size() != 5) throw ConfigurationError("SceneSpec::parse: expected 5 fields in '" + std::string(text) + "'");
  SceneSpec s;
  s.shape = static_cast<Shape>(index_of(kShapeNames, parts[0]));
  s.shape_color = index_of(kColorNames, parts[1]);
  s.background_color = index_of(kColorNames, parts[2]);
  s.size = static_cast<Size>(index_of(kSizeNames, parts[3]));
  s.position = static_cast<Position>(index_of(kPositionNames, parts[4]));
  s.validate();
  return s;
}

std::vector<SceneSpec> all_specs() {
  std::vector<SceneSpec> specs;
  for (size_t shape = 0; shape < kShapeNames.size(); ++shape) {
    for (int color = 0; color < kNumColors; ++color) {
      for (int bg = 0; bg < kNumColors; ++bg) {
        if (bg == color) continue;
        for (size_t size = 0; size < kSizeNames.size(); ++size) {
          for (size_t pos = 0; pos < kPositionNames.size(); ++pos) {
            specs.push_back({static_cast<Shape>(shape), color, bg, static_cast<Size>(size), static_cast<Position>(pos)});
          }
        }
      }
    }
  }
  return specs;
}

std::array<float, 3> color_rgb(int color) {
  static constexpr uint8_t kRgb[kNumColors][3] = {
      {220, 40, 40},  {40, 180, 60},  {40, 80, 220},  {240, 220, 40},
      {245, 245, 245}, {20, 20, 20}, {140, 60, 180}, {245, 140, 30},
  };
  if (color < 0 || color >= kNumColors) throw ConfigurationError("color_rgb: color out of range");
  return {kRgb[color][0] / 127.5f - 1.0f, kRgb[color][1] / 127.5f - 1.0f, kRgb[color][2] / 127.5f - 1.0f};
}

RenderedSample render_sample(const SceneSpec& spec, int resolution) {
  if (resolution != 16 && resolution != 32 && resolution != 64) {
    throw ConfigurationError("render_sample: unsupported resolution " + std::to_string(resolution));
  }
  spec.validate();
  const double scale = static_cast<double>(kBaseResolution) / resolution;
  const auto fg = color_rgb(spec.shape_color);
  const auto bg = color_rgb(spec.background_color);

  auto image = torch::empty({3, resolution, resolution}, torch::kFloat32);
  auto mask = torch::zeros({resolution, resolution}, torch::kBool);
  auto img = image.accessor<float, 3>();
  auto msk = mask.accessor<bool, 2>();
  for (int y = 0; y < resolution; ++y) {
    for (int x = 0; x < resolution; ++x) {
      const bool in = inside(spec, (x + 0.5) * scale, (y + 0.5) * scale);
      msk[y][x] = in;
      const auto& rgb = in ? fg : bg;
      for (int c = 0; c < 3; ++c) img[c][y][x] = rgb[static_cast<size_t>(c)];
    }
  }
  return {image, mask};
}

const std::vector<std::string>& caption_templates() {
  static const std::vector<std::string> kTemplates = {
      "a {size} {color} {shape} at the {position} on a {bg} background",
      "{color} {shape} that is {size} on a {bg} background at the {position}",
      "{size} {color} {shape} on {bg} background at the {position}",
      "the {bg} background has a {size} {color} {shape} at the {position}",
  };
  return kTemplates;
}

TokenList caption_for(const SceneSpec& spec, uint64_t rng_seed) {
  spec.validate();
  std::mt19937_64 rng(rng_seed);
  const auto& templates = caption_templates();
  const auto pick = std::uniform_int_distribution<size_t>(0, templates.size() - 1)(rng);
  return tokenize(fill_template(templates[pick], spec));
}

std::vector<std::string> grammar_terminals() {
  std::set<std::string> words;
  for (const auto& tmpl : caption_templates()) {
    for (auto& tok : tokenize(tmpl)) {
      if (tok != "size" && tok != "color" && tok != "shape" && tok != "position" && tok != "bg") words.insert(tok);
    }
  }
  for (auto names : {std::vector<std::string_view>(kShapeNames.begin(), kShapeNames.end()),
                     std::vector<std::string_view>(kSizeNames.begin(), kSizeNames.end()),
                     std::vector<std::string_view>(kPositionNames.begin(), kPositionNames.end()),
                     std::vector<std::string_view>(kColorNames.begin(), kColorNames.end())}) {
    for (auto w : names) words.insert(std::string(w));
  }
  return {words.begin(), words.end()};
}

std::string_view split_name(Split s) { return s == Split::kTrain ? "train" : "test"; }

std::vector<int64_t> Manifest::indices(Split s) const {
  std::vector<int64_t> out;
  for (size_t i = 0; i < records.size(); ++i) {
    if (records[i].split == s) out.push_back(static_cast<int64_t>(i));
  }
  return out;
}

std::filesystem::path Manifest::image_path(int64_t index) const {
  if (index < 0 || index >= static_cast<int64_t>(records.size())) {
    throw LookupError("manifest index out of range: " + std::to_string(index));
  }
  return root / "images" / (std::to_string(records[static_cast<size_t>(index)].id) + ".png");
}

std::string Manifest::serialize() const {
  std::ostringstream os;
  for (const auto& r : records) {
    os << r.id << '\t' << split_name(r.split) << '\t' << r.spec.to_string() << '\t' << join(r.captions[0]) << '\t'
       << join(r.captions[1]) << '\n';
  }
  return os.str();
}

Manifest generate_dataset(int64_t n, uint64_t seed, const std::filesystem::path& out_dir) {
  if (n < 1) throw PreconditionError("generate_dataset: n must be >= 1");
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "images", ec);
  if (ec) throw IoError("cannot create dataset directory " + out_dir.string() + ": " + ec.message());

  // Test specs: the sixth of the spec space with the smallest hashes.
  auto specs = all_specs();
  std::sort(specs.begin(), specs.end(), [](const SceneSpec& a, const SceneSpec& b) {
    const auto ha = fnv1a64(a.to_string());
    const auto hb = fnv1a64(b.to_string());
    return ha != hb ? ha < hb : a.to_string() < b.to_string();
  });
  const auto n_test_specs = static_cast<std::ptrdiff_t>(specs.size() / 6);
  SpecStream test_stream({specs.begin(), specs.begin() + n_test_specs}, splitmix64(seed ^ 0x7e57ULL));
  SpecStream train_stream({specs.begin() + n_test_specs, specs.end()}, splitmix64(seed ^ 0x7a1bULL));

  Manifest manifest;
  manifest.root = out_dir;
  std::vector<TokenList> corpus;
  for (int64_t id = 0; id < n; ++id) {
    DatasetRecord r;
    r.id = id;
    r.split = id % 6 == 5 ? Split::kTest : Split::kTrain;
    r.spec = r.split == Split::kTest ? test_stream.next() : train_stream.next();
    for (int k = 0; k < 2; ++k) {
      r.captions[static_cast<size_t>(k)] = caption_for(r.spec, caption_seed(seed, id, k));
      corpus.push_back(r.captions[static_cast<size_t>(k)]);
    }
    manifest.records.push_back(std::move(r));
    write_png(manifest.image_path(id), tensor_to_image(render_sample(manifest.records.back().spec, kBaseResolution).image));
  }

  std::ofstream out(out_dir / "manifest.tsv", std::ios::binary);
  if (!out) throw IoError("cannot write manifest in " + out_dir.string());
  out << manifest.serialize();
  build_vocabulary(corpus).save(out_dir / "vocab.tsv");
  return manifest;
}

Manifest load_manifest(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.tsv");
  if (!in) throw ConfigurationError("no dataset manifest in " + dir.string());
  Manifest m;
  m.root = dir;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, '\t')) f.push_back(field);
    if (f.size() != 5) throw IoError("malformed manifest line: " + line);
    DatasetRecord r;
    r.id = std::stoll(f[0]);
    if (f[1] == "train") {
      r.split = Split::kTrain;
    } else if (f[1] == "test") {
      r.split = Split::kTest;
    } else {
      throw IoError("unknown split in manifest: " + f[1]);
    }
    r.spec = SceneSpec::parse(f[2]);
    r.captions[0] = tokenize(f[3]);
    r.captions[1] = tokenize(f[4]);
    m.records.push_back(std::move(r));
  }
  return m;
}

torch::Tensor box_resize(const torch::Tensor& images, int resolution) {
  const auto src = images.size(-1);
  if (resolution <= 0 || src % resolution != 0) throw ConfigurationError("box_resize: incompatible resolution");
  if (src == resolution) return images;
  const auto k = src / resolution;
  if (images.dim() == 3) return torch::avg_pool2d(images.unsqueeze(0), {k, k}).squeeze(0);
  return torch::avg_pool2d(images, {k, k});
}

namespace {

Batch assemble(const Manifest& manifest, const std::vector<int64_t>& indices, torch::Tensor images64, int resolution,
               const Vocabulary& vocab, int64_t max_length, const std::vector<int>& caption_choice) {
  Batch b;
  b.indices = indices;
  b.images = box_resize(images64, resolution);
  std::vector<torch::Tensor> masks;
  for (size_t k = 0; k < indices.size(); ++k) {
    const auto& rec = manifest.records[static_cast<size_t>(indices[k])];
    const int choice = caption_choice.empty() ? 0 : caption_choice[k];
    b.captions.push_back(encode_caption(rec.captions[static_cast<size_t>(choice)], vocab, max_length));
    masks.push_back(render_sample(rec.spec, resolution).mask);
  }
  b.masks = torch::stack(masks);
  return b;
}

void check_indices(const Manifest& manifest, const std::vector<int64_t>& indices) {
  for (auto i : indices) {
    if (i < 0 || i >= static_cast<int64_t>(manifest.records.size())) {
      throw LookupError("dataset index out of range: " + std::to_string(i));
    }
  }
}

}  // namespace

ImageStore::ImageStore(const Manifest& manifest, Vocabulary vocab, int64_t max_length)
    : manifest_(manifest), vocab_(std::move(vocab)), max_length_(max_length) {
  const auto n = static_cast<int64_t>(manifest_.records.size());
  images_ = torch::empty({n, 3, kBaseResolution, kBaseResolution}, torch::kFloat32);
  for (int64_t i = 0; i < n; ++i) images_[i].copy_(image_to_tensor(read_png(manifest_.image_path(i))));
}

Batch ImageStore::batch(const std::vector<int64_t>& indices, int resolution,
                        const std::vector<int>& caption_choice) const {
  check_indices(manifest_, indices);
  auto idx = torch::tensor(indices, torch::kInt64);
  return assemble(manifest_, indices, images_.index_select(0, idx), resolution, vocab_, max_length_, caption_choice);
}

Batch load_batch(const Manifest& manifest, const std::vector<int64_t>& indices, int resolution,
                 const Vocabulary& vocab, int64_t max_length) {
  check_indices(manifest, indices);
  std::vector<torch::Tensor> imgs;
  for (auto i : indices) imgs.push_back(image_to_tensor(read_png(manifest.image_path(i))));
  return assemble(manifest, indices, torch::stack(imgs), resolution, vocab, max_length, {});
}

}  // namespace ffgan::toyshapes
