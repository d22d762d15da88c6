#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <torch/torch.h>

#include "ffgan/vocabulary.hpp"

namespace ffgan::toyshapes {

enum class Shape : uint8_t { kCircle, kSquare, kTriangle };
enum class Size : uint8_t { kSmall, kLarge };
enum class Position : uint8_t { kCenter, kLeft, kRight, kTop, kBottom };

inline constexpr std::array<std::string_view, 3> kShapeNames = {"circle", "square", "triangle"};
inline constexpr std::array<std::string_view, 2> kSizeNames = {"small", "large"};
inline constexpr std::array<std::string_view, 5> kPositionNames = {"center", "left", "right", "top", "bottom"};
inline constexpr std::array<std::string_view, 8> kColorNames = {"red",   "green", "blue",   "yellow",
                                                                "white", "black", "purple", "orange"};
inline constexpr int kNumColors = static_cast<int>(kColorNames.size());

// Native rendering resolution; everything else is derived from it.
inline constexpr int kBaseResolution = 64;

struct SceneSpec {
  Shape shape = Shape::kCircle;
  int shape_color = 0;
  int background_color = 1;
  Size size = Size::kLarge;
  Position position = Position::kCenter;

  // Throws ConfigurationError when fields are out of range or colors clash.
  void validate() const;

  // "shape,color,bgcolor,size,position"
  std::string to_string() const;
  static SceneSpec parse(std::string_view text);

  bool operator==(const SceneSpec&) const = default;
};

// Every valid spec, in a fixed enumeration order (1680 of them).
std::vector<SceneSpec> all_specs();

struct RenderedSample {
  torch::Tensor image;  // [3,R,R] float32 in [-1,1]
  torch::Tensor mask;   // [R,R] bool, true on shape pixels
};

std::array<float, 3> color_rgb(int color);  // in [-1,1]

// Pixel-center rasterization, no anti-aliasing. resolution must be 16, 32 or 64.
RenderedSample render_sample(const SceneSpec& spec, int resolution);

// Caption templates; slots are written as {size} {color} {shape} {position} {bg}.
const std::vector<std::string>& caption_templates();

TokenList caption_for(const SceneSpec& spec, uint64_t rng_seed);

// Every word the caption grammar can emit.
std::vector<std::string> grammar_terminals();

enum class Split : uint8_t { kTrain, kTest };
std::string_view split_name(Split s);

struct DatasetRecord {
  int64_t id = 0;
  Split split = Split::kTrain;
  SceneSpec spec;
  std::array<TokenList, 2> captions;
};

struct Manifest {
  std::filesystem::path root;  // directory holding manifest.tsv, vocab.tsv, images/
  std::vector<DatasetRecord> records;

  std::vector<int64_t> indices(Split s) const;
  std::filesystem::path image_path(int64_t index) const;
  std::string serialize() const;
};

// Writes root/manifest.tsv, root/vocab.tsv and root/images/<id>.png (64x64).
// One record in six is a test record; test specs never occur in train.
Manifest generate_dataset(int64_t n, uint64_t seed, const std::filesystem::path& out_dir);
Manifest load_manifest(const std::filesystem::path& dir);

struct Batch {
  torch::Tensor images;         // [B,3,R,R]
  std::vector<Caption> captions;
  torch::Tensor masks;          // [B,R,R] bool
  std::vector<int64_t> indices;
};

// Average-pools a [...,3,64,64] tensor down to resolution.
torch::Tensor box_resize(const torch::Tensor& images, int resolution);

// Keeps the decoded 64x64 images in memory for repeated batching.
class ImageStore {
 public:
  ImageStore(const Manifest& manifest, Vocabulary vocab, int64_t max_length);

  // caption_choice[k] selects which of the two captions record indices[k] uses.
  Batch batch(const std::vector<int64_t>& indices, int resolution,
              const std::vector<int>& caption_choice = {}) const;

  const Manifest& manifest() const { return manifest_; }
  const Vocabulary& vocab() const { return vocab_; }
  int64_t max_length() const { return max_length_; }
  const torch::Tensor& images() const { return images_; }

 private:
  Manifest manifest_;
  Vocabulary vocab_;
  int64_t max_length_;
  torch::Tensor images_;  // [N,3,64,64] float32
};

// Reads images from disk for the requested records.
Batch load_batch(const Manifest& manifest, const std::vector<int64_t>& indices, int resolution,
                 const Vocabulary& vocab, int64_t max_length);

}  // namespace ffgan::toyshapes
