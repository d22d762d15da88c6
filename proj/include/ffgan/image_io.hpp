#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <torch/torch.h>

namespace ffgan {

// Interleaved 8-bit image, row-major, channels in {1, 3}.
struct Image8 {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<uint8_t> pixels;

  uint8_t& at(int y, int x, int c) { return pixels[(static_cast<size_t>(y) * width + x) * channels + c]; }
  uint8_t at(int y, int x, int c) const { return pixels[(static_cast<size_t>(y) * width + x) * channels + c]; }
};

void write_png(const std::filesystem::path& path, const Image8& image);
Image8 read_png(const std::filesystem::path& path);

// [C,H,W] float in [-1,1] <-> Image8 (round to nearest, clamped).
Image8 tensor_to_image(const torch::Tensor& chw);
torch::Tensor image_to_tensor(const Image8& image);

// Tiles equally sized images into a rows x cols grid with a pad-pixel gutter.
Image8 tile_images(const std::vector<Image8>& images, int cols, int pad = 2);

}  // namespace ffgan
