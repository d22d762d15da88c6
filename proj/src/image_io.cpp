#include "ffgan/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include "ffgan/errors.hpp"

namespace ffgan {
namespace {

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

}  // namespace

void write_png(const std::filesystem::path& path, const Image8& image) {
  if (image.channels != 1 && image.channels != 3) throw ConfigurationError("write_png: channels must be 1 or 3");
  if (image.pixels.size() != static_cast<size_t>(image.width) * image.height * image.channels) {
    throw ConfigurationError("write_png: pixel buffer size mismatch");
  }
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw IoError("cannot open for writing: " + path.string());

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng: cannot allocate write structs");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng: write failed for " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, image.width, image.height, 8,
               image.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const size_t stride = static_cast<size_t>(image.width) * image.channels;
  for (int y = 0; y < image.height; ++y) {
    png_write_row(png, const_cast<png_bytep>(image.pixels.data() + y * stride));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Image8 read_png(const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError("cannot open for reading: " + path.string());

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("libpng: cannot allocate read structs");
  }
  Image8 image;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("libpng: read failed for " + path.string());
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_palette_to_rgb(png);
  png_set_expand_gray_1_2_4_to_8(png);
  png_read_update_info(png, info);

  image.width = static_cast<int>(png_get_image_width(png, info));
  image.height = static_cast<int>(png_get_image_height(png, info));
  image.channels = png_get_channels(png, info);
  const size_t stride = png_get_rowbytes(png, info);
  image.pixels.resize(stride * image.height);
  for (int y = 0; y < image.height; ++y) png_read_row(png, image.pixels.data() + y * stride, nullptr);
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return image;
}

Image8 tensor_to_image(const torch::Tensor& chw) {
  if (chw.dim() != 3) throw ConfigurationError("tensor_to_image: expected [C,H,W]");
  auto t = chw.detach().to(torch::kCPU, torch::kFloat32).contiguous();
  Image8 img;
  img.channels = static_cast<int>(t.size(0));
  img.height = static_cast<int>(t.size(1));
  img.width = static_cast<int>(t.size(2));
  img.pixels.resize(static_cast<size_t>(img.channels) * img.height * img.width);
  auto a = t.accessor<float, 3>();
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < img.channels; ++c) {
        const float v = std::lround((a[c][y][x] + 1.0f) * 127.5f);
        img.at(y, x, c) = static_cast<uint8_t>(std::clamp(v, 0.0f, 255.0f));
      }
    }
  }
  return img;
}

torch::Tensor image_to_tensor(const Image8& image) {
  auto t = torch::empty({image.channels, image.height, image.width}, torch::kFloat32);
  auto a = t.accessor<float, 3>();
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      for (int c = 0; c < image.channels; ++c) a[c][y][x] = image.at(y, x, c) / 127.5f - 1.0f;
    }
  }
  return t;
}

Image8 tile_images(const std::vector<Image8>& images, int cols, int pad) {
  if (images.empty()) throw PreconditionError("tile_images: no images");
  const auto& first = images.front();
  const int rows = (static_cast<int>(images.size()) + cols - 1) / cols;
  Image8 grid;
  grid.channels = first.channels;
  grid.width = cols * first.width + (cols + 1) * pad;
  grid.height = rows * first.height + (rows + 1) * pad;
  grid.pixels.assign(static_cast<size_t>(grid.width) * grid.height * grid.channels, 255);
  for (size_t i = 0; i < images.size(); ++i) {
    const auto& img = images[i];
    if (img.width != first.width || img.height != first.height || img.channels != first.channels) {
      throw ConfigurationError("tile_images: images differ in shape");
    }
    const int oy = pad + static_cast<int>(i) / cols * (first.height + pad);
    const int ox = pad + static_cast<int>(i) % cols * (first.width + pad);
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x) {
        for (int c = 0; c < img.channels; ++c) grid.at(oy + y, ox + x, c) = img.at(y, x, c);
      }
    }
  }
  return grid;
}

}  // namespace ffgan
