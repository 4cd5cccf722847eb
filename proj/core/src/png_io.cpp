#include "colorguide/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>
#include <vector>

namespace colorguide::io {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void fail(const std::filesystem::path& path, const char* what) {
  throw std::runtime_error(path.string() + ": " + what);
}

}  // namespace

void write_png(const std::filesystem::path& path, const PixelImage& srgb) {
  require_encoding(srgb, Encoding::Srgb, "write_png");
  File file(std::fopen(path.c_str(), "wb"));
  if (!file) {
    fail(path, "cannot open for writing");
  }
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, nullptr);
    fail(path, "libpng initialisation failed");
  }
  const int h = srgb.height();
  const int w = srgb.width();
  std::vector<png_byte> rows(static_cast<std::size_t>(h) * w * 3);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double v = std::clamp(srgb.tensor()[i], 0.0, 1.0);
    rows[i] = static_cast<png_byte>(std::lround(v * 255.0));
  }
  std::vector<png_bytep> row_ptrs(static_cast<std::size_t>(h));
  for (int y = 0; y < h; ++y) {
    row_ptrs[static_cast<std::size_t>(y)] = rows.data() + static_cast<std::size_t>(y) * w * 3;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(path, "write failed");
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_sRGB_gAMA_and_cHRM(png, info, PNG_sRGB_INTENT_PERCEPTUAL);
  png_set_rows(png, info, row_ptrs.data());
  png_write_png(png, info, PNG_TRANSFORM_IDENTITY, nullptr);
  png_destroy_write_struct(&png, &info);
  if (std::fflush(file.get()) != 0) {
    fail(path, "flush failed");
  }
}

PixelImage read_png(const std::filesystem::path& path) {
  File file(std::fopen(path.c_str(), "rb"));
  if (!file) {
    fail(path, "cannot open for reading");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    fail(path, "libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(path, "read failed");
  }
  png_init_io(png, file.get());
  png_read_png(png, info, PNG_TRANSFORM_STRIP_16 | PNG_TRANSFORM_STRIP_ALPHA | PNG_TRANSFORM_EXPAND, nullptr);
  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  const int channels = png_get_channels(png, info);
  png_bytepp rows = png_get_rows(png, info);
  if (channels != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(path, "expected an RGB image");
  }
  PixelImage img(h, w, Encoding::Srgb);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        img.at(y, x, c) = rows[y][x * 3 + c] / 255.0;
      }
    }
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

}  // namespace colorguide::io
