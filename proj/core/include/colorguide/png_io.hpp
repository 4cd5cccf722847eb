#pragma once

#include <filesystem>

#include "colorguide/types.hpp"

namespace colorguide::io {

/// 8-bit RGB, non-interlaced, sRGB-tagged PNG. Values are clamped to [0,1]
/// and rounded to the nearest code. Throws std::runtime_error on I/O failure.
void write_png(const std::filesystem::path& path, const PixelImage& srgb);

/// Reads an 8-bit RGB PNG written by write_png.
PixelImage read_png(const std::filesystem::path& path);

}  // namespace colorguide::io
