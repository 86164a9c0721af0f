#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "mvr/mat.hpp"

namespace mvr {

using ByteGrid = MatX<uint8_t>;

void write_png_gray(const std::filesystem::path& path, const ByteGrid& image);

// Accepts only what write_png_gray produces: 8-bit single-channel.
ByteGrid read_png_gray(const std::filesystem::path& path);

// Interleaved RGB rows, row-major, size height*width*3.
void write_png_rgb(const std::filesystem::path& path, int height, int width,
                   const std::vector<uint8_t>& rgb);

}  // namespace mvr
