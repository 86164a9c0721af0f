#pragma once

#include <filesystem>
#include <vector>

#include "mvr/point_cloud.hpp"

namespace mvr {

// Reads an ASCII or binary-little-endian PLY. The vertex element must carry
// float (or double) x/y/z; all other properties and elements are skipped.
PointCloud load_ply(const std::filesystem::path& path);

// Binary-little-endian PLY with x/y/z float32 vertices only.
void save_ply(const PointCloud& cloud, const std::filesystem::path& path);

// Writes x/y/z plus an RGB ramp over the scores: min maps to blue,
// max to red, linearly. A constant score range maps everything to blue.
void save_ply_colored(const PointCloud& cloud, const std::vector<double>& scores,
                      const std::filesystem::path& path);

}  // namespace mvr
