#pragma once

#include <filesystem>
#include <vector>

#include "mvr/camera.hpp"
#include "mvr/png_io.hpp"
#include "mvr/render.hpp"

namespace mvr {

struct RenderSettings {
    int render_resolution = 672;  // z-buffer resolution
    int input_resolution = 224;   // network input after block-mean pooling
    int n_views = 27;
    double camera_distance = 3.0;
    double focal_base = 500.0;  // focal length at 672; scaled linearly with resolution
    void validate() const;
};

struct ViewBundleMeta {
    RenderSettings settings;
    CameraIntrinsics intrinsics;  // at render resolution
    std::vector<Pose> poses;
    Vec3 center = Vec3::Zero();  // normalization applied before rendering
    double scale = 1.0;
    uint64_t content_hash = 0;  // hash of source cloud + settings, for idempotent re-renders
};

// All views of one cloud: quantized network inputs at input resolution plus
// raw depth and pixel->point correspondences at render resolution.
struct ViewBundle {
    ViewBundleMeta meta;
    std::vector<ByteGrid> images;
    std::vector<MatXf> depths;
    std::vector<CorrespondenceSet> correspondences;
};

uint64_t view_content_hash(const PointCloud& cloud, const RenderSettings& settings);

// Normalizes the cloud, renders every pose, pools each view down to the input
// resolution, and quantizes. Views are rendered in parallel.
ViewBundle build_view_bundle(const PointCloud& cloud, const RenderSettings& settings);

// Directory layout: view_{k:02}.png, view_{k:02}.depth.f32 (row-major
// little-endian float32), correspondence.bin (per view: u32 count, then
// u32 point_index / u16 u / u16 v triples), meta.json.
void write_view_bundle(const ViewBundle& bundle, const std::filesystem::path& dir);
ViewBundle read_view_bundle(const std::filesystem::path& dir);

// True when dir holds a complete bundle written from identical input
// (matching content hash) — used to skip re-rendering.
bool bundle_is_current(const std::filesystem::path& dir, uint64_t content_hash);

}  // namespace mvr
