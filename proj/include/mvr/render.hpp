#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "mvr/camera.hpp"
#include "mvr/mat.hpp"
#include "mvr/point_cloud.hpp"

namespace mvr {

// One rendered view. `image` holds the intensity once; the network input
// replicates it to three identical channels. Pixel (u,v) lives at
// grid(v, u) — row = v, column = u.
struct ViewRender {
    MatXd depth;   // camera-frame z; +inf marks empty pixels
    MatXd image;   // normalized inverse depth in [0,1]; empty pixels are 0
    MatXi owner;   // winning point index per pixel; -1 marks empty pixels
    int pose_index = -1;

    int width() const { return static_cast<int>(depth.cols()); }
    int height() const { return static_cast<int>(depth.rows()); }
};

inline constexpr double kEmptyDepth = std::numeric_limits<double>::infinity();

// Z-buffer rasterization of single pixels: every point with z > 0 whose
// rounded pixel lies in bounds competes, the smallest depth wins, and ties go
// to the lower point index. No splatting — each pixel maps back to exactly
// one point.
ViewRender render_view(const PointCloud& cloud, const Pose& pose, const CameraIntrinsics& k,
                       int pose_index = -1);

// (z_max − z)/(z_max − z_min) over occupied pixels (near = bright); empty
// pixels map to 0 and a constant-depth view maps to 1.
MatXd depth_to_intensity(const MatXd& depth);

// Block-mean (area) pooling; source dimensions must be integer multiples of
// the target.
MatXd downsample(const MatXd& image, int target_height, int target_width);

// round_half_up(i·255): the 8-bit form stored in view images. The network
// consumes exactly these quantized values (dequantized by /255), so training
// and inference see identical inputs whether views come from memory or disk.
MatX<uint8_t> quantize_intensity(const MatXd& intensity);
MatXf dequantize_intensity(const MatX<uint8_t>& image);

struct Correspondence {
    uint32_t point_index = 0;
    uint16_t u = 0;
    uint16_t v = 0;
};

// Pixel->point mapping of one view: the z-buffer winners, in row-major pixel
// order. Pixel coordinates are at the render resolution.
struct CorrespondenceSet {
    std::vector<Correspondence> entries;
};

CorrespondenceSet correspondences_from(const ViewRender& render);

}  // namespace mvr
