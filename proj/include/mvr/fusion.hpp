#pragma once

#include <vector>

#include "mvr/mat.hpp"
#include "mvr/render.hpp"

// Bridges patch-grid features to pixels (bilinear, patch centers anchored at
// their geometric pixel centers), back-projects pixel features onto the
// points that own those pixels, and averages across the views where each
// point is visible.

namespace mvr {

// The four token rows and weights that bilinearly interpolate a patch-grid
// feature at one pixel of the target image.
struct BilinearTap {
    Eigen::Index rows[4];
    double weights[4];
};

// Pixel (u, v) = (column, row) in a target_h×target_w image; the patch grid
// is grid_h×grid_w with tokens in row-major order.
BilinearTap bilinear_tap(int grid_h, int grid_w, int target_h, int target_w, int u, int v);

// Full pixel-feature grid, rows in row-major pixel order. Mostly a reference
// implementation: the pipeline samples single pixels via bilinear_tap.
template <class T>
MatX<T> upsample_patch_features(const MatX<T>& tokens, int grid_h, int grid_w, int target_h,
                                int target_w) {
    if (tokens.rows() != static_cast<Eigen::Index>(grid_h) * grid_w) {
        throw ConfigError("upsample: token count does not match grid dims");
    }
    MatX<T> out(static_cast<Eigen::Index>(target_h) * target_w, tokens.cols());
    for (int v = 0; v < target_h; ++v) {
        for (int u = 0; u < target_w; ++u) {
            const BilinearTap tap = bilinear_tap(grid_h, grid_w, target_h, target_w, u, v);
            auto row = out.row(static_cast<Eigen::Index>(v) * target_w + u);
            row = tokens.row(tap.rows[0]) * static_cast<T>(tap.weights[0]);
            for (int i = 1; i < 4; ++i) {
                row += tokens.row(tap.rows[i]) * static_cast<T>(tap.weights[i]);
            }
        }
    }
    return out;
}

// Per-point features averaged over the views in which the point is visible.
// Invisible points (visibility 0) keep zero rows and are excluded from the
// loss and the mining pool.
struct FusedPointFeatures {
    MatXd teacher;                // N×C
    MatXd student;                // N×C
    std::vector<int> visibility;  // contributing-view count per point
};

// One view's contribution: token grids from the teacher and student stacks
// plus the z-buffer winners of the render that produced them.
template <class T>
struct ViewFeatureSource {
    const MatX<T>* teacher_tokens = nullptr;
    const MatX<T>* student_tokens = nullptr;
    const CorrespondenceSet* correspondences = nullptr;
};

// Averaging denominator for fused point features: the views that actually
// see the point (default), or the full view count regardless of occlusion.
// Cosine scores are identical either way; fused norms differ.
enum class FuseMode { kVisibleViews, kAllViews };

// Maps render-resolution correspondence pixels down to the network input
// resolution by integer division (`scale` = render/input) and samples both
// token grids bilinearly at the resulting pixel. Accumulation runs in double
// regardless of the source scalar, in view order.
template <class T>
FusedPointFeatures fuse_views(const std::vector<ViewFeatureSource<T>>& views, int n_points,
                              int grid_size, int input_resolution, int scale,
                              FuseMode mode = FuseMode::kVisibleViews) {
    if (views.empty()) throw ConfigError("fusion: at least one view is required");
    if (n_points < 1) throw ConfigError("fusion: point count must be >= 1");
    if (scale < 1) throw ConfigError("fusion: scale must be >= 1");

    const Eigen::Index channels = views[0].teacher_tokens->cols();
    FusedPointFeatures fused;
    fused.teacher = MatXd::Zero(n_points, channels);
    fused.student = MatXd::Zero(n_points, channels);
    fused.visibility.assign(static_cast<std::size_t>(n_points), 0);

    for (const ViewFeatureSource<T>& view : views) {
        const MatX<T>& t = *view.teacher_tokens;
        const MatX<T>& s = *view.student_tokens;
        if (t.cols() != channels || s.cols() != channels ||
            t.rows() != static_cast<Eigen::Index>(grid_size) * grid_size ||
            s.rows() != t.rows()) {
            throw ConfigError("fusion: token grid dims inconsistent across views");
        }
        for (const Correspondence& corr : view.correspondences->entries) {
            if (corr.point_index >= static_cast<uint32_t>(n_points)) {
                throw LogicError("fusion: correspondence references a point out of range");
            }
            const int u = static_cast<int>(corr.u) / scale;
            const int v = static_cast<int>(corr.v) / scale;
            if (u >= input_resolution || v >= input_resolution) {
                throw LogicError("fusion: correspondence pixel outside the input grid");
            }
            const BilinearTap tap =
                bilinear_tap(grid_size, grid_size, input_resolution, input_resolution, u, v);
            auto trow = fused.teacher.row(corr.point_index);
            auto srow = fused.student.row(corr.point_index);
            for (int i = 0; i < 4; ++i) {
                trow += tap.weights[i] * t.row(tap.rows[i]).template cast<double>();
                srow += tap.weights[i] * s.row(tap.rows[i]).template cast<double>();
            }
            ++fused.visibility[corr.point_index];
        }
    }
    const int n_views = static_cast<int>(views.size());
    for (int i = 0; i < n_points; ++i) {
        const int count = fused.visibility[static_cast<std::size_t>(i)];
        if (count == 0) continue;  // invisible: keep the zero row
        const int divisor = mode == FuseMode::kAllViews ? n_views : count;
        if (divisor > 1) {
            fused.teacher.row(i) /= divisor;
            fused.student.row(i) /= divisor;
        }
    }
    return fused;
}

// Adjoint of the student half of fuse_views for one view: routes per-point
// gradients back onto the view's token grid (+=), including the view-
// averaging factor (1/|V_i|, or 1/total_views in kAllViews mode).
void scatter_point_gradients(const MatXd& dpoints, const std::vector<int>& visibility,
                             const CorrespondenceSet& correspondences, int grid_size,
                             int input_resolution, int scale, MatXd& dtokens,
                             FuseMode mode = FuseMode::kVisibleViews, int total_views = 0);

struct AnomalyResult {
    VecX<double> point_scores;
    double object_score = 0.0;
    int invisible_points = 0;
};

// Cosine distance per point between the fused teacher and student vectors;
// invisible points score 0; the object score is the max over points.
AnomalyResult anomaly_scores(const FusedPointFeatures& fused);

}  // namespace mvr
