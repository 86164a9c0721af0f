#include "mvr/fusion.hpp"

#include <cmath>

#include "mvr/loss.hpp"

namespace mvr {

BilinearTap bilinear_tap(int grid_h, int grid_w, int target_h, int target_w, int u, int v) {
    if (u < 0 || u >= target_w || v < 0 || v >= target_h) {
        throw LogicError("upsample: pixel outside the target grid");
    }
    // Patch (gr, gc) covers a sy×sx pixel block; its center sits at pixel
    // coordinate gr·sy + (sy−1)/2. Inverting that anchors the interpolation.
    const double sy = static_cast<double>(target_h) / grid_h;
    const double sx = static_cast<double>(target_w) / grid_w;
    const double gy = (v - (sy - 1.0) / 2.0) / sy;
    const double gx = (u - (sx - 1.0) / 2.0) / sx;

    const auto clamp_floor = [](double g, int n) {
        long f = static_cast<long>(std::floor(g));
        if (f < 0) f = 0;
        if (f > n - 1) f = n - 1;
        return static_cast<int>(f);
    };
    const int r0 = clamp_floor(gy, grid_h);
    const int r1 = std::min(r0 + 1, grid_h - 1);
    const int c0 = clamp_floor(gx, grid_w);
    const int c1 = std::min(c0 + 1, grid_w - 1);
    // Fractions clamped to [0,1]: pixels beyond the outermost patch centers
    // extend the edge value.
    const double fy = std::min(1.0, std::max(0.0, gy - r0));
    const double fx = std::min(1.0, std::max(0.0, gx - c0));

    BilinearTap tap;
    tap.rows[0] = static_cast<Eigen::Index>(r0) * grid_w + c0;
    tap.rows[1] = static_cast<Eigen::Index>(r0) * grid_w + c1;
    tap.rows[2] = static_cast<Eigen::Index>(r1) * grid_w + c0;
    tap.rows[3] = static_cast<Eigen::Index>(r1) * grid_w + c1;
    tap.weights[0] = (1.0 - fy) * (1.0 - fx);
    tap.weights[1] = (1.0 - fy) * fx;
    tap.weights[2] = fy * (1.0 - fx);
    tap.weights[3] = fy * fx;
    return tap;
}

void scatter_point_gradients(const MatXd& dpoints, const std::vector<int>& visibility,
                             const CorrespondenceSet& correspondences, int grid_size,
                             int input_resolution, int scale, MatXd& dtokens, FuseMode mode,
                             int total_views) {
    if (dtokens.rows() != static_cast<Eigen::Index>(grid_size) * grid_size ||
        dtokens.cols() != dpoints.cols()) {
        throw ConfigError("fusion: gradient grid dims inconsistent");
    }
    if (mode == FuseMode::kAllViews && total_views < 1) {
        throw ConfigError("fusion: all-view averaging needs the total view count");
    }
    for (const Correspondence& corr : correspondences.entries) {
        if (corr.point_index >= static_cast<uint32_t>(dpoints.rows())) {
            throw LogicError("fusion: correspondence references a point out of range");
        }
        const int count = visibility[corr.point_index];
        if (count <= 0) {
            throw LogicError("fusion: correspondence for a point marked invisible");
        }
        const int divisor = mode == FuseMode::kAllViews ? total_views : count;
        const int u = static_cast<int>(corr.u) / scale;
        const int v = static_cast<int>(corr.v) / scale;
        const BilinearTap tap =
            bilinear_tap(grid_size, grid_size, input_resolution, input_resolution, u, v);
        for (int i = 0; i < 4; ++i) {
            dtokens.row(tap.rows[i]) +=
                (tap.weights[i] / divisor) * dpoints.row(corr.point_index);
        }
    }
}

AnomalyResult anomaly_scores(const FusedPointFeatures& fused) {
    AnomalyResult result;
    result.point_scores = VecX<double>::Zero(fused.teacher.rows());
    for (Eigen::Index i = 0; i < fused.teacher.rows(); ++i) {
        if (fused.visibility[static_cast<std::size_t>(i)] == 0) {
            ++result.invisible_points;
            continue;  // unobserved geometry, never flagged
        }
        const VecX<double> t = fused.teacher.row(i).transpose();
        const VecX<double> s = fused.student.row(i).transpose();
        result.point_scores(i) = cosine_distance<double>(t, s);
    }
    result.object_score =
        result.point_scores.size() > 0 ? result.point_scores.maxCoeff() : 0.0;
    return result;
}

}  // namespace mvr
