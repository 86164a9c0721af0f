#include "mvr/render.hpp"

#include <cmath>

namespace mvr {

ViewRender render_view(const PointCloud& cloud, const Pose& pose, const CameraIntrinsics& k,
                       int pose_index) {
    cloud.validate();
    k.validate();
    ViewRender out;
    out.pose_index = pose_index;
    out.depth = MatXd::Constant(k.height, k.width, kEmptyDepth);
    out.owner = MatXi::Constant(k.height, k.width, -1);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const Projection pr = project_point(cloud.points[i], pose, k);
        if (!pr.valid || pr.z <= 0.0) continue;
        // Pixel p covers (p-0.5, p+0.5]: round half down.
        const long u = round_half_down(pr.u);
        const long v = round_half_down(pr.v);
        if (u < 0 || u >= k.width || v < 0 || v >= k.height) continue;
        if (pr.z < out.depth(v, u)) {  // ties keep the earlier (lower) index
            out.depth(v, u) = pr.z;
            out.owner(v, u) = static_cast<int32_t>(i);
        }
    }
    out.image = depth_to_intensity(out.depth);
    return out;
}

MatXd depth_to_intensity(const MatXd& depth) {
    double z_min = kEmptyDepth;
    double z_max = -kEmptyDepth;
    for (Eigen::Index r = 0; r < depth.rows(); ++r) {
        for (Eigen::Index c = 0; c < depth.cols(); ++c) {
            const double z = depth(r, c);
            if (z == kEmptyDepth) continue;
            z_min = std::min(z_min, z);
            z_max = std::max(z_max, z);
        }
    }
    MatXd intensity = MatXd::Zero(depth.rows(), depth.cols());
    if (z_min == kEmptyDepth) return intensity;  // all-empty view
    const double range = z_max - z_min;
    for (Eigen::Index r = 0; r < depth.rows(); ++r) {
        for (Eigen::Index c = 0; c < depth.cols(); ++c) {
            const double z = depth(r, c);
            if (z == kEmptyDepth) continue;
            intensity(r, c) = range > 0.0 ? (z_max - z) / range : 1.0;
        }
    }
    return intensity;
}

MatXd downsample(const MatXd& image, int target_height, int target_width) {
    if (target_height < 1 || target_width < 1) {
        throw ConfigError("downsample: target size must be >= 1");
    }
    if (image.rows() % target_height != 0 || image.cols() % target_width != 0) {
        throw ConfigError(
            "downsample: source resolution must be an integer multiple of the target; "
            "render at a multiple of 224");
    }
    const Eigen::Index sh = image.rows() / target_height;
    const Eigen::Index sw = image.cols() / target_width;
    MatXd out(target_height, target_width);
    for (Eigen::Index r = 0; r < target_height; ++r) {
        for (Eigen::Index c = 0; c < target_width; ++c) {
            out(r, c) = image.block(r * sh, c * sw, sh, sw).mean();
        }
    }
    return out;
}

MatX<uint8_t> quantize_intensity(const MatXd& intensity) {
    MatX<uint8_t> out(intensity.rows(), intensity.cols());
    for (Eigen::Index r = 0; r < intensity.rows(); ++r) {
        for (Eigen::Index c = 0; c < intensity.cols(); ++c) {
            const auto level = static_cast<double>(round_half_up(intensity(r, c) * 255.0));
            out(r, c) = static_cast<uint8_t>(std::min(255.0, std::max(0.0, level)));
        }
    }
    return out;
}

MatXf dequantize_intensity(const MatX<uint8_t>& image) {
    return image.cast<float>() / 255.0f;
}

CorrespondenceSet correspondences_from(const ViewRender& render) {
    CorrespondenceSet set;
    for (Eigen::Index v = 0; v < render.owner.rows(); ++v) {
        for (Eigen::Index u = 0; u < render.owner.cols(); ++u) {
            const int32_t idx = render.owner(v, u);
            if (idx < 0) continue;
            set.entries.push_back({static_cast<uint32_t>(idx), static_cast<uint16_t>(u),
                                   static_cast<uint16_t>(v)});
        }
    }
    return set;
}

}  // namespace mvr
