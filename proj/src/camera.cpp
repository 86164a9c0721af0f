#include "mvr/camera.hpp"

#include <cmath>
#include <numbers>

namespace mvr {

void CameraIntrinsics::validate() const {
    if (width < 1 || height < 1) throw ConfigError("intrinsics: image size must be >= 1");
    if (!(fx > 0.0) || !(fy > 0.0)) throw ConfigError("intrinsics: focal lengths must be > 0");
    if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height)) {
        throw ConfigError("intrinsics: principal point must lie inside the image");
    }
}

CameraIntrinsics default_intrinsics(int resolution, double focal_base) {
    if (resolution < 1) throw ConfigError("intrinsics: resolution must be >= 1");
    if (!(focal_base > 0.0)) throw ConfigError("intrinsics: focal base must be > 0");
    CameraIntrinsics k;
    k.fx = k.fy = focal_base * (static_cast<double>(resolution) / 672.0);
    k.cx = k.cy = resolution / 2.0;
    k.width = k.height = resolution;
    return k;
}

void Pose::validate() const {
    const Eigen::Matrix3d gram = rotation.transpose() * rotation;
    if ((gram - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-9) {
        throw DataError("pose: rotation is not orthonormal");
    }
    if (std::abs(rotation.determinant() - 1.0) > 1e-9) {
        throw DataError("pose: rotation determinant is not +1");
    }
}

namespace {

Pose look_at_origin(const Vec3& center) {
    // Optical axis through the origin; z_cam points from the camera into the
    // scene, so it is the unit vector from the centre towards the origin.
    const Vec3 z_cam = -center.normalized();
    int up_axis = 0;
    double best = std::abs(z_cam.x());
    for (int a = 1; a < 3; ++a) {
        const double align = std::abs(z_cam[a]);
        if (align < best) {
            best = align;
            up_axis = a;
        }
    }
    const Vec3 up = Vec3::Unit(up_axis);
    const Vec3 x_cam = up.cross(z_cam).normalized();
    const Vec3 y_cam = z_cam.cross(x_cam);
    Pose pose;
    pose.rotation.row(0) = x_cam;
    pose.rotation.row(1) = y_cam;
    pose.rotation.row(2) = z_cam;
    pose.translation = -pose.rotation * center;
    return pose;
}

}  // namespace

std::vector<Pose> generate_view_poses(int n_views, double radius) {
    if (n_views < 1) throw ConfigError("poses: n_views must be >= 1");
    if (!(radius > 1.0)) {
        throw ConfigError("poses: camera distance must exceed the normalized object radius 1");
    }
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    std::vector<Pose> poses;
    poses.reserve(static_cast<std::size_t>(n_views));
    for (int i = 0; i < n_views; ++i) {
        const double z =
            n_views == 1 ? 1.0 : 1.0 - 2.0 * static_cast<double>(i) / (n_views - 1);
        const double ring = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double azimuth = static_cast<double>(i) * golden;
        const Vec3 dir(ring * std::cos(azimuth), ring * std::sin(azimuth), z);
        poses.push_back(look_at_origin(radius * dir));
    }
    return poses;
}

Projection project_point(const Vec3& p, const Pose& pose, const CameraIntrinsics& k) {
    const Vec3 cam = pose.rotation * p + pose.translation;
    Projection out;
    out.z = cam.z();
    if (std::abs(cam.z()) < 1e-12) return out;  // on the camera plane; culled
    out.u = k.fx * cam.x() / cam.z() + k.cx;
    out.v = k.fy * cam.y() / cam.z() + k.cy;
    out.valid = true;
    return out;
}

Vec3 inverse_map(double u, double v, double z, const Pose& pose, const CameraIntrinsics& k) {
    if (!(z > 0.0)) throw DataError("inverse_map: depth must be > 0");
    const Vec3 cam((u - k.cx) / k.fx * z, (v - k.cy) / k.fy * z, z);
    return pose.rotation.transpose() * (cam - pose.translation);
}

}  // namespace mvr
