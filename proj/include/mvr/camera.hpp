#pragma once

#include <vector>

#include <Eigen/Dense>

#include "mvr/common.hpp"
#include "mvr/point_cloud.hpp"

namespace mvr {

struct CameraIntrinsics {
    double fx = 0.0;
    double fy = 0.0;
    double cx = 0.0;
    double cy = 0.0;
    int width = 0;
    int height = 0;
    void validate() const;
};

// Square image of the given resolution with f = focal_base·(resolution/672)
// and the principal point at the image centre; frames a unit-norm cloud seen
// from distance 3 at roughly 70% fill, independent of resolution.
CameraIntrinsics default_intrinsics(int resolution, double focal_base = 500.0);

// World-to-camera transform: p_cam = rotation · p_world + translation.
struct Pose {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Vec3 translation = Vec3::Zero();
    void validate() const;  // orthonormal, det +1, both within 1e-9
    Vec3 camera_center() const { return -rotation.transpose() * translation; }
};

// Camera centres on a Fibonacci-sphere lattice of the given radius, each
// looking at the origin with the up-vector chosen as the world axis least
// aligned with the optical axis. The first centre sits on the +z pole.
std::vector<Pose> generate_view_poses(int n_views, double radius);

struct Projection {
    double u = 0.0;
    double v = 0.0;
    double z = 0.0;
    // False when the point lies on the camera plane (|z| < 1e-12); such
    // points are culled by callers, never an error.
    bool valid = false;
};

Projection project_point(const Vec3& p, const Pose& pose, const CameraIntrinsics& k);

// Exact algebraic inverse of project_point for z > 0 (z <= 0 is a domain
// error): p = Rᵀ·((u−cx)/fx·z, (v−cy)/fy·z, z)ᵀ − Rᵀ·t.
Vec3 inverse_map(double u, double v, double z, const Pose& pose, const CameraIntrinsics& k);

}  // namespace mvr
