#include "mvr/synthetic.hpp"

#include <cmath>
#include <numbers>

namespace mvr {

ShapeFamily shape_family_from_string(const std::string& name) {
    if (name == "sphere") return ShapeFamily::Sphere;
    if (name == "box") return ShapeFamily::Box;
    if (name == "cylinder") return ShapeFamily::Cylinder;
    throw ConfigError("unknown shape family '" + name + "'");
}

std::string to_string(ShapeFamily family) {
    switch (family) {
        case ShapeFamily::Sphere: return "sphere";
        case ShapeFamily::Box: return "box";
        case ShapeFamily::Cylinder: return "cylinder";
    }
    throw LogicError("unreachable shape family");
}

AnomalyKind anomaly_kind_from_string(const std::string& name) {
    if (name == "none") return AnomalyKind::None;
    if (name == "dent") return AnomalyKind::Dent;
    if (name == "bulge") return AnomalyKind::Bulge;
    throw ConfigError("unknown anomaly kind '" + name + "'");
}

std::string to_string(AnomalyKind kind) {
    switch (kind) {
        case AnomalyKind::None: return "none";
        case AnomalyKind::Dent: return "dent";
        case AnomalyKind::Bulge: return "bulge";
    }
    throw LogicError("unreachable anomaly kind");
}

namespace {

constexpr double kBoxHalf[3] = {0.8, 0.65, 0.5};
constexpr double kCylRadius = 0.6;
constexpr double kCylHalfHeight = 0.8;

double shape_extent(ShapeFamily family) {
    switch (family) {
        case ShapeFamily::Sphere: return 1.0;
        case ShapeFamily::Box:
            return std::sqrt(kBoxHalf[0] * kBoxHalf[0] + kBoxHalf[1] * kBoxHalf[1] +
                             kBoxHalf[2] * kBoxHalf[2]);
        case ShapeFamily::Cylinder:
            return std::sqrt(kCylRadius * kCylRadius + kCylHalfHeight * kCylHalfHeight);
    }
    throw LogicError("unreachable shape family");
}

struct SurfaceSample {
    Vec3 position;
    Vec3 normal;
};

SurfaceSample sample_sphere(RandomStream& rng) {
    const double z = rng.uniform(-1.0, 1.0);
    const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const Vec3 dir(r * std::cos(theta), r * std::sin(theta), z);
    return {dir, dir};
}

SurfaceSample sample_box(RandomStream& rng) {
    // Pick one of the six faces with probability proportional to its area.
    const double area_x = kBoxHalf[1] * kBoxHalf[2];
    const double area_y = kBoxHalf[0] * kBoxHalf[2];
    const double area_z = kBoxHalf[0] * kBoxHalf[1];
    const double total = 2.0 * (area_x + area_y + area_z);
    double pick = rng.uniform(0.0, total);
    int axis;
    if (pick < 2.0 * area_x) {
        axis = 0;
    } else if (pick < 2.0 * (area_x + area_y)) {
        axis = 1;
        pick -= 2.0 * area_x;
    } else {
        axis = 2;
        pick -= 2.0 * (area_x + area_y);
    }
    const double area = axis == 0 ? area_x : axis == 1 ? area_y : area_z;
    const double sign = pick < area ? 1.0 : -1.0;
    const int a = (axis + 1) % 3;
    const int b = (axis + 2) % 3;
    Vec3 p = Vec3::Zero();
    p[axis] = sign * kBoxHalf[axis];
    p[a] = rng.uniform(-kBoxHalf[a], kBoxHalf[a]);
    p[b] = rng.uniform(-kBoxHalf[b], kBoxHalf[b]);
    Vec3 n = Vec3::Zero();
    n[axis] = sign;
    return {p, n};
}

SurfaceSample sample_cylinder(RandomStream& rng) {
    const double side_area = 2.0 * std::numbers::pi * kCylRadius * (2.0 * kCylHalfHeight);
    const double cap_area = std::numbers::pi * kCylRadius * kCylRadius;
    const double total = side_area + 2.0 * cap_area;
    const double pick = rng.uniform(0.0, total);
    if (pick < side_area) {
        const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const double z = rng.uniform(-kCylHalfHeight, kCylHalfHeight);
        const Vec3 n(std::cos(theta), std::sin(theta), 0.0);
        return {Vec3(kCylRadius * n.x(), kCylRadius * n.y(), z), n};
    }
    const double sign = pick < side_area + cap_area ? 1.0 : -1.0;
    const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double r = kCylRadius * std::sqrt(rng.u01());
    return {Vec3(r * std::cos(theta), r * std::sin(theta), sign * kCylHalfHeight),
            Vec3(0.0, 0.0, sign)};
}

SurfaceSample sample_surface(ShapeFamily family, RandomStream& rng) {
    switch (family) {
        case ShapeFamily::Sphere: return sample_sphere(rng);
        case ShapeFamily::Box: return sample_box(rng);
        case ShapeFamily::Cylinder: return sample_cylinder(rng);
    }
    throw LogicError("unreachable shape family");
}

}  // namespace

void SyntheticParams::validate() const {
    if (n_points < 100) throw ConfigError("synthetic: n_points must be >= 100");
    if (anomaly != AnomalyKind::None) {
        if (!(anomaly_radius > 0.0)) throw ConfigError("synthetic: anomaly radius must be > 0");
        if (!(anomaly_radius < shape_extent(family))) {
            throw ConfigError("synthetic: anomaly radius must be smaller than the shape extent");
        }
        if (!(anomaly_depth > 0.0)) throw ConfigError("synthetic: anomaly depth must be > 0");
    }
}

PointCloud make_synthetic(const SyntheticParams& params, RandomStream& rng) {
    params.validate();
    // Draw the defect centre first so point positions do not depend on the
    // anomaly parameters (only the predicate applied to them does).
    const SurfaceSample centre = sample_surface(params.family, rng);
    const double sign = params.anomaly == AnomalyKind::Dent ? -1.0 : 1.0;

    PointCloud cloud;
    cloud.points.reserve(params.n_points);
    cloud.labels.assign(params.n_points, 0);
    for (std::size_t i = 0; i < params.n_points; ++i) {
        SurfaceSample s = sample_surface(params.family, rng);
        if (params.anomaly != AnomalyKind::None &&
            (s.position - centre.position).norm() < params.anomaly_radius) {
            s.position += sign * params.anomaly_depth * s.normal;
            cloud.labels[i] = 1;
        }
        cloud.points.push_back(s.position);
    }
    return cloud;
}

}  // namespace mvr
