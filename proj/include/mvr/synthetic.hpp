#pragma once

#include <string>

#include "mvr/common.hpp"
#include "mvr/point_cloud.hpp"

namespace mvr {

enum class ShapeFamily { Sphere, Box, Cylinder };

ShapeFamily shape_family_from_string(const std::string& name);
std::string to_string(ShapeFamily family);

enum class AnomalyKind { None, Dent, Bulge };

AnomalyKind anomaly_kind_from_string(const std::string& name);
std::string to_string(AnomalyKind kind);

struct SyntheticParams {
    ShapeFamily family = ShapeFamily::Sphere;
    std::size_t n_points = 16384;
    AnomalyKind anomaly = AnomalyKind::None;
    double anomaly_radius = 0.25;   // radius of the perturbed surface region
    double anomaly_depth = 0.1;     // displacement magnitude along the normal
    void validate() const;
};

// Samples a surface point cloud of the requested family. With an anomaly,
// points within anomaly_radius of a randomly chosen surface point are
// displaced along the local normal (inward for dents, outward for bulges)
// and labeled 1; everything else is labeled 0.
PointCloud make_synthetic(const SyntheticParams& params, RandomStream& rng);

}  // namespace mvr
