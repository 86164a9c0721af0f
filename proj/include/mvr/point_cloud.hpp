#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <utility>
#include <vector>

#include "mvr/common.hpp"

namespace mvr {

using Vec3 = Eigen::Vector3d;

// N x 3 positions with optional per-point binary anomaly labels.
// Immutable by convention once built; everything downstream shares it const.
struct PointCloud {
    std::vector<Vec3> points;
    std::vector<uint8_t> labels;  // empty, or one flag per point (1 = anomalous)

    std::size_t size() const { return points.size(); }
    bool has_labels() const { return !labels.empty(); }

    // N >= 1, finite coordinates, label length matches when present.
    void validate() const;
};

struct NormalizeResult {
    PointCloud cloud;
    Vec3 center;
    double scale;
};

// Centers on the centroid and scales so the farthest point sits at norm 1.
// A degenerate cloud (single repeated point) keeps scale 1.
NormalizeResult normalize(const PointCloud& cloud);

// One test sample: cloud plus its object-level label (1 = anomalous).
struct TestSample {
    PointCloud cloud;
    int object_label = 0;
};

struct DatasetSplit {
    std::vector<PointCloud> train;  // normal only
    std::vector<TestSample> test;

    // Every train cloud must be free of positive point labels.
    void validate() const;
};

}  // namespace mvr
