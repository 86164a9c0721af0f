#include "mvr/point_cloud.hpp"

#include <cmath>
#include <string>

namespace mvr {

void PointCloud::validate() const {
    if (points.empty()) throw DataError("point cloud: N must be >= 1");
    for (std::size_t i = 0; i < points.size(); ++i) {
        const Vec3& p = points[i];
        if (!std::isfinite(p.x()) || !std::isfinite(p.y()) || !std::isfinite(p.z())) {
            throw DataError("point cloud: non-finite coordinate at vertex " + std::to_string(i));
        }
    }
    if (!labels.empty() && labels.size() != points.size()) {
        throw DataError("point cloud: label count " + std::to_string(labels.size()) +
                        " does not match point count " + std::to_string(points.size()));
    }
}

NormalizeResult normalize(const PointCloud& cloud) {
    cloud.validate();
    Vec3 center = Vec3::Zero();
    for (const Vec3& p : cloud.points) center += p;
    center /= static_cast<double>(cloud.points.size());

    double scale = 0.0;
    for (const Vec3& p : cloud.points) scale = std::max(scale, (p - center).norm());
    if (scale <= 0.0) scale = 1.0;

    NormalizeResult out;
    out.center = center;
    out.scale = scale;
    out.cloud.points.reserve(cloud.points.size());
    for (const Vec3& p : cloud.points) out.cloud.points.push_back((p - center) / scale);
    out.cloud.labels = cloud.labels;
    return out;
}

void DatasetSplit::validate() const {
    for (std::size_t i = 0; i < train.size(); ++i) {
        train[i].validate();
        for (uint8_t l : train[i].labels) {
            if (l != 0) {
                throw DataError("train cloud " + std::to_string(i) +
                                " carries anomalous point labels; training data must be normal");
            }
        }
    }
    for (const TestSample& s : test) s.cloud.validate();
}

}  // namespace mvr
