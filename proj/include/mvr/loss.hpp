#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "mvr/common.hpp"
#include "mvr/mat.hpp"

// Hard-mining global cosine loss: one cosine distance per sample over the
// flattened feature tensor, with the gradient contribution of well-restored
// feature points shrunk by a constant factor (forward value unchanged).

namespace mvr {

struct LossConfig {
    double k_pct = 0.9;          // fraction of feature points gradient-shrunk per batch
    double shrink_factor = 0.1;  // multiplier applied to their backward contribution
    bool per_view = false;       // score per-view token maps instead of fused points

    void validate() const {
        if (k_pct < 0.0 || k_pct > 1.0) throw ConfigError("loss: k_pct must be in [0, 1]");
        if (shrink_factor <= 0.0 || shrink_factor > 1.0) {
            throw ConfigError("loss: shrink_factor must be in (0, 1]");
        }
    }
};

// 1 − a·b/(‖a‖‖b‖); if either vector has zero norm the distance is defined
// as 1 (maximally non-informative) rather than NaN.
template <class T>
T cosine_distance(const VecX<T>& a, const VecX<T>& b) {
    const T na = a.norm();
    const T nb = b.norm();
    if (na == T(0) || nb == T(0)) return T(1);
    return T(1) - a.dot(b) / (na * nb);
}

// Linear-interpolation quantile (the numpy default): index h = q·(m−1)
// into the sorted values, interpolating between the bracketing entries.
double quantile_linear(std::vector<double> values, double q);

// True ⇔ the distance is strictly below the k_pct quantile of the batch.
std::vector<char> hard_mining_select(const std::vector<double>& distances, double k_pct);

// Cosine distance between the flattened teacher and student matrices plus
// the exact gradient with respect to the student. Rows of `shrink_mask`
// (when non-empty, one flag per row) have their gradient multiplied by
// shrink_factor; the forward value never changes. The teacher is constant.
template <class T>
std::pair<T, MatX<T>> global_cosine_loss(const MatX<T>& teacher, const MatX<T>& student,
                                         const std::vector<char>& shrink_mask,
                                         T shrink_factor) {
    if (teacher.rows() != student.rows() || teacher.cols() != student.cols()) {
        throw ConfigError("loss: teacher/student shapes differ");
    }
    if (!shrink_mask.empty() &&
        static_cast<Eigen::Index>(shrink_mask.size()) != student.rows()) {
        throw ConfigError("loss: shrink mask size does not match feature rows");
    }
    const T nt = teacher.norm();
    const T ns = student.norm();
    if (!(nt > T(0)) || !(ns > T(0))) {
        throw NumericError("loss: zero-norm flattened feature vector");
    }
    const T dot = (teacher.array() * student.array()).sum();
    const T cos_sim = dot / (nt * ns);
    const T loss = T(1) - cos_sim;

    // d(1 − tᵀs/(‖t‖‖s‖))/ds = −t/(‖t‖‖s‖) + cos·s/‖s‖².
    MatX<T> grad = (-teacher / (nt * ns) + (cos_sim / (ns * ns)) * student).eval();
    if (!shrink_mask.empty()) {
        for (Eigen::Index r = 0; r < grad.rows(); ++r) {
            if (shrink_mask[static_cast<std::size_t>(r)]) grad.row(r) *= shrink_factor;
        }
    }
    return {loss, std::move(grad)};
}

}  // namespace mvr
