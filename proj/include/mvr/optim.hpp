#pragma once

#include <cstddef>
#include <vector>

#include "mvr/common.hpp"

// stableAdamW with AMSGrad: AdamW with decoupled weight decay, the second
// moment replaced by its running max in the denominator, and each tensor's
// update rescaled to RMS <= 1 before the learning rate is applied.

namespace mvr {

struct OptimizerConfig {
    double lr = 2e-4;
    double weight_decay = 1e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    void validate() const {
        if (lr <= 0.0) throw ConfigError("optimizer: lr must be > 0");
        if (weight_decay < 0.0) throw ConfigError("optimizer: weight decay must be >= 0");
        if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) {
            throw ConfigError("optimizer: betas must be in [0, 1)");
        }
        if (eps <= 0.0) throw ConfigError("optimizer: eps must be > 0");
    }
};

// Contiguous float storage of one parameter tensor (Eigen matrices qualify).
struct TensorView {
    float* data = nullptr;
    std::size_t size = 0;
};

struct ConstTensorView {
    const float* data = nullptr;
    std::size_t size = 0;
};

struct OptimizerState {
    long step = 0;
    std::vector<std::vector<double>> m;     // first moments
    std::vector<std::vector<double>> v;     // second moments
    std::vector<std::vector<double>> vmax;  // AMSGrad running max of v

    void init(const std::vector<TensorView>& params);
};

// One update over all tensors. Throws NumericError on any non-finite
// gradient before mutating weights or state.
void stable_adamw_step(const std::vector<TensorView>& params,
                       const std::vector<ConstTensorView>& grads, OptimizerState& state,
                       const OptimizerConfig& cfg);

}  // namespace mvr
