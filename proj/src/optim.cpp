#include "mvr/optim.hpp"

#include <cmath>

namespace mvr {

void OptimizerState::init(const std::vector<TensorView>& params) {
    step = 0;
    m.assign(params.size(), {});
    v.assign(params.size(), {});
    vmax.assign(params.size(), {});
    for (std::size_t t = 0; t < params.size(); ++t) {
        m[t].assign(params[t].size, 0.0);
        v[t].assign(params[t].size, 0.0);
        vmax[t].assign(params[t].size, 0.0);
    }
}

void stable_adamw_step(const std::vector<TensorView>& params,
                       const std::vector<ConstTensorView>& grads, OptimizerState& state,
                       const OptimizerConfig& cfg) {
    if (params.size() != grads.size() || params.size() != state.m.size()) {
        throw LogicError("optimizer: parameter/gradient/state tensor counts differ");
    }
    for (std::size_t t = 0; t < params.size(); ++t) {
        if (params[t].size != grads[t].size || params[t].size != state.m[t].size()) {
            throw LogicError("optimizer: tensor shapes differ from state");
        }
        for (std::size_t i = 0; i < grads[t].size; ++i) {
            if (!std::isfinite(grads[t].data[i])) {
                throw NumericError("optimizer: non-finite gradient (step aborted)");
            }
        }
    }

    ++state.step;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));

    std::vector<double> update;
    for (std::size_t t = 0; t < params.size(); ++t) {
        const std::size_t n = params[t].size;
        update.resize(n);
        double sq_sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double g = static_cast<double>(grads[t].data[i]);
            double& m = state.m[t][i];
            double& v = state.v[t][i];
            double& vmax = state.vmax[t][i];
            m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
            v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
            if (v > vmax) vmax = v;
            const double u = (m / bc1) / (std::sqrt(vmax / bc2) + cfg.eps);
            update[i] = u;
            sq_sum += u * u;
        }
        const double rms = n > 0 ? std::sqrt(sq_sum / static_cast<double>(n)) : 0.0;
        const double clip = rms > 1.0 ? 1.0 / rms : 1.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double w = static_cast<double>(params[t].data[i]);
            params[t].data[i] =
                static_cast<float>(w - cfg.lr * clip * update[i] - cfg.lr * cfg.weight_decay * w);
        }
    }
}

}  // namespace mvr
