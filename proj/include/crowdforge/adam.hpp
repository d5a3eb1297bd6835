#pragma once

#include <cmath>

#include "crowdforge/parameter_store.hpp"

namespace crowdforge {

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// One bias-corrected Adam update over every group in the store, in place.
// `step` counts from 1; gradient buffers are left untouched.
inline void adam_step(ParameterStore& store, const AdamConfig& cfg, long step) {
    if (step < 1) throw ContractError("adam_step: step index must be >= 1");
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
    for (ParameterStore::GroupId g = 0; g < store.group_count(); ++g) {
        auto values = store.values(g);
        auto grads = store.grads(g);
        auto m = store.adam_m(g);
        auto v = store.adam_v(g);
        for (std::size_t k = 0; k < values.size(); ++k) {
            m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * grads[k];
            v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * grads[k] * grads[k];
            const double m_hat = m[k] / bc1;
            const double v_hat = v[k] / bc2;
            values[k] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
        }
    }
}

} // namespace crowdforge
