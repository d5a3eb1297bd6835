#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "crowdforge/parameter_store.hpp"

namespace crowdforge {

// Loss callback for the finite-difference check. Must evaluate the loss at the
// store's current parameter values; when `accumulate_grads` is set it must also
// add d(loss)/d(parameter) into the store's gradient buffers.
using GradCheckLoss = std::function<double(ParameterStore&, bool accumulate_grads)>;

// Compares the analytic gradient of `loss` against central finite differences
// with the given step, coordinate by coordinate. Returns the max over
// parameters of |analytic - central| / max(1, |analytic|).
inline double finite_difference_check(ParameterStore& params, const GradCheckLoss& loss,
                                      double step) {
    if (!(step > 0.0)) throw ContractError("finite_difference_check: step must be positive");

    params.zero_gradients();
    const double base = loss(params, true);
    if (!std::isfinite(base)) throw NumericError("finite_difference_check: non-finite loss");

    std::vector<std::vector<double>> analytic;
    analytic.reserve(params.group_count());
    for (ParameterStore::GroupId g = 0; g < params.group_count(); ++g) {
        auto grads = params.grads(g);
        analytic.emplace_back(grads.begin(), grads.end());
    }

    double worst = 0.0;
    for (ParameterStore::GroupId g = 0; g < params.group_count(); ++g) {
        auto values = params.values(g);
        for (std::size_t k = 0; k < values.size(); ++k) {
            const double saved = values[k];
            values[k] = saved + step;
            const double up = loss(params, false);
            values[k] = saved - step;
            const double down = loss(params, false);
            values[k] = saved;
            if (!std::isfinite(up) || !std::isfinite(down))
                throw NumericError("finite_difference_check: non-finite perturbed loss");
            const double central = (up - down) / (2.0 * step);
            const double rel =
                std::abs(analytic[g][k] - central) / std::max(1.0, std::abs(analytic[g][k]));
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

} // namespace crowdforge
