#pragma once

#include <cstdint>

#include "ludor/mlp.hpp"

namespace ludor {

struct AdamState {
    Vec m;
    Vec v;
    std::int64_t t = 0;
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

AdamState make_adam(std::size_t param_count, double lr);
inline AdamState make_adam(const MlpParams& params, double lr) { return make_adam(params.param_count(), lr); }

/// One bias-corrected Adam update of `params` in place. Throws TrainingError
/// (carrying the step index about to be taken) on a non-finite gradient.
void adam_step(MlpParams& params, const Vec& grad, AdamState& state);

}  // namespace ludor
