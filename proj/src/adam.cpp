#include "ludor/adam.hpp"

#include <cmath>

#include "ludor/error.hpp"

namespace ludor {

AdamState make_adam(std::size_t param_count, double lr) {
    if (!(lr > 0.0)) {
        throw ConfigError("learning rate must be positive");
    }
    AdamState s;
    s.m = Vec::Zero(static_cast<Eigen::Index>(param_count));
    s.v = Vec::Zero(static_cast<Eigen::Index>(param_count));
    s.lr = lr;
    return s;
}

void adam_step(MlpParams& params, const Vec& grad, AdamState& state) {
    const auto n = static_cast<Eigen::Index>(params.param_count());
    if (grad.size() != n || state.m.size() != n || state.v.size() != n) {
        throw ConfigError("adam_step: gradient/state length does not match parameters");
    }
    if (!grad.allFinite()) {
        throw TrainingError("non-finite gradient", state.t + 1);
    }
    state.t += 1;
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad;
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));

    Eigen::Index off = 0;
    auto update = [&](double* data, Eigen::Index len) {
        Eigen::Map<Vec> p(data, len);
        const auto m_hat = state.m.segment(off, len).array() / c1;
        const auto v_hat = state.v.segment(off, len).array() / c2;
        p.array() -= state.lr * m_hat / (v_hat.sqrt() + state.eps);
        off += len;
    };
    for (auto& l : params.layers) {
        update(l.weight.data(), l.weight.size());
        update(l.bias.data(), l.bias.size());
    }
}

}  // namespace ludor
