#pragma once

#include <cstdint>

#include "ludor/algo_config.hpp"
#include "ludor/mlp.hpp"

namespace ludor {

/// Per-sample loss weights over a batch.
struct DiscrepancyWeights {
    Vec kappa;
    Measure measure = Measure::uniform;
    /// Samples whose cosine was undefined (a zero-norm action) and got weight 1.
    std::size_t neutral_count = 0;

    double mean() const { return kappa.size() ? kappa.mean() : 0.0; }
};

DiscrepancyWeights uniform_weights(std::size_t batch);

/// kappa_b = 1 + cos(a_b, teacher_b). Columns are samples.
DiscrepancyWeights kappa_cosine(const Mat& batch_actions, const Mat& teacher_actions);

/// Divergence-based alternatives, each mapped to [0, 2] by d -> 2 exp(-d):
///  kl1: KL between diagonal Gaussians centred on a_b and teacher_b with the
///       per-dimension std of each action batch;
///  kl2: the same with a fixed std `fixed_std` for both;
///  js:  Jensen-Shannon analogue against the moment-matched mixture, using
///       the batch stds.
/// Empirical stds are floored at 1e-6.
DiscrepancyWeights kappa_variant(Measure measure, const Mat& batch_actions, const Mat& teacher_actions,
                                 double fixed_std);

/// Dispatches on `measure`.
DiscrepancyWeights compute_weights(Measure measure, const Mat& batch_actions, const Mat& teacher_actions,
                                   double fixed_std);

/// KL(N(m1, s1^2) || N(m2, s2^2)) for diagonal Gaussians, summed over dimensions.
double gaussian_kl(const Vec& m1, const Vec& s1, const Vec& m2, const Vec& s2);

}  // namespace ludor
