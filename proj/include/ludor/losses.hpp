#pragma once

#include <optional>

#include "ludor/kappa.hpp"
#include "ludor/mlp.hpp"

namespace ludor {

/// Scalar loss and its gradient with respect to the trained network's flat
/// parameters.
struct LossGrad {
    double loss = 0.0;
    Vec grad;
};

/// kappa_b / sum(kappa); empty optional when the sum is zero (batch must be
/// skipped). Scaling kappa by a power of two leaves the result bit-identical.
std::optional<Vec> normalized_weights(const Vec& kappa);

struct WeightedLoss {
    double loss = 0.0;
    Vec sample_scale;  // d loss / d term_b = kappa_b / sum(kappa)
};

/// sum_b kappa_b * terms_b / sum_b kappa_b. Throws InternalError if the
/// weights sum to zero; callers check normalized_weights first.
WeightedLoss weighted_critic_loss(const Vec& td_errors_sq, const DiscrepancyWeights& weights);
/// Same normalization applied to per-sample actor objectives (already signed
/// so that lower is better).
WeightedLoss weighted_actor_loss(const Vec& per_sample_objective, const DiscrepancyWeights& weights);

/// Stacks states over actions into critic inputs.
Mat concat_rows(const Mat& top, const Mat& bottom);

/// sum_b w_b (Q(s_b, a_b) - y_b)^2 with w already normalized.
LossGrad critic_regression_loss(const MlpParams& q, const Mat& states, const Mat& actions, const Vec& targets,
                                const Vec& w);

/// alpha / mean|Q1(s, pi(s))|, treated as a constant by the actor gradient.
double td3bc_lambda(const MlpParams& actor, const MlpParams& q1, const Mat& states, double alpha);

/// sum_b w_b [ -lambda Q1(s_b, pi(s_b)) + mean_d (pi(s_b) - a_b)^2 ].
LossGrad td3bc_actor_loss(const MlpParams& actor, const MlpParams& q1, const Mat& states, const Mat& actions,
                          const Vec& w, double lambda);

/// mean_b |tau - 1(u_b < 0)| u_b^2 with u = q_target - V(s).
LossGrad expectile_value_loss(const MlpParams& value, const Mat& states, const Vec& q_target, double tau);
double expectile_loss(const Vec& diff, double tau);

/// min(exp(beta * advantage), max_weight), elementwise.
Vec awr_weights(const Vec& advantage, double beta, double max_weight);

/// sum_b w_b * awr_b * sum_d (pi(s_b) - a_b)^2, deterministic actor.
LossGrad awr_actor_loss(const MlpParams& actor, const Mat& states, const Mat& actions, const Vec& awr, const Vec& w);

/// mean over batch and action dimensions of (pi(s) - a)^2.
LossGrad bc_loss(const MlpParams& policy, const Mat& states, const Mat& actions);

/// Squared-error regression of a scalar-output network on (input, target) pairs, mean over batch.
LossGrad regression_loss(const MlpParams& net, const Mat& inputs, const Vec& targets);

}  // namespace ludor
