#include "ludor/losses.hpp"

#include <cmath>

#include "ludor/error.hpp"

namespace ludor {

std::optional<Vec> normalized_weights(const Vec& kappa) {
    const double total = kappa.sum();
    if (!(total > 0.0)) {
        return std::nullopt;
    }
    return Vec(kappa / total);
}

namespace {

WeightedLoss weighted(const Vec& terms, const DiscrepancyWeights& weights) {
    if (terms.size() != weights.kappa.size()) {
        throw ConfigError("weighted loss: batch and weight lengths differ");
    }
    auto w = normalized_weights(weights.kappa);
    if (!w) {
        throw InternalError("weighted loss: discrepancy weights sum to zero");
    }
    WeightedLoss out;
    out.loss = w->dot(terms);
    out.sample_scale = std::move(*w);
    return out;
}

}  // namespace

WeightedLoss weighted_critic_loss(const Vec& td_errors_sq, const DiscrepancyWeights& weights) {
    return weighted(td_errors_sq, weights);
}

WeightedLoss weighted_actor_loss(const Vec& per_sample_objective, const DiscrepancyWeights& weights) {
    return weighted(per_sample_objective, weights);
}

Mat concat_rows(const Mat& top, const Mat& bottom) {
    Mat out(top.rows() + bottom.rows(), top.cols());
    out << top, bottom;
    return out;
}

LossGrad critic_regression_loss(const MlpParams& q, const Mat& states, const Mat& actions, const Vec& targets,
                                const Vec& w) {
    auto fw = mlp_forward(q, concat_rows(states, actions));
    const Vec delta = fw.output.row(0).transpose() - targets;
    LossGrad out;
    out.loss = w.dot(delta.cwiseProduct(delta));
    const Mat g = (2.0 * w.cwiseProduct(delta)).transpose();
    out.grad = mlp_backward(q, fw.cache, g).params;
    return out;
}

double td3bc_lambda(const MlpParams& actor, const MlpParams& q1, const Mat& states, double alpha) {
    const Mat pi = mlp_predict(actor, states);
    const Mat q = mlp_predict(q1, concat_rows(states, pi));
    const double denom = q.cwiseAbs().mean();
    return alpha / std::max(denom, 1e-12);
}

LossGrad td3bc_actor_loss(const MlpParams& actor, const MlpParams& q1, const Mat& states, const Mat& actions,
                          const Vec& w, double lambda) {
    auto fa = mlp_forward(actor, states);
    const Mat& pi = fa.output;
    auto fq = mlp_forward(q1, concat_rows(states, pi));
    const auto ad = static_cast<double>(pi.rows());
    const Mat diff = pi - actions;
    const Vec q = fq.output.row(0).transpose();
    const Vec bc = diff.array().square().colwise().sum().transpose() / ad;
    LossGrad out;
    out.loss = w.dot(-lambda * q + bc);

    const Mat gq = (-lambda * w).transpose();
    const Mat gin = mlp_backward(q1, fq.cache, gq).input;
    Mat gpi = gin.bottomRows(pi.rows());
    gpi += (2.0 / ad) * (diff.array().rowwise() * w.transpose().array()).matrix();
    out.grad = mlp_backward(actor, fa.cache, gpi).params;
    return out;
}

double expectile_loss(const Vec& diff, double tau) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < diff.size(); ++i) {
        const double u = diff(i);
        const double weight = u < 0.0 ? 1.0 - tau : tau;
        total += weight * u * u;
    }
    return total / static_cast<double>(diff.size());
}

LossGrad expectile_value_loss(const MlpParams& value, const Mat& states, const Vec& q_target, double tau) {
    auto fv = mlp_forward(value, states);
    const Vec u = q_target - fv.output.row(0).transpose();
    const auto n = static_cast<double>(u.size());
    LossGrad out;
    out.loss = expectile_loss(u, tau);
    Mat g(1, u.size());
    for (Eigen::Index i = 0; i < u.size(); ++i) {
        const double weight = u(i) < 0.0 ? 1.0 - tau : tau;
        g(0, i) = -2.0 * weight * u(i) / n;
    }
    out.grad = mlp_backward(value, fv.cache, g).params;
    return out;
}

Vec awr_weights(const Vec& advantage, double beta, double max_weight) {
    return (beta * advantage).array().exp().min(max_weight).matrix();
}

LossGrad awr_actor_loss(const MlpParams& actor, const Mat& states, const Mat& actions, const Vec& awr, const Vec& w) {
    auto fa = mlp_forward(actor, states);
    const Mat diff = fa.output - actions;
    const Vec sq = diff.array().square().colwise().sum().transpose();
    const Vec coeff = w.cwiseProduct(awr);
    LossGrad out;
    out.loss = coeff.dot(sq);
    const Mat g = 2.0 * (diff.array().rowwise() * coeff.transpose().array()).matrix();
    out.grad = mlp_backward(actor, fa.cache, g).params;
    return out;
}

LossGrad bc_loss(const MlpParams& policy, const Mat& states, const Mat& actions) {
    if (states.cols() == 0) {
        throw ConfigError("bc_loss on an empty batch");
    }
    auto fp = mlp_forward(policy, states);
    const Mat diff = fp.output - actions;
    const auto n = static_cast<double>(diff.size());
    LossGrad out;
    out.loss = diff.squaredNorm() / n;
    out.grad = mlp_backward(policy, fp.cache, (2.0 / n) * diff).params;
    return out;
}

LossGrad regression_loss(const MlpParams& net, const Mat& inputs, const Vec& targets) {
    auto f = mlp_forward(net, inputs);
    const Vec delta = f.output.row(0).transpose() - targets;
    const auto n = static_cast<double>(delta.size());
    LossGrad out;
    out.loss = delta.squaredNorm() / n;
    out.grad = mlp_backward(net, f.cache, ((2.0 / n) * delta).transpose()).params;
    return out;
}

}  // namespace ludor
