#include "ludor/learners.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ludor/error.hpp"

namespace ludor {

namespace {

std::vector<std::size_t> layer_sizes(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out) {
    std::vector<std::size_t> s{in};
    s.insert(s.end(), hidden.begin(), hidden.end());
    s.push_back(out);
    return s;
}

void require_finite(const Vec& v, const char* what, std::int64_t step) {
    if (!v.allFinite()) {
        throw TrainingError(std::string("non-finite ") + what, step);
    }
}

void require_finite(double x, const char* what, std::int64_t step) {
    if (!std::isfinite(x)) {
        throw TrainingError(std::string("non-finite ") + what, step);
    }
}

Vec min_q(const MlpParams& q1, const MlpParams& q2, const Mat& sa) {
    const Mat a = mlp_predict(q1, sa);
    const Mat b = mlp_predict(q2, sa);
    return a.cwiseMin(b).row(0).transpose();
}

}  // namespace

MlpArch actor_arch(const EnvSpec& spec, const AlgoConfig& config) {
    MlpArch a;
    a.sizes = layer_sizes(spec.state_dim, config.hidden, spec.action_dim);
    a.hidden = Activation::relu;
    a.output = Activation::tanh;
    a.output_scale = spec.action_bound;
    return a;
}

MlpArch critic_arch(const EnvSpec& spec, const AlgoConfig& config) {
    MlpArch a;
    a.sizes = layer_sizes(spec.state_dim + spec.action_dim, config.hidden, 1);
    a.hidden = Activation::relu;
    a.output = Activation::identity;
    return a;
}

MlpArch value_arch(const EnvSpec& spec, const AlgoConfig& config) {
    MlpArch a;
    a.sizes = layer_sizes(spec.state_dim, config.hidden, 1);
    a.hidden = Activation::relu;
    a.output = Activation::identity;
    return a;
}

NetworkBundle make_bundle(const EnvSpec& spec, const AlgoConfig& config, BaseLearner base, const Rng& rng) {
    config.validate();
    NetworkBundle b;
    b.base = base;
    Rng r_actor = rng.fork(101);
    Rng r_teacher = rng.fork(102);
    Rng r_q1 = rng.fork(103);
    Rng r_q2 = rng.fork(104);
    Rng r_v = rng.fork(105);
    b.actor = make_mlp(actor_arch(spec, config), r_actor);
    b.actor_target = b.actor;
    b.teacher = make_mlp(actor_arch(spec, config), r_teacher);
    b.q1 = make_mlp(critic_arch(spec, config), r_q1);
    b.q2 = make_mlp(critic_arch(spec, config), r_q2);
    b.q1_target = b.q1;
    b.q2_target = b.q2;
    b.value = make_mlp(value_arch(spec, config), r_v);
    b.actor_opt = make_adam(b.actor, config.actor_lr);
    b.teacher_opt = make_adam(b.teacher, config.teacher_lr);
    b.q1_opt = make_adam(b.q1, config.critic_lr);
    b.q2_opt = make_adam(b.q2, config.critic_lr);
    b.value_opt = make_adam(b.value, config.vf_lr);
    return b;
}

Batch make_batch(const LabeledDataset& data, const std::vector<std::size_t>& idx) {
    Batch b;
    const auto n = static_cast<Eigen::Index>(idx.size());
    b.states.resize(data.states.rows(), n);
    b.actions.resize(data.actions.rows(), n);
    b.next_states.resize(data.next_states.rows(), n);
    b.rewards.resize(n);
    b.not_done.resize(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const auto i = static_cast<Eigen::Index>(idx[static_cast<std::size_t>(j)]);
        b.states.col(j) = data.states.col(i);
        b.actions.col(j) = data.actions.col(i);
        b.next_states.col(j) = data.next_states.col(i);
        b.rewards(j) = data.rewards(i);
        b.not_done(j) = data.dones[static_cast<std::size_t>(i)] ? 0.0 : 1.0;
    }
    return b;
}

Batch sample_batch(const LabeledDataset& data, std::size_t n, Rng& rng) {
    if (data.empty()) {
        throw DatasetError("cannot sample from an empty labeled dataset");
    }
    std::vector<std::size_t> idx(n);
    for (auto& i : idx) i = static_cast<std::size_t>(rng.below(data.size()));
    return make_batch(data, idx);
}

PairBatch sample_pairs(const UnlabeledDataset& data, std::size_t n, Rng& rng) {
    PairBatch b;
    if (data.empty()) {
        b.states.resize(data.states.rows(), 0);
        b.actions.resize(data.actions.rows(), 0);
        return b;
    }
    b.states.resize(data.states.rows(), static_cast<Eigen::Index>(n));
    b.actions.resize(data.actions.rows(), static_cast<Eigen::Index>(n));
    for (std::size_t j = 0; j < n; ++j) {
        const auto i = static_cast<Eigen::Index>(rng.below(data.size()));
        b.states.col(static_cast<Eigen::Index>(j)) = data.states.col(i);
        b.actions.col(static_cast<Eigen::Index>(j)) = data.actions.col(i);
    }
    return b;
}

std::string to_string(Phase p) {
    switch (p) {
        case Phase::teacher_bc:
            return "teacher_bc";
        case Phase::ema:
            return "ema";
        case Phase::kappa:
            return "kappa";
        case Phase::critic:
            return "critic";
        case Phase::actor:
            return "actor";
        case Phase::target:
            return "target";
    }
    return "?";
}

namespace {

// Adds the combined baseline's unlabeled BC term to an actor loss.
void add_extras(LossGrad& lg, const MlpParams& actor, const ActorExtras& extras) {
    if (extras.unlabeled_bc != nullptr && !extras.unlabeled_bc->empty()) {
        const auto extra = bc_loss(actor, extras.unlabeled_bc->states, extras.unlabeled_bc->actions);
        lg.loss += extra.loss;
        lg.grad += extra.grad;
    }
}

}  // namespace

StepMetrics td3bc_step(NetworkBundle& b, const Batch& batch, const DiscrepancyWeights& weights,
                       const AlgoConfig& config, std::int64_t step, Rng& noise_rng, double action_bound,
                       ActorExtras extras) {
    StepMetrics m;
    m.step = step;
    m.mean_kappa = weights.mean();
    const auto w = normalized_weights(weights.kappa);
    if (!w) {
        warn("discrepancy weights sum to zero at step " + std::to_string(step) + "; batch skipped");
        m.skipped = true;
        return m;
    }

    // target: r + gamma (1 - done) min(Q1', Q2')(s', clip(pi'(s') + clipped noise))
    Mat next_action = mlp_predict(b.actor_target, batch.next_states);
    const double noise_std = config.policy_noise * action_bound;
    const double clip = config.noise_clip * action_bound;
    for (Eigen::Index c = 0; c < next_action.cols(); ++c) {
        for (Eigen::Index r = 0; r < next_action.rows(); ++r) {
            const double eps = std::clamp(noise_std * noise_rng.normal(), -clip, clip);
            next_action(r, c) = std::clamp(next_action(r, c) + eps, -action_bound, action_bound);
        }
    }
    const Vec next_q = min_q(b.q1_target, b.q2_target, concat_rows(batch.next_states, next_action));
    const Vec target = batch.rewards + config.discount * batch.not_done.cwiseProduct(next_q);
    require_finite(target, "critic target", step);

    const auto l1 = critic_regression_loss(b.q1, batch.states, batch.actions, target, *w);
    const auto l2 = critic_regression_loss(b.q2, batch.states, batch.actions, target, *w);
    adam_step(b.q1, l1.grad, b.q1_opt);
    adam_step(b.q2, l2.grad, b.q2_opt);
    m.critic_loss = l1.loss + l2.loss;
    require_finite(m.critic_loss, "critic loss", step);
    m.phases.push_back(Phase::critic);

    if ((step + 1) % config.policy_freq == 0) {
        m.lambda = td3bc_lambda(b.actor, b.q1, batch.states, config.td3bc_alpha);
        auto la = td3bc_actor_loss(b.actor, b.q1, batch.states, batch.actions, *w, m.lambda);
        add_extras(la, b.actor, extras);
        require_finite(la.loss, "actor loss", step);
        adam_step(b.actor, la.grad, b.actor_opt);
        m.actor_loss = la.loss;
        m.phases.push_back(Phase::actor);

        ema_blend_into(b.actor_target, b.actor, 1.0 - config.tau);
        ema_blend_into(b.q1_target, b.q1, 1.0 - config.tau);
        ema_blend_into(b.q2_target, b.q2, 1.0 - config.tau);
        m.phases.push_back(Phase::target);
    }
    return m;
}

StepMetrics iql_step(NetworkBundle& b, const Batch& batch, const DiscrepancyWeights& weights,
                     const AlgoConfig& config, std::int64_t step, ActorExtras extras) {
    StepMetrics m;
    m.step = step;
    m.mean_kappa = weights.mean();
    const auto w = normalized_weights(weights.kappa);
    if (!w) {
        warn("discrepancy weights sum to zero at step " + std::to_string(step) + "; batch skipped");
        m.skipped = true;
        return m;
    }

    const Mat sa = concat_rows(batch.states, batch.actions);
    const Vec q_target = min_q(b.q1_target, b.q2_target, sa);
    const Vec next_v = mlp_predict(b.value, batch.next_states).row(0).transpose();
    const Vec v = mlp_predict(b.value, batch.states).row(0).transpose();
    const Vec advantage = q_target - v;

    const auto lv = expectile_value_loss(b.value, batch.states, q_target, config.iql_tau);
    require_finite(lv.loss, "value loss", step);
    adam_step(b.value, lv.grad, b.value_opt);
    m.value_loss = lv.loss;

    const Vec target = batch.rewards + config.discount * batch.not_done.cwiseProduct(next_v);
    require_finite(target, "critic target", step);
    const auto l1 = critic_regression_loss(b.q1, batch.states, batch.actions, target, *w);
    const auto l2 = critic_regression_loss(b.q2, batch.states, batch.actions, target, *w);
    adam_step(b.q1, l1.grad, b.q1_opt);
    adam_step(b.q2, l2.grad, b.q2_opt);
    m.critic_loss = l1.loss + l2.loss;
    require_finite(m.critic_loss, "critic loss", step);
    m.phases.push_back(Phase::critic);

    const Vec awr = awr_weights(advantage, config.iql_beta, config.awr_max_weight);
    auto la = awr_actor_loss(b.actor, batch.states, batch.actions, awr, *w);
    add_extras(la, b.actor, extras);
    require_finite(la.loss, "actor loss", step);
    adam_step(b.actor, la.grad, b.actor_opt);
    m.actor_loss = la.loss;
    m.phases.push_back(Phase::actor);

    ema_blend_into(b.q1_target, b.q1, 1.0 - config.tau);
    ema_blend_into(b.q2_target, b.q2, 1.0 - config.tau);
    b.actor_target = b.actor;
    m.phases.push_back(Phase::target);
    return m;
}

double teacher_bc_step(MlpParams& teacher, AdamState& opt, const PairBatch& batch, std::int64_t step) {
    if (batch.empty()) {
        throw ConfigError("teacher BC step on an empty batch");
    }
    const auto lg = bc_loss(teacher, batch.states, batch.actions);
    require_finite(lg.loss, "teacher loss", step);
    adam_step(teacher, lg.grad, opt);
    return lg.loss;
}

double baseline_bc_step(MlpParams& policy, AdamState& opt, const PairBatch& batch, std::int64_t step) {
    return teacher_bc_step(policy, opt, batch, step);
}

std::vector<double> pretrain_teacher(NetworkBundle& b, const UnlabeledDataset& unlabeled, const AlgoConfig& config,
                                     Rng& rng) {
    std::vector<double> losses;
    if (config.pretrain_epochs == 0) {
        return losses;
    }
    if (unlabeled.empty()) {
        throw DatasetError("teacher pretraining needs a non-empty unlabeled dataset");
    }
    const std::size_t n = unlabeled.size();
    std::int64_t step = 0;
    for (int epoch = 0; epoch < config.pretrain_epochs; ++epoch) {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        for (std::size_t i = n; i > 1; --i) {
            std::swap(order[i - 1], order[static_cast<std::size_t>(rng.below(i))]);
        }
        for (std::size_t start = 0; start < n; start += config.batch_size) {
            const std::size_t end = std::min(n, start + config.batch_size);
            PairBatch pb;
            pb.states.resize(unlabeled.states.rows(), static_cast<Eigen::Index>(end - start));
            pb.actions.resize(unlabeled.actions.rows(), static_cast<Eigen::Index>(end - start));
            for (std::size_t j = start; j < end; ++j) {
                pb.states.col(static_cast<Eigen::Index>(j - start)) = unlabeled.states.col(static_cast<Eigen::Index>(order[j]));
                pb.actions.col(static_cast<Eigen::Index>(j - start)) = unlabeled.actions.col(static_cast<Eigen::Index>(order[j]));
            }
            losses.push_back(teacher_bc_step(b.teacher, b.teacher_opt, pb, step++));
        }
    }
    b.actor = b.teacher;
    b.actor_target = b.teacher;
    return losses;
}

namespace {

StepMetrics base_step(NetworkBundle& b, const Batch& batch, const DiscrepancyWeights& w, const AlgoConfig& config,
                      std::int64_t step, Rng& noise_rng, double action_bound, ActorExtras extras) {
    if (b.base == BaseLearner::td3bc) {
        return td3bc_step(b, batch, w, config, step, noise_rng, action_bound, extras);
    }
    return iql_step(b, batch, w, config, step, extras);
}

}  // namespace

StepMetrics ludor_train_step(NetworkBundle& b, const Batch& labeled, const PairBatch& unlabeled,
                             const AlgoConfig& config, std::int64_t step, Rng& noise_rng, double action_bound) {
    std::vector<Phase> phases;
    double teacher_loss = std::numeric_limits<double>::quiet_NaN();
    if (config.teacher_enabled) {
        if (step % config.teacher_update_freq == 0 && !unlabeled.empty()) {
            teacher_loss = teacher_bc_step(b.teacher, b.teacher_opt, unlabeled, step);
            phases.push_back(Phase::teacher_bc);
        }
        if (config.ema < 1.0) {
            ema_blend_into(b.actor, b.teacher, config.ema);
            phases.push_back(Phase::ema);
        }
    }

    DiscrepancyWeights w;
    if (config.teacher_enabled && config.measure != Measure::uniform) {
        const Mat teacher_actions = mlp_predict(b.teacher, labeled.states);
        w = compute_weights(config.measure, labeled.actions, teacher_actions, config.kl_std * action_bound);
        phases.push_back(Phase::kappa);
    } else {
        w = uniform_weights(labeled.size());
    }

    StepMetrics m = base_step(b, labeled, w, config, step, noise_rng, action_bound, {});
    m.teacher_loss = teacher_loss;
    phases.insert(phases.end(), m.phases.begin(), m.phases.end());
    m.phases = std::move(phases);
    return m;
}

StepMetrics baseline_combined_step(NetworkBundle& b, const Batch& labeled, const PairBatch& unlabeled,
                                   const AlgoConfig& config, std::int64_t step, Rng& noise_rng,
                                   double action_bound) {
    ActorExtras extras;
    extras.unlabeled_bc = &unlabeled;
    return base_step(b, labeled, uniform_weights(labeled.size()), config, step, noise_rng, action_bound, extras);
}

}  // namespace ludor
