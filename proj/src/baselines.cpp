#include "ludor/baselines.hpp"

#include <cmath>

#include "ludor/adam.hpp"
#include "ludor/error.hpp"
#include "ludor/learners.hpp"
#include "ludor/losses.hpp"

namespace ludor {

namespace {

void check_dims(const LabeledDataset& l, const UnlabeledDataset& u, const EnvSpec& spec) {
    if (u.state_dim() != spec.state_dim || u.action_dim() != spec.action_dim ||
        (!l.empty() && (l.state_dim() != spec.state_dim || l.action_dim() != spec.action_dim))) {
        throw DatasetError("merge: dataset dimensions do not match environment '" + spec.name + "'");
    }
}

// Replays the labeled counterpart of an unlabeled provenance (the ops after
// "strip" are applied to the labeled source).
std::optional<LabeledDataset> labeled_counterpart(const Json& provenance) {
    if (!provenance.is_array() || provenance.empty() || provenance.front().value("op", "") != "generate") {
        return std::nullopt;
    }
    Json labeled_ops = Json::array();
    bool stripped = false;
    for (const auto& op : provenance) {
        if (op.at("op") == "strip") {
            stripped = true;
            continue;
        }
        labeled_ops.push_back(op);
    }
    if (!stripped) {
        return std::nullopt;
    }
    auto any = replay_provenance(labeled_ops);
    if (auto* d = std::get_if<LabeledDataset>(&any)) {
        return std::move(*d);
    }
    return std::nullopt;
}

}  // namespace

Successors reconstruct_successors(const UnlabeledDataset& u, const EnvSpec& spec, Rng& rng) {
    Successors out;
    if (auto src = labeled_counterpart(u.provenance)) {
        if (src->size() == u.size() && src->states == u.states && src->actions == u.actions) {
            out.next_states = src->next_states;
            out.dones = src->dones;
            out.recovered = true;
            return out;
        }
        warn("unlabeled provenance does not reproduce its pairs; rebuilding successors with env_step");
    }
    out.next_states.resize(u.states.rows(), u.states.cols());
    out.dones.resize(u.size());
    for (Eigen::Index i = 0; i < u.states.cols(); ++i) {
        const auto r = env_step(spec, u.states.col(i), u.actions.col(i), 0, rng);
        out.next_states.col(i) = r.next_state;
        out.dones[static_cast<std::size_t>(i)] = r.terminal ? 1 : 0;
    }
    return out;
}

LabeledDataset merge_with_rewards(const LabeledDataset& labeled, const UnlabeledDataset& unlabeled,
                                  const Vec& rewards, const EnvSpec& spec, Rng rng) {
    check_dims(labeled, unlabeled, spec);
    if (rewards.size() != unlabeled.states.cols()) {
        throw InternalError("merge: reward vector length differs from unlabeled size");
    }
    if (unlabeled.empty()) {
        return labeled;
    }
    Rng step_rng = rng.fork(1);
    const Successors succ = reconstruct_successors(unlabeled, spec, step_rng);

    const auto nl = static_cast<Eigen::Index>(labeled.size());
    const auto nu = static_cast<Eigen::Index>(unlabeled.size());
    LabeledDataset all;
    all.env = labeled.env.empty() ? spec.name : labeled.env;
    all.tier = labeled.tier;
    all.states.resize(static_cast<Eigen::Index>(spec.state_dim), nl + nu);
    all.actions.resize(static_cast<Eigen::Index>(spec.action_dim), nl + nu);
    all.next_states.resize(static_cast<Eigen::Index>(spec.state_dim), nl + nu);
    all.rewards.resize(nl + nu);
    all.dones.resize(static_cast<std::size_t>(nl + nu));
    if (nl > 0) {
        all.states.leftCols(nl) = labeled.states;
        all.actions.leftCols(nl) = labeled.actions;
        all.next_states.leftCols(nl) = labeled.next_states;
        all.rewards.head(nl) = labeled.rewards;
        std::copy(labeled.dones.begin(), labeled.dones.end(), all.dones.begin());
    }
    all.states.rightCols(nu) = unlabeled.states;
    all.actions.rightCols(nu) = unlabeled.actions;
    all.next_states.rightCols(nu) = succ.next_states;
    all.rewards.tail(nu) = rewards;
    std::copy(succ.dones.begin(), succ.dones.end(), all.dones.begin() + nl);

    std::vector<std::size_t> perm(static_cast<std::size_t>(nl + nu));
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    Rng shuffle_rng = rng.fork(2);
    for (std::size_t i = perm.size(); i > 1; --i) {
        std::swap(perm[i - 1], perm[static_cast<std::size_t>(shuffle_rng.below(i))]);
    }
    LabeledDataset out = all.select(perm);
    out.provenance = Json::array();
    out.provenance.push_back({{"op", "merge"},
                              {"labeled", labeled.provenance},
                              {"unlabeled", unlabeled.provenance},
                              {"rng", {{"seed", rng.seed()}, {"counter", rng.counter()}}},
                              {"successors", succ.recovered ? "recovered" : "env_step"}});
    return out;
}

LabeledDataset uds_merge(const LabeledDataset& labeled, const UnlabeledDataset& unlabeled, const EnvSpec& spec,
                         Rng rng) {
    auto out = merge_with_rewards(labeled, unlabeled, Vec::Zero(unlabeled.states.cols()), spec, rng);
    if (!unlabeled.empty()) {
        out.provenance.back()["rewards"] = "zero";
    }
    return out;
}

MlpParams train_reward_model(const LabeledDataset& labeled, const AlgoConfig& config, Rng rng,
                             std::vector<double>* losses) {
    if (labeled.empty()) {
        throw DatasetError("reward model needs a non-empty labeled dataset");
    }
    MlpArch arch;
    arch.sizes.push_back(labeled.state_dim() + labeled.action_dim());
    arch.sizes.insert(arch.sizes.end(), config.hidden.begin(), config.hidden.end());
    arch.sizes.push_back(1);
    Rng init = rng.fork(1);
    Rng sampler = rng.fork(2);
    MlpParams net = make_mlp(arch, init);
    AdamState opt = make_adam(net, config.reward_model_lr);
    for (std::size_t step = 0; step < config.reward_model_steps; ++step) {
        const Batch b = sample_batch(labeled, config.batch_size, sampler);
        const auto lg = regression_loss(net, concat_rows(b.states, b.actions), b.rewards);
        if (!std::isfinite(lg.loss)) {
            throw TrainingError("reward model diverged", static_cast<std::int64_t>(step));
        }
        adam_step(net, lg.grad, opt);
        if (losses) losses->push_back(lg.loss);
    }
    return net;
}

LabeledDataset oril_label(const LabeledDataset& labeled, const UnlabeledDataset& unlabeled, const AlgoConfig& config,
                          Rng rng) {
    const auto& spec = env_spec(labeled.env);
    const MlpParams reward_model = train_reward_model(labeled, config, rng.fork(10));
    Vec rewards = Vec::Zero(unlabeled.states.cols());
    if (!unlabeled.empty()) {
        rewards = mlp_predict(reward_model, concat_rows(unlabeled.states, unlabeled.actions)).row(0).transpose();
    }
    auto out = merge_with_rewards(labeled, unlabeled, rewards, spec, rng);
    if (!unlabeled.empty()) {
        out.provenance.back()["rewards"] = "reward_model";
    }
    return out;
}

}  // namespace ludor
