#pragma once

#include "ludor/algo_config.hpp"
#include "ludor/dataset.hpp"

namespace ludor {

/// Successor states and done flags for unlabeled pairs. When the unlabeled
/// set descends from a labeled one through strip_labels, the recorded
/// successors are recovered by replaying its provenance; otherwise each is
/// rebuilt with one env_step. `recovered` reports which path was taken.
struct Successors {
    Mat next_states;
    std::vector<std::uint8_t> dones;
    bool recovered = false;
};
Successors reconstruct_successors(const UnlabeledDataset& unlabeled, const EnvSpec& spec, Rng& rng);

/// Appends the unlabeled pairs as transitions with the given rewards and
/// shuffles the union.
LabeledDataset merge_with_rewards(const LabeledDataset& labeled, const UnlabeledDataset& unlabeled,
                                  const Vec& rewards, const EnvSpec& spec, Rng rng);

/// Zero-reward merge of unlabeled pairs into the labeled data.
LabeledDataset uds_merge(const LabeledDataset& labeled, const UnlabeledDataset& unlabeled, const EnvSpec& spec,
                         Rng rng);

/// Reward model r(s, a) fitted by squared-error regression on the labeled
/// transitions (config.reward_model_steps Adam steps of config.batch_size).
MlpParams train_reward_model(const LabeledDataset& labeled, const AlgoConfig& config, Rng rng,
                             std::vector<double>* losses = nullptr);

/// Labels the unlabeled pairs with a trained reward model and merges them.
LabeledDataset oril_label(const LabeledDataset& labeled, const UnlabeledDataset& unlabeled, const AlgoConfig& config,
                          Rng rng);

}  // namespace ludor
