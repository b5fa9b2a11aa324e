#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "ludor/adam.hpp"
#include "ludor/algo_config.hpp"
#include "ludor/dataset.hpp"
#include "ludor/kappa.hpp"
#include "ludor/losses.hpp"

namespace ludor {

/// Every network a run trains. The student is `actor`; the teacher shares its
/// architecture so parameters can be blended.
struct NetworkBundle {
    BaseLearner base = BaseLearner::td3bc;
    MlpParams actor;
    MlpParams actor_target;  // TD3BC only, kept in sync otherwise
    MlpParams teacher;
    MlpParams q1, q2, q1_target, q2_target;
    MlpParams value;  // IQL only
    AdamState actor_opt, teacher_opt, q1_opt, q2_opt, value_opt;
};

/// Initializes all networks from independent forks of `rng`, so the draw
/// sequence does not depend on which networks a given algorithm uses.
NetworkBundle make_bundle(const EnvSpec& spec, const AlgoConfig& config, BaseLearner base, const Rng& rng);
MlpArch actor_arch(const EnvSpec& spec, const AlgoConfig& config);
MlpArch critic_arch(const EnvSpec& spec, const AlgoConfig& config);
MlpArch value_arch(const EnvSpec& spec, const AlgoConfig& config);

struct Batch {
    Mat states;
    Mat actions;
    Vec rewards;
    Mat next_states;
    Vec not_done;  // 1 - done
    std::size_t size() const { return static_cast<std::size_t>(states.cols()); }
};

struct PairBatch {
    Mat states;
    Mat actions;
    std::size_t size() const { return static_cast<std::size_t>(states.cols()); }
    bool empty() const { return states.cols() == 0; }
};

/// Uniform sampling with replacement.
Batch sample_batch(const LabeledDataset& data, std::size_t n, Rng& rng);
PairBatch sample_pairs(const UnlabeledDataset& data, std::size_t n, Rng& rng);
Batch make_batch(const LabeledDataset& data, const std::vector<std::size_t>& idx);

enum class Phase { teacher_bc, ema, kappa, critic, actor, target };
std::string to_string(Phase p);

struct StepMetrics {
    std::int64_t step = 0;
    double critic_loss = std::numeric_limits<double>::quiet_NaN();
    double actor_loss = std::numeric_limits<double>::quiet_NaN();
    double value_loss = std::numeric_limits<double>::quiet_NaN();
    double teacher_loss = std::numeric_limits<double>::quiet_NaN();
    double mean_kappa = std::numeric_limits<double>::quiet_NaN();
    double lambda = std::numeric_limits<double>::quiet_NaN();
    bool skipped = false;  // discrepancy weights summed to zero
    std::vector<Phase> phases;
};

/// Extra actor-loss term of the combined baseline: BC of the actor on an
/// unlabeled batch, added to the base learner's actor loss.
struct ActorExtras {
    const PairBatch* unlabeled_bc = nullptr;
};

/// One TD3BC update with per-sample weights. `step` is the zero-based update
/// index; the actor and targets update when (step + 1) % policy_freq == 0.
StepMetrics td3bc_step(NetworkBundle& bundle, const Batch& batch, const DiscrepancyWeights& weights,
                       const AlgoConfig& config, std::int64_t step, Rng& noise_rng, double action_bound,
                       ActorExtras extras = {});

/// One IQL update (value expectile, weighted critics, weighted AWR actor, targets).
StepMetrics iql_step(NetworkBundle& bundle, const Batch& batch, const DiscrepancyWeights& weights,
                     const AlgoConfig& config, std::int64_t step, ActorExtras extras = {});

/// One BC Adam step of the teacher on (s_d, a_d); returns the pre-update loss.
double teacher_bc_step(MlpParams& teacher, AdamState& opt, const PairBatch& batch, std::int64_t step);

/// One epoch of teacher BC over the unlabeled data in shuffled minibatches,
/// then copies the teacher into the student (and actor target).
/// Returns per-minibatch losses; zero epochs leaves the bundle untouched.
std::vector<double> pretrain_teacher(NetworkBundle& bundle, const UnlabeledDataset& unlabeled,
                                     const AlgoConfig& config, Rng& rng);

/// One training iteration of the teacher-student method, in order: teacher BC
/// (every teacher_update_freq steps), EMA of the teacher into the student,
/// discrepancy weights from the post-update teacher, critic update, actor
/// update, target update.
StepMetrics ludor_train_step(NetworkBundle& bundle, const Batch& labeled, const PairBatch& unlabeled,
                             const AlgoConfig& config, std::int64_t step, Rng& noise_rng, double action_bound);

/// Plain BC of a policy on (s, a) pairs.
double baseline_bc_step(MlpParams& policy, AdamState& opt, const PairBatch& batch, std::int64_t step);

/// Base learner whose actor loss carries an extra BC term on the unlabeled
/// batch; an empty unlabeled batch reduces to the base learner.
StepMetrics baseline_combined_step(NetworkBundle& bundle, const Batch& labeled, const PairBatch& unlabeled,
                                   const AlgoConfig& config, std::int64_t step, Rng& noise_rng,
                                   double action_bound);

}  // namespace ludor
