#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ludor/mlp.hpp"
#include "ludor/rng.hpp"

namespace ludor {

enum class EnvKind { pointmass2d, pendulum_swingup };

struct EnvSpec {
    std::string name;
    EnvKind kind = EnvKind::pointmass2d;
    std::size_t state_dim = 0;
    std::size_t action_dim = 0;
    double action_bound = 1.0;  // actions live in [-bound, bound]^action_dim
    int max_steps = 0;
    std::string reward_description;
    std::string termination_description;
};

/// "pointmass-2d" or "pendulum-swingup"; throws ConfigError otherwise.
const EnvSpec& env_spec(const std::string& name);
std::vector<std::string> env_names();

Vec env_reset(const EnvSpec& spec, Rng& rng);

struct StepResult {
    Vec next_state;
    double reward = 0.0;
    bool terminal = false;   // termination predicate fired
    bool truncated = false;  // step cap reached
    bool done() const { return terminal || truncated; }
};

/// `step_index` is the zero-based index of this step within the episode; the
/// step cap fires when step_index + 1 == max_steps.
StepResult env_step(const EnvSpec& spec, const Vec& state, const Vec& action, int step_index, Rng& rng);

Vec clip_action(const EnvSpec& spec, const Vec& action);

enum class Tier { random, medium, expert };
std::string to_string(Tier t);
Tier tier_from_string(const std::string& name);

/// Gaussian noise std (before clipping) added to the expert action by the
/// medium tier.
double medium_noise_std(const EnvSpec& spec);

Vec expert_action(const EnvSpec& spec, const Vec& state);
Vec scripted_policy(Tier tier, const EnvSpec& spec, const Vec& state, Rng& rng);

using Policy = std::function<Vec(const Vec& state)>;

struct Episode {
    double total_return = 0.0;
    int length = 0;
};

/// Rolls out one episode from a reset drawn with `rng`.
Episode rollout(const EnvSpec& spec, const Policy& policy, Rng& rng);

struct ScoreReference {
    std::string env;
    double random_return = 0.0;
    double expert_return = 0.0;
};

/// 100 * (raw - random) / (expert - random).
double normalized_score(double raw_return, const ScoreReference& ref);

/// Mean returns of the scripted random and expert tiers over `episodes`
/// seeded episodes; used to regenerate the shipped reference file.
ScoreReference compute_score_reference(const EnvSpec& spec, int episodes, std::uint64_t seed);

/// Reference values shipped with the library (mirrors refs/score_references.txt).
const ScoreReference& score_reference(const std::string& env);

inline constexpr int kReferenceEpisodes = 2000;
inline constexpr std::uint64_t kReferenceSeed = 20240601;

}  // namespace ludor
