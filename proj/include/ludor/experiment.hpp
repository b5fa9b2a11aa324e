#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ludor/algo_config.hpp"
#include "ludor/dataset.hpp"
#include "ludor/learners.hpp"

namespace ludor {

enum class AlgoId { ludor_td3bc, ludor_iql, td3bc, iql, bc_union, bc_unlabeled, td3bc_ubc, iql_ubc, uds, oril };

std::string to_string(AlgoId a);
AlgoId algo_from_string(const std::string& name);
std::vector<AlgoId> all_algos();
bool uses_teacher(AlgoId a);
bool is_bc(AlgoId a);

/// How the offline RL data is built: `n` transitions of the tier's scripted
/// policy, a uniform `fraction` of them, then an optional carve.
struct LabeledRecipe {
    Tier tier = Tier::medium;
    std::size_t n = 100000;
    double fraction = 0.02;
    std::optional<CarveSpec> carve;
};

/// How the teacher's (state, action) data is built: generate, subsample,
/// strip labels, then an optional central-band coverage filter.
struct UnlabeledRecipe {
    Tier tier = Tier::expert;
    std::size_t n = 100000;
    double fraction = 0.01;
    double coverage = 1.0;
    std::size_t coverage_dim = 0;
};

struct ExperimentSpec {
    std::string name;    // label only, not part of the hash
    std::string family;  // label only
    std::string env = "pointmass-2d";
    LabeledRecipe labeled;
    UnlabeledRecipe unlabeled;
    AlgoId algo = AlgoId::ludor_td3bc;
    BaseLearner merge_base = BaseLearner::td3bc;  // learner behind uds / oril
    AlgoConfig config;
    std::vector<std::uint64_t> seeds = {0, 1, 2};
    std::int64_t max_timesteps = 30000;
    std::int64_t eval_freq = 2000;
    int n_episodes = 10;
    std::uint64_t eval_seed = 1000;
    std::int64_t metrics_every = 100;

    void validate() const;
};

/// Canonical "key = value" text of every field that affects results, one key
/// per line in a fixed order. This is both the run's config file and the
/// input of its hash.
std::string canonical_config(const ExperimentSpec& spec);
std::string config_hash(const ExperimentSpec& spec);

/// Parses key = value lines ('#' starts a comment). Duplicate keys are an error.
std::map<std::string, std::string> parse_config_text(const std::string& text);
/// Applies key/value pairs on top of `base`; unknown keys throw ConfigError.
ExperimentSpec apply_config(ExperimentSpec base, const std::map<std::string, std::string>& kv);
std::vector<std::string> config_keys();

struct Datasets {
    LabeledDataset labeled;
    UnlabeledDataset unlabeled;
};

/// Deterministic in (spec recipes, env, seed); independent of the algorithm.
Datasets build_datasets(const ExperimentSpec& spec, std::uint64_t seed);

struct PolicyEval {
    std::vector<double> returns;
    double mean_return = 0.0;
    double normalized = 0.0;
};

PolicyEval evaluate_policy(const Policy& policy, const EnvSpec& env, int n_episodes, Rng rng);
PolicyEval evaluate_policy(const MlpParams& actor, const EnvSpec& env, int n_episodes, Rng rng);

struct SeedResult {
    std::uint64_t seed = 0;
    bool ok = true;
    std::string error;
    double initial_score = 0.0;
    std::vector<std::int64_t> eval_steps;
    std::vector<double> scores;          // normalized, one per evaluation
    std::vector<double> teacher_scores;  // teacher-student runs only
    double final_score = 0.0;            // mean over the last 10 evaluations
    double final_teacher_score = 0.0;
    std::size_t labeled_size = 0;
    std::size_t unlabeled_size = 0;
};

struct EvalReport {
    std::string name;
    std::string family;
    std::string hash;
    std::string env;
    std::string algo;
    std::vector<SeedResult> seeds;
    double final_mean = 0.0;
    double final_std = 0.0;
    double teacher_final_mean = 0.0;
    bool partial = false;
    double runtime_seconds = 0.0;
};

inline constexpr std::size_t kFinalEvaluations = 10;

/// Mean of the last min(10, n) evaluations, or the initial score when none ran.
double final_score(const SeedResult& r);
/// Mean and population std over the pooled final evaluations of all
/// successful seeds.
void summarize(EvalReport& report);

Json report_to_json(const EvalReport& r, bool include_runtime = true);
EvalReport report_from_json(const Json& j);
/// Hash of the report contents, runtime excluded.
std::string report_digest(const EvalReport& r);

struct RunOptions {
    std::filesystem::path out_root;  // empty: write nothing
    bool resume = true;              // reuse an existing report.json with the same hash
    int seed_jobs = 1;               // threads across the seeds of one experiment
};

/// Trains and evaluates every seed of `spec`.
EvalReport run_experiment(const ExperimentSpec& spec, const RunOptions& options = {});

/// Runs `specs` on up to `jobs` worker threads; results keep input order.
std::vector<EvalReport> run_matrix(const std::vector<ExperimentSpec>& specs, const RunOptions& options, int jobs);

struct MetricsRow {
    StepMetrics metrics;
    double eval_score = std::numeric_limits<double>::quiet_NaN();
};

/// Called after every training step with the zero-based step index.
using StepObserver = std::function<void(std::int64_t step, const NetworkBundle& bundle)>;

/// Result of training one seed, exposed for tests that compare trajectories.
struct TrainedSeed {
    SeedResult result;
    NetworkBundle bundle;
    std::vector<MetricsRow> metrics;  // every metrics_every-th step plus evaluation steps
};
TrainedSeed train_seed(const ExperimentSpec& spec, std::uint64_t seed, const StepObserver& observer = {});

}  // namespace ludor
