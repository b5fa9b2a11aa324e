#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace ludor {

enum class BaseLearner { td3bc, iql };
enum class Measure { cos, kl1, kl2, js, uniform };

std::string to_string(BaseLearner b);
BaseLearner base_learner_from_string(const std::string& name);
std::string to_string(Measure m);
Measure measure_from_string(const std::string& name);

/// Learner hyperparameters. Defaults follow the reference hyperparameter
/// table of the method (discount, target rate, TD3BC/IQL coefficients, EMA
/// weight, teacher update frequency, batch size, learning rates).
struct AlgoConfig {
    double discount = 0.99;
    double tau = 0.005;
    double policy_noise = 0.2;  // scaled by the action bound
    double noise_clip = 0.5;    // scaled by the action bound
    int policy_freq = 2;
    double td3bc_alpha = 2.5;
    double iql_beta = 3.0;
    double iql_tau = 0.7;
    bool iql_deterministic = true;
    double awr_max_weight = 100.0;
    double ema = 0.9;
    int teacher_update_freq = 2;
    std::size_t batch_size = 256;
    double actor_lr = 3e-4;
    double critic_lr = 3e-4;
    double vf_lr = 3e-4;
    double teacher_lr = 3e-4;
    int pretrain_epochs = 1;
    Measure measure = Measure::cos;
    double kl_std = 0.5;  // fixed std of the kl2 measure, in units of the action bound
    bool teacher_enabled = true;
    std::vector<std::size_t> hidden = {256, 256};
    // Exploration noise of online TD3; kept so configs round-trip, never read by
    // the offline learners.
    double expl_noise = 0.1;
    // reward model used by the ORIL baseline
    std::size_t reward_model_steps = 2000;
    double reward_model_lr = 1e-3;

    /// Throws ConfigError for out-of-range values.
    void validate() const;
};

}  // namespace ludor
