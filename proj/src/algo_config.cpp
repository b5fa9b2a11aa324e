#include "ludor/algo_config.hpp"

#include "ludor/error.hpp"

namespace ludor {

std::string to_string(BaseLearner b) { return b == BaseLearner::td3bc ? "td3bc" : "iql"; }

BaseLearner base_learner_from_string(const std::string& name) {
    if (name == "td3bc") return BaseLearner::td3bc;
    if (name == "iql") return BaseLearner::iql;
    throw ConfigError("unknown base learner '" + name + "'");
}

std::string to_string(Measure m) {
    switch (m) {
        case Measure::cos:
            return "cos";
        case Measure::kl1:
            return "kl1";
        case Measure::kl2:
            return "kl2";
        case Measure::js:
            return "js";
        case Measure::uniform:
            return "uniform";
    }
    return "uniform";
}

Measure measure_from_string(const std::string& name) {
    if (name == "cos") return Measure::cos;
    if (name == "kl1") return Measure::kl1;
    if (name == "kl2") return Measure::kl2;
    if (name == "js") return Measure::js;
    if (name == "uniform") return Measure::uniform;
    throw ConfigError("unknown discrepancy measure '" + name + "'");
}

void AlgoConfig::validate() const {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw ConfigError(what);
    };
    require(discount >= 0.0 && discount < 1.0, "discount must lie in [0, 1)");
    require(tau > 0.0 && tau <= 1.0, "tau must lie in (0, 1]");
    require(policy_noise >= 0.0 && noise_clip >= 0.0, "policy noise and clip must be non-negative");
    require(policy_freq >= 1, "policy_freq must be >= 1");
    require(td3bc_alpha > 0.0, "td3bc alpha must be positive");
    require(iql_beta >= 0.0, "iql beta must be non-negative");
    require(iql_tau > 0.0 && iql_tau < 1.0, "iql_tau must lie in (0, 1)");
    require(iql_deterministic, "only the deterministic IQL actor is implemented");
    require(awr_max_weight > 0.0, "awr weight clip must be positive");
    require(ema >= 0.0 && ema <= 1.0, "ema must lie in [0, 1]");
    require(teacher_update_freq >= 1, "teacher_update_freq must be >= 1");
    require(batch_size >= 1, "batch_size must be >= 1");
    require(actor_lr > 0.0 && critic_lr > 0.0 && vf_lr > 0.0 && teacher_lr > 0.0, "learning rates must be positive");
    require(pretrain_epochs >= 0, "pretrain_epochs must be >= 0");
    require(kl_std > 0.0, "kl_std must be positive");
    require(!hidden.empty(), "at least one hidden layer is required");
    for (auto h : hidden) require(h > 0, "hidden layer sizes must be positive");
    require(reward_model_lr > 0.0, "reward model learning rate must be positive");
}

}  // namespace ludor
