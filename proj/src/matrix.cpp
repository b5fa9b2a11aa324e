#include "ludor/matrix.hpp"

#include <cstdio>

#include "ludor/error.hpp"

namespace ludor {

namespace {

std::string pct(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", x * 100.0);
    return buf;
}

std::string num(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", x);
    return buf;
}

CarveSpec densest_carve(std::size_t dim, double ratio) {
    CarveSpec c;
    c.dim = dim;
    c.removal_ratio = ratio;
    return c;
}

ExperimentSpec with(ExperimentSpec s, AlgoId algo, const std::string& name) {
    s.algo = algo;
    s.name = s.env + "/" + name;
    return s;
}

std::vector<ExperimentSpec> family_for_env(const std::string& family, const ExperimentSpec& base) {
    std::vector<ExperimentSpec> out;
    auto push = [&](ExperimentSpec s) {
        s.family = family;
        out.push_back(std::move(s));
    };
    if (family == "general") {
        ExperimentSpec full = base;
        full.labeled.carve.reset();
        push(with(full, AlgoId::td3bc, "td3bc-full"));
        push(with(full, AlgoId::iql, "iql-full"));
        for (AlgoId a : {AlgoId::td3bc, AlgoId::iql, AlgoId::bc_union, AlgoId::bc_unlabeled, AlgoId::td3bc_ubc,
                         AlgoId::iql_ubc, AlgoId::uds, AlgoId::oril, AlgoId::ludor_td3bc, AlgoId::ludor_iql}) {
            push(with(base, a, to_string(a)));
        }
    } else if (family == "teacher_student") {
        push(with(base, AlgoId::ludor_td3bc, "ludor-td3bc"));
        push(with(base, AlgoId::ludor_iql, "ludor-iql"));
    } else if (family == "robustness") {
        for (double cov : {0.6, 0.8, 1.0}) {
            for (double ratio : {0.4, 0.6, 0.8}) {
                ExperimentSpec s = base;
                s.unlabeled.coverage = cov;
                s.labeled.carve = densest_carve(base.labeled.carve ? base.labeled.carve->dim : 0, ratio);
                if (base.labeled.carve) s.labeled.carve->segment_mass = base.labeled.carve->segment_mass;
                push(with(s, AlgoId::ludor_td3bc, "coverage" + pct(cov) + "-removal" + num(ratio)));
            }
        }
    } else if (family == "ablation_components") {
        struct Row {
            const char* name;
            bool ts, ema, kappa;
        };
        // Rows with the teacher off but EMA or kappa on cannot exist.
        for (const Row r : {Row{"ts0-ema0-kappa0", false, false, false}, Row{"ts1-ema1-kappa0", true, true, false},
                            Row{"ts1-ema0-kappa1", true, false, true}, Row{"ts1-ema1-kappa1", true, true, true}}) {
            ExperimentSpec s = base;
            s.config.teacher_enabled = r.ts;
            if (!r.ema) s.config.ema = 1.0;
            if (!r.kappa) s.config.measure = Measure::uniform;
            push(with(s, AlgoId::ludor_td3bc, r.name));
        }
    } else if (family == "ablation_ema") {
        for (AlgoId a : {AlgoId::ludor_td3bc, AlgoId::ludor_iql}) {
            for (double ema : {0.999, 0.99, 0.9}) {
                ExperimentSpec s = base;
                s.config.ema = ema;
                push(with(s, a, to_string(a) + "-ema" + num(ema)));
            }
        }
    } else if (family == "ablation_data_pct") {
        for (double f : {0.001, 0.005, 0.01, 0.3, 0.5}) {
            ExperimentSpec s = base;
            s.unlabeled.fraction = f;
            push(with(s, AlgoId::ludor_td3bc, "unlabeled" + pct(f) + "pct"));
        }
    } else if (family == "ablation_measure") {
        for (Measure m : {Measure::kl1, Measure::kl2, Measure::js, Measure::cos}) {
            ExperimentSpec s = base;
            s.config.measure = m;
            push(with(s, AlgoId::ludor_td3bc, to_string(m)));
        }
    } else if (family == "ablation_dim_removal") {
        const auto& es = env_spec(base.env);
        for (std::size_t d = 0; d < es.state_dim; ++d) {
            ExperimentSpec s = base;
            s.labeled.carve = densest_carve(d, base.labeled.carve ? base.labeled.carve->removal_ratio : 0.6);
            if (base.labeled.carve) s.labeled.carve->segment_mass = base.labeled.carve->segment_mass;
            push(with(s, AlgoId::td3bc, "dim" + std::to_string(d) + "-td3bc"));
            push(with(s, AlgoId::ludor_td3bc, "dim" + std::to_string(d) + "-ludor-td3bc"));
        }
    } else {
        std::string known;
        for (const auto& f : family_names()) known += (known.empty() ? "" : ", ") + f;
        throw ConfigError("unknown experiment family '" + family + "' (expected one of: " + known + ")");
    }
    return out;
}

}  // namespace

ExperimentSpec default_spec(const std::string& env, Profile profile) {
    ExperimentSpec s;
    s.env = env_spec(env).name;
    s.labeled.carve = densest_carve(0, 1.0);
    s.config.hidden = {64, 64};
    if (profile == Profile::full) {
        s.max_timesteps = 120000;
        s.eval_freq = 2000;
        s.n_episodes = 10;
    } else {
        s.max_timesteps = 30000;
        s.eval_freq = 1000;
        s.n_episodes = 10;
    }
    return s;
}

std::vector<std::string> family_names() {
    return {"general",           "teacher_student", "robustness",       "ablation_components",
            "ablation_ema",      "ablation_data_pct", "ablation_measure", "ablation_dim_removal"};
}

std::vector<ExperimentSpec> experiment_matrix(const std::string& family, const MatrixOptions& options) {
    std::vector<std::string> envs = options.envs.empty() ? env_names() : options.envs;
    std::vector<ExperimentSpec> out;
    for (const auto& env : envs) {
        const ExperimentSpec base = apply_config(default_spec(env, options.profile), options.overrides);
        for (auto& s : family_for_env(family, base)) {
            s.validate();
            out.push_back(std::move(s));
        }
    }
    if (out.empty()) family_for_env(family, default_spec(env_names().front()));  // reports unknown family
    return out;
}

}  // namespace ludor
