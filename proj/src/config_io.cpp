#include <algorithm>
#include <cstdio>
#include <functional>
#include <sstream>

#include "ludor/error.hpp"
#include "ludor/experiment.hpp"

namespace ludor {

namespace {

std::string fmt(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double x = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
    }
}

std::int64_t parse_int(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const long long x = std::stoll(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected an integer, got '" + v + "'");
    }
}

std::size_t parse_size(const std::string& key, const std::string& v) {
    const auto x = parse_int(key, v);
    if (x < 0) throw ConfigError("config key '" + key + "' must be non-negative");
    return static_cast<std::size_t>(x);
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "on" || v == "1") return true;
    if (v == "false" || v == "off" || v == "0") return false;
    throw ConfigError("config key '" + key + "': expected true/false, got '" + v + "'");
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) {
        cur = trim(cur);
        if (!cur.empty()) out.push_back(cur);
    }
    return out;
}

template <class T>
std::string join(const std::vector<T>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(v[i]);
    }
    return out;
}

struct Key {
    std::string name;
    std::function<std::string(const ExperimentSpec&)> get;
    std::function<void(ExperimentSpec&, const std::string&)> set;
    bool hashed = true;
};

CarveSpec& carve_of(ExperimentSpec& s) {
    if (!s.labeled.carve) s.labeled.carve = CarveSpec{};
    return *s.labeled.carve;
}

const std::vector<Key>& keys() {
    static const std::vector<Key> k = [] {
        std::vector<Key> v;
        auto add = [&](std::string name, auto get, auto set, bool hashed = true) {
            v.push_back(Key{std::move(name), get, set, hashed});
        };
        using S = ExperimentSpec;
        using Str = const std::string&;
        add("name", [](const S& s) { return s.name; }, [](S& s, Str x) { s.name = x; }, false);
        add("family", [](const S& s) { return s.family; }, [](S& s, Str x) { s.family = x; }, false);
        add("env", [](const S& s) { return s.env; }, [](S& s, Str x) { s.env = x; });
        add("algo", [](const S& s) { return to_string(s.algo); }, [](S& s, Str x) { s.algo = algo_from_string(x); });
        add("merge_base", [](const S& s) { return to_string(s.merge_base); },
            [](S& s, Str x) { s.merge_base = base_learner_from_string(x); });
        add("seeds", [](const S& s) { return join(s.seeds); },
            [](S& s, Str x) {
                s.seeds.clear();
                for (const auto& t : split(x, ',')) s.seeds.push_back(static_cast<std::uint64_t>(parse_size("seeds", t)));
            });
        add("max_timesteps", [](const S& s) { return std::to_string(s.max_timesteps); },
            [](S& s, Str x) { s.max_timesteps = parse_int("max_timesteps", x); });
        add("eval_freq", [](const S& s) { return std::to_string(s.eval_freq); },
            [](S& s, Str x) { s.eval_freq = parse_int("eval_freq", x); });
        add("n_episodes", [](const S& s) { return std::to_string(s.n_episodes); },
            [](S& s, Str x) { s.n_episodes = static_cast<int>(parse_int("n_episodes", x)); });
        add("eval_seed", [](const S& s) { return std::to_string(s.eval_seed); },
            [](S& s, Str x) { s.eval_seed = parse_size("eval_seed", x); });
        add("metrics_every", [](const S& s) { return std::to_string(s.metrics_every); },
            [](S& s, Str x) { s.metrics_every = parse_int("metrics_every", x); }, false);

        add("labeled.tier", [](const S& s) { return to_string(s.labeled.tier); },
            [](S& s, Str x) { s.labeled.tier = tier_from_string(x); });
        add("labeled.n", [](const S& s) { return std::to_string(s.labeled.n); },
            [](S& s, Str x) { s.labeled.n = parse_size("labeled.n", x); });
        add("labeled.fraction", [](const S& s) { return fmt(s.labeled.fraction); },
            [](S& s, Str x) { s.labeled.fraction = parse_double("labeled.fraction", x); });
        add("carve", [](const S& s) { return std::string(s.labeled.carve ? "on" : "off"); },
            [](S& s, Str x) {
                if (parse_bool("carve", x)) carve_of(s);
                else s.labeled.carve.reset();
            });
        add("carve.dim", [](const S& s) { return s.labeled.carve ? std::to_string(s.labeled.carve->dim) : "0"; },
            [](S& s, Str x) { carve_of(s).dim = parse_size("carve.dim", x); });
        add("carve.ratio", [](const S& s) { return fmt(s.labeled.carve ? s.labeled.carve->removal_ratio : 0.6); },
            [](S& s, Str x) { carve_of(s).removal_ratio = parse_double("carve.ratio", x); });
        add("carve.mode",
            [](const S& s) {
                return std::string(s.labeled.carve && s.labeled.carve->mode == CarveMode::explicit_range ? "range"
                                                                                                           : "densest");
            },
            [](S& s, Str x) {
                if (x == "densest") carve_of(s).mode = CarveMode::densest;
                else if (x == "range") carve_of(s).mode = CarveMode::explicit_range;
                else throw ConfigError("carve.mode must be 'densest' or 'range'");
            });
        add("carve.mass", [](const S& s) { return fmt(s.labeled.carve ? s.labeled.carve->segment_mass : 0.6); },
            [](S& s, Str x) { carve_of(s).segment_mass = parse_double("carve.mass", x); });
        add("carve.bins", [](const S& s) { return std::to_string(s.labeled.carve ? s.labeled.carve->bins : 50); },
            [](S& s, Str x) { carve_of(s).bins = parse_size("carve.bins", x); });
        add("carve.lo", [](const S& s) { return fmt(s.labeled.carve ? s.labeled.carve->lo : 0.0); },
            [](S& s, Str x) { carve_of(s).lo = parse_double("carve.lo", x); });
        add("carve.hi", [](const S& s) { return fmt(s.labeled.carve ? s.labeled.carve->hi : 0.0); },
            [](S& s, Str x) { carve_of(s).hi = parse_double("carve.hi", x); });

        add("unlabeled.tier", [](const S& s) { return to_string(s.unlabeled.tier); },
            [](S& s, Str x) { s.unlabeled.tier = tier_from_string(x); });
        add("unlabeled.n", [](const S& s) { return std::to_string(s.unlabeled.n); },
            [](S& s, Str x) { s.unlabeled.n = parse_size("unlabeled.n", x); });
        add("unlabeled.fraction", [](const S& s) { return fmt(s.unlabeled.fraction); },
            [](S& s, Str x) { s.unlabeled.fraction = parse_double("unlabeled.fraction", x); });
        add("unlabeled.coverage", [](const S& s) { return fmt(s.unlabeled.coverage); },
            [](S& s, Str x) { s.unlabeled.coverage = parse_double("unlabeled.coverage", x); });
        add("unlabeled.coverage_dim", [](const S& s) { return std::to_string(s.unlabeled.coverage_dim); },
            [](S& s, Str x) { s.unlabeled.coverage_dim = parse_size("unlabeled.coverage_dim", x); });

        auto dbl = [&](std::string name, double AlgoConfig::*field) {
            add(name, [field](const S& s) { return fmt(s.config.*field); },
                [field, name](S& s, Str x) { s.config.*field = parse_double(name, x); });
        };
        auto integer = [&](std::string name, int AlgoConfig::*field) {
            add(name, [field](const S& s) { return std::to_string(s.config.*field); },
                [field, name](S& s, Str x) { s.config.*field = static_cast<int>(parse_int(name, x)); });
        };
        dbl("discount", &AlgoConfig::discount);
        dbl("tau", &AlgoConfig::tau);
        dbl("policy_noise", &AlgoConfig::policy_noise);
        dbl("noise_clip", &AlgoConfig::noise_clip);
        integer("policy_freq", &AlgoConfig::policy_freq);
        dbl("td3bc_alpha", &AlgoConfig::td3bc_alpha);
        dbl("iql_beta", &AlgoConfig::iql_beta);
        dbl("iql_tau", &AlgoConfig::iql_tau);
        add("iql_deterministic", [](const S& s) { return std::string(s.config.iql_deterministic ? "true" : "false"); },
            [](S& s, Str x) { s.config.iql_deterministic = parse_bool("iql_deterministic", x); });
        dbl("awr_max_weight", &AlgoConfig::awr_max_weight);
        dbl("ema", &AlgoConfig::ema);
        integer("teacher_update_freq", &AlgoConfig::teacher_update_freq);
        add("batch_size", [](const S& s) { return std::to_string(s.config.batch_size); },
            [](S& s, Str x) { s.config.batch_size = parse_size("batch_size", x); });
        dbl("actor_lr", &AlgoConfig::actor_lr);
        dbl("critic_lr", &AlgoConfig::critic_lr);
        dbl("vf_lr", &AlgoConfig::vf_lr);
        dbl("teacher_lr", &AlgoConfig::teacher_lr);
        integer("pretrain_epochs", &AlgoConfig::pretrain_epochs);
        add("measure", [](const S& s) { return to_string(s.config.measure); },
            [](S& s, Str x) { s.config.measure = measure_from_string(x); });
        dbl("kl_std", &AlgoConfig::kl_std);
        add("teacher", [](const S& s) { return std::string(s.config.teacher_enabled ? "on" : "off"); },
            [](S& s, Str x) { s.config.teacher_enabled = parse_bool("teacher", x); });
        add("hidden", [](const S& s) { return join(s.config.hidden); },
            [](S& s, Str x) {
                s.config.hidden.clear();
                for (const auto& t : split(x, ',')) s.config.hidden.push_back(parse_size("hidden", t));
            });
        dbl("expl_noise", &AlgoConfig::expl_noise);
        add("reward_model_steps", [](const S& s) { return std::to_string(s.config.reward_model_steps); },
            [](S& s, Str x) { s.config.reward_model_steps = parse_size("reward_model_steps", x); });
        dbl("reward_model_lr", &AlgoConfig::reward_model_lr);
        return v;
    }();
    return k;
}

}  // namespace

std::vector<std::string> config_keys() {
    std::vector<std::string> out;
    for (const auto& k : keys()) out.push_back(k.name);
    return out;
}

std::string canonical_config(const ExperimentSpec& spec) {
    std::string out;
    for (const auto& k : keys()) {
        if (!k.hashed) continue;
        // carve.* keys only matter when carving is on
        if (k.name.rfind("carve.", 0) == 0 && !spec.labeled.carve) continue;
        out += k.name + " = " + k.get(spec) + "\n";
    }
    return out;
}

std::string config_hash(const ExperimentSpec& spec) {
    // FNV-1a 64
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : canonical_config(spec)) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::map<std::string, std::string> parse_config_text(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
        }
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
        }
        if (!kv.emplace(key, value).second) {
            throw ConfigError("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
        }
    }
    return kv;
}

ExperimentSpec apply_config(ExperimentSpec spec, const std::map<std::string, std::string>& kv) {
    // "carve" first so that carve = off wins over stray carve.* defaults
    std::vector<std::pair<std::string, std::string>> ordered(kv.begin(), kv.end());
    std::stable_partition(ordered.begin(), ordered.end(), [](const auto& p) { return p.first != "carve"; });
    for (const auto& [key, value] : ordered) {
        const auto it = std::find_if(keys().begin(), keys().end(), [&](const Key& k) { return k.name == key; });
        if (it == keys().end()) {
            throw ConfigError("unknown config key '" + key + "'");
        }
        it->set(spec, value);
    }
    return spec;
}

}  // namespace ludor
