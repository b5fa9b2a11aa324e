// ludor: data generation, training, evaluation, ablation families and reports.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error.
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "ludor/checkpoint.hpp"
#include "ludor/dataset.hpp"
#include "ludor/error.hpp"
#include "ludor/experiment.hpp"
#include "ludor/matrix.hpp"
#include "ludor/report.hpp"

namespace fs = std::filesystem;
using namespace ludor;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

fs::path out_root(const std::string& flag) {
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv("LUDOR_RUNS_DIR")) return env;
    return "ludor-out";
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw UsageError("cannot read config file '" + p.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Config file first, then --set pairs, then the dedicated flags.
struct ConfigFlags {
    std::string config;
    std::vector<std::string> sets;
    std::string algo, env, measure;
    double ema = -1.0;
    std::int64_t seed = -1;
    int jobs = 1;

    void add_to(CLI::App* app, bool with_algo) {
        app->add_option("--config", config, "key = value config file");
        app->add_option("--set", sets, "override, as key=value (repeatable)");
        if (with_algo) app->add_option("--algo", algo, "algorithm id (default ludor-td3bc)");
        app->add_option("--env", env, "pointmass-2d | pendulum-swingup");
        app->add_option("--ema", ema, "EMA weight alpha (default 0.9)");
        app->add_option("--measure", measure, "cos | kl1 | kl2 | js | uniform (default cos)");
        app->add_option("--seed", seed, "run a single seed instead of the configured list");
        app->add_option("--jobs", jobs, "worker threads (default 1)")->check(CLI::PositiveNumber);
    }

    std::map<std::string, std::string> overrides() const {
        std::map<std::string, std::string> kv;
        if (!config.empty()) kv = parse_config_text(slurp(config));
        for (const auto& s : sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + s + "'");
            auto trim = [](std::string x) {
                x.erase(0, x.find_first_not_of(" \t"));
                x.erase(x.find_last_not_of(" \t") + 1);
                return x;
            };
            kv[trim(s.substr(0, eq))] = trim(s.substr(eq + 1));
        }
        if (!algo.empty()) kv["algo"] = algo;
        if (!env.empty()) kv["env"] = env;
        if (!measure.empty()) kv["measure"] = measure;
        if (ema >= 0.0) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.17g", ema);
            kv["ema"] = buf;
        }
        if (seed >= 0) kv["seeds"] = std::to_string(seed);
        return kv;
    }
};

Profile profile_from(const std::string& p) {
    if (p == "desk") return Profile::desk;
    if (p == "full") return Profile::full;
    throw UsageError("--profile must be 'desk' or 'full'");
}

void print_report(const EvalReport& r, const fs::path& root) {
    std::printf("%-40s %-14s %-14s final %8.2f +- %6.2f", r.name.empty() ? r.hash.c_str() : r.name.c_str(),
                r.env.c_str(), r.algo.c_str(), r.final_mean, r.final_std);
    if (r.teacher_final_mean != 0.0) std::printf("  teacher %8.2f", r.teacher_final_mean);
    if (r.partial) std::printf("  PARTIAL");
    std::printf("\n");
    if (!root.empty()) std::printf("  run dir: %s\n", (root / "runs" / r.hash).string().c_str());
}

int failed_seeds(const EvalReport& r) {
    int n = 0;
    for (const auto& s : r.seeds) {
        if (!s.ok) {
            std::fprintf(stderr, "error: %s seed %llu: %s\n", r.hash.c_str(), static_cast<unsigned long long>(s.seed),
                         s.error.c_str());
            ++n;
        }
    }
    return n;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ludor: offline RL with a behavior-cloned teacher on unlabeled data"};
    app.require_subcommand(1);
    std::string out_flag;
    app.add_option("--out", out_flag, "output root (default $LUDOR_RUNS_DIR, else ./ludor-out)");

    // data
    auto* data = app.add_subcommand("data", "dataset generation and editing");
    data->require_subcommand(1);
    std::string in_path, out_path, env_name = "pointmass-2d", tier_name = "medium", mode = "densest";
    std::size_t n = 10000, dim = 0, bins = 50;
    std::uint64_t seed = 0;
    double ratio = 0.6, mass = 0.6, lo = 0.0, hi = 0.0, keep = 1.0, fraction = 0.01;

    auto* gen = data->add_subcommand("gen", "roll out a scripted policy");
    gen->add_option("--env", env_name, "environment")->capture_default_str();
    gen->add_option("--tier", tier_name, "random | medium | expert")->capture_default_str();
    gen->add_option("--n", n, "number of transitions")->capture_default_str();
    gen->add_option("--seed", seed, "rng seed")->capture_default_str();
    gen->add_option("--output,-o", out_path, "output .ods file")->required();

    auto* carve = data->add_subcommand("carve", "delete part of a state region");
    carve->add_option("--input,-i", in_path, "labeled .ods file")->required();
    carve->add_option("--output,-o", out_path, "output .ods file")->required();
    carve->add_option("--dim", dim, "state dimension")->capture_default_str();
    carve->add_option("--ratio", ratio, "fraction of the selected region to delete")->capture_default_str();
    carve->add_option("--mode", mode, "densest | range")->capture_default_str();
    carve->add_option("--mass", mass, "densest mode: probability mass of the selected segment")->capture_default_str();
    carve->add_option("--bins", bins, "densest mode: histogram bins")->capture_default_str();
    carve->add_option("--lo", lo, "range mode: lower bound");
    carve->add_option("--hi", hi, "range mode: upper bound");
    carve->add_option("--seed", seed, "rng seed")->capture_default_str();

    auto* filter = data->add_subcommand("filter", "keep the central quantile band of one state dimension");
    filter->add_option("--input,-i", in_path, "input .ods file")->required();
    filter->add_option("--output,-o", out_path, "output .ods file")->required();
    filter->add_option("--dim", dim, "state dimension")->capture_default_str();
    filter->add_option("--keep", keep, "fraction of the band to keep")->capture_default_str();

    auto* sub = data->add_subcommand("subsample", "uniform subsample without replacement");
    sub->add_option("--input,-i", in_path, "input .ods file")->required();
    sub->add_option("--output,-o", out_path, "output .ods file")->required();
    sub->add_option("--fraction", fraction, "fraction to keep")->capture_default_str();
    sub->add_option("--seed", seed, "rng seed")->capture_default_str();

    auto* strip = data->add_subcommand("strip", "drop rewards, successors and done flags");
    strip->add_option("--input,-i", in_path, "labeled .ods file")->required();
    strip->add_option("--output,-o", out_path, "output .ods file")->required();

    std::string stats_dir;
    auto* stats = data->add_subcommand("stats", "per-dimension state histograms as CSV");
    stats->add_option("--input,-i", in_path, "input .ods file")->required();
    stats->add_option("--output-dir,-o", stats_dir, "directory for state_dim<k>.csv files")->required();
    stats->add_option("--bins", bins, "histogram bins")->capture_default_str();

    // train
    ConfigFlags train_flags;
    std::string train_profile = "desk";
    auto* train = app.add_subcommand("train", "train and evaluate one configuration");
    train_flags.add_to(train, true);
    train->add_option("--profile", train_profile, "desk | full base settings")->capture_default_str();

    // eval
    std::string eval_run, eval_ckpt, eval_policy;
    int episodes = 10;
    std::uint64_t eval_seed = 1000;
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint or a scripted policy");
    eval->add_option("--run", eval_run, "run directory: evaluate every seed checkpoint");
    eval->add_option("--checkpoint", eval_ckpt, "single checkpoint file");
    eval->add_option("--policy", eval_policy, "scripted policy: random | medium | expert");
    eval->add_option("--env", env_name, "environment")->capture_default_str();
    eval->add_option("--episodes", episodes, "episodes")->capture_default_str()->check(CLI::PositiveNumber);
    eval->add_option("--seed", eval_seed, "evaluation seed")->capture_default_str();

    // ablate
    ConfigFlags ablate_flags;
    std::string family, ablate_profile = "desk";
    std::vector<std::string> ablate_envs;
    bool no_resume = false;
    auto* ablate = app.add_subcommand("ablate", "run an experiment family and write its summary CSV");
    ablate->add_option("family", family, "family name; 'ema' is short for 'ablation_ema'")->required();
    ablate_flags.add_to(ablate, false);
    ablate->add_option("--envs", ablate_envs, "restrict to these environments");
    ablate->add_option("--profile", ablate_profile, "desk | full base settings")->capture_default_str();
    ablate->add_flag("--no-resume", no_resume, "recompute runs that already have a report");

    // report
    auto* report = app.add_subcommand("report", "render CSV summaries and plots for all finished runs");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitUsage;
    }

    try {
        const fs::path root = out_root(out_flag);
        if (data->parsed()) {
            if (gen->parsed()) {
                const auto& es = env_spec(env_name);
                const auto d = generate_dataset(es, tier_from_string(tier_name), n, Rng(seed));
                write_ods(out_path, d);
                std::printf("wrote %zu transitions to %s\n", d.size(), out_path.c_str());
            } else if (carve->parsed()) {
                CarveSpec c;
                c.dim = dim;
                c.removal_ratio = ratio;
                c.bins = bins;
                c.segment_mass = mass;
                c.lo = lo;
                c.hi = hi;
                if (mode == "densest") c.mode = CarveMode::densest;
                else if (mode == "range") c.mode = CarveMode::explicit_range;
                else throw UsageError("--mode must be 'densest' or 'range'");
                const auto in = read_labeled(in_path);
                const auto out = carve_ood(in, c, Rng(seed));
                write_ods(out_path, out);
                std::printf("kept %zu of %zu transitions\n", out.size(), in.size());
            } else if (filter->parsed()) {
                auto any = read_ods(in_path);
                std::visit([&](auto& d) { write_ods(out_path, coverage_filter(d, dim, keep)); }, any);
                std::printf("wrote %s\n", out_path.c_str());
            } else if (sub->parsed()) {
                auto any = read_ods(in_path);
                std::visit([&](auto& d) { write_ods(out_path, subsample(d, fraction, Rng(seed))); }, any);
                std::printf("wrote %s\n", out_path.c_str());
            } else if (strip->parsed()) {
                write_ods(out_path, strip_labels(read_labeled(in_path)));
                std::printf("wrote %s\n", out_path.c_str());
            } else if (stats->parsed()) {
                const auto any = read_ods(in_path);
                const Mat& states = std::visit([](const auto& d) -> const Mat& { return d.states; }, any);
                fs::create_directories(stats_dir);
                const auto csvs = state_histograms_csv(states, bins);
                for (std::size_t k = 0; k < csvs.size(); ++k) {
                    const auto p = fs::path(stats_dir) / ("state_dim" + std::to_string(k) + ".csv");
                    std::ofstream(p, std::ios::binary) << csvs[k];
                    std::printf("wrote %s\n", p.string().c_str());
                }
            }
            return 0;
        }

        if (train->parsed()) {
            auto kv = train_flags.overrides();
            std::string env = kv.count("env") ? kv["env"] : "pointmass-2d";
            ExperimentSpec spec = apply_config(default_spec(env, profile_from(train_profile)), kv);
            RunOptions opts;
            opts.out_root = root;
            opts.seed_jobs = train_flags.jobs;
            const EvalReport r = run_experiment(spec, opts);
            print_report(r, root);
            return failed_seeds(r) ? kExitRuntime : 0;
        }

        if (eval->parsed()) {
            auto show = [](const std::string& what, const PolicyEval& ev) {
                std::printf("%-40s return %10.3f  normalized %8.2f\n", what.c_str(), ev.mean_return, ev.normalized);
            };
            const Rng rng(eval_seed);
            if (!eval_policy.empty()) {
                const auto& es = env_spec(env_name);
                const Tier tier = tier_from_string(eval_policy);
                Rng pol = rng.fork(0xE7A1);
                show(eval_policy, evaluate_policy([&](const Vec& s) { return scripted_policy(tier, es, s, pol); }, es,
                                                  episodes, rng));
                return 0;
            }
            std::vector<fs::path> ckpts;
            std::string env = env_name;
            if (!eval_ckpt.empty()) ckpts.push_back(eval_ckpt);
            if (!eval_run.empty()) {
                const auto kv = parse_config_text(slurp(fs::path(eval_run) / "config.txt"));
                if (kv.count("env")) env = kv.at("env");
                for (const auto& e : fs::directory_iterator(fs::path(eval_run) / "checkpoint")) ckpts.push_back(e.path());
                std::sort(ckpts.begin(), ckpts.end());
            }
            if (ckpts.empty()) throw UsageError("eval needs --run, --checkpoint or --policy");
            const auto& es = env_spec(env);
            for (const auto& p : ckpts) {
                const auto ck = read_checkpoint(p);
                show(p.filename().string() + " actor", evaluate_policy(ck.get("actor"), es, episodes, rng));
            }
            return 0;
        }

        if (ablate->parsed()) {
            std::string fam = family;
            if (fam != "general" && fam != "teacher_student" && fam != "robustness" && fam.rfind("ablation_", 0) != 0) {
                fam = "ablation_" + fam;
            }
            const auto names = family_names();
            if (std::find(names.begin(), names.end(), fam) == names.end()) {
                throw UsageError("unknown family '" + family + "'");
            }
            MatrixOptions mo;
            mo.envs = ablate_envs;
            if (!ablate_flags.env.empty()) mo.envs.push_back(ablate_flags.env);
            mo.profile = profile_from(ablate_profile);
            mo.overrides = ablate_flags.overrides();
            mo.overrides.erase("env");
            const auto specs = experiment_matrix(fam, mo);
            RunOptions opts;
            opts.out_root = root;
            opts.resume = !no_resume;
            const auto reports = run_matrix(specs, opts, ablate_flags.jobs);
            int failures = 0;
            for (const auto& r : reports) {
                print_report(r, {});
                failures += failed_seeds(r);
            }
            fs::create_directories(root / "reports");
            const auto path = root / "reports" / (fam + ".csv");
            std::ofstream(path, std::ios::binary) << family_csv(reports);
            std::printf("wrote %s\n", path.string().c_str());
            return failures ? kExitRuntime : 0;
        }

        if (report->parsed()) {
            const auto reports = load_reports(root);
            if (reports.empty()) throw Error("no finished runs under " + (root / "runs").string());
            for (const auto& p : render_report(reports, root)) std::printf("wrote %s\n", p.string().c_str());
            return 0;
        }
    } catch (const UsageError& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return kExitUsage;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitUsage;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitRuntime;
    }
    return 0;
}
