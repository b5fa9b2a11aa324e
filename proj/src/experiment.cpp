#include "ludor/experiment.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <thread>

#include "ludor/baselines.hpp"
#include "ludor/checkpoint.hpp"
#include "ludor/error.hpp"
#include "ludor/report.hpp"

namespace ludor {

namespace {

struct AlgoName {
    AlgoId id;
    const char* name;
};

constexpr AlgoName kAlgoNames[] = {
    {AlgoId::ludor_td3bc, "ludor-td3bc"}, {AlgoId::ludor_iql, "ludor-iql"},
    {AlgoId::td3bc, "td3bc"},             {AlgoId::iql, "iql"},
    {AlgoId::bc_union, "bc-union"},       {AlgoId::bc_unlabeled, "bc-unlabeled"},
    {AlgoId::td3bc_ubc, "td3bc+ubc"},     {AlgoId::iql_ubc, "iql+ubc"},
    {AlgoId::uds, "uds"},                 {AlgoId::oril, "oril"},
};

BaseLearner base_of(const ExperimentSpec& spec) {
    switch (spec.algo) {
        case AlgoId::ludor_iql:
        case AlgoId::iql:
        case AlgoId::iql_ubc:
            return BaseLearner::iql;
        case AlgoId::uds:
        case AlgoId::oril:
            return spec.merge_base;
        default:
            return BaseLearner::td3bc;
    }
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

std::vector<double> last_n(const std::vector<double>& v, std::size_t n) {
    const std::size_t k = std::min(n, v.size());
    return {v.end() - static_cast<std::ptrdiff_t>(k), v.end()};
}

std::string fmt(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
    if (!out) throw Error("write failed: " + path.string());
}

Mat hcat(const Mat& a, const Mat& b) {
    Mat m(a.rows(), a.cols() + b.cols());
    m << a, b;
    return m;
}

PairBatch union_pairs(const LabeledDataset& l, const UnlabeledDataset& u) {
    PairBatch all;
    all.states = hcat(l.states, u.states);
    all.actions = hcat(l.actions, u.actions);
    return all;
}

}  // namespace

std::string to_string(AlgoId a) {
    for (const auto& n : kAlgoNames) {
        if (n.id == a) return n.name;
    }
    throw InternalError("unknown algorithm id");
}

AlgoId algo_from_string(const std::string& name) {
    for (const auto& n : kAlgoNames) {
        if (name == n.name) return n.id;
    }
    std::string known;
    for (const auto& n : kAlgoNames) known += std::string(known.empty() ? "" : ", ") + n.name;
    throw ConfigError("unknown algorithm '" + name + "' (expected one of: " + known + ")");
}

std::vector<AlgoId> all_algos() {
    std::vector<AlgoId> out;
    for (const auto& n : kAlgoNames) out.push_back(n.id);
    return out;
}

bool uses_teacher(AlgoId a) { return a == AlgoId::ludor_td3bc || a == AlgoId::ludor_iql; }
bool is_bc(AlgoId a) { return a == AlgoId::bc_union || a == AlgoId::bc_unlabeled; }

void ExperimentSpec::validate() const {
    env_spec(env);
    config.validate();
    if (seeds.empty()) throw ConfigError("seeds must be non-empty");
    if (max_timesteps < 0) throw ConfigError("max_timesteps must be >= 0");
    if (eval_freq <= 0) throw ConfigError("eval_freq must be positive");
    if (n_episodes < 1) throw ConfigError("n_episodes must be >= 1");
    if (metrics_every <= 0) throw ConfigError("metrics_every must be positive");
    if (labeled.n == 0) throw ConfigError("labeled.n must be positive");
    if (unlabeled.n == 0) throw ConfigError("unlabeled.n must be positive");
    if (!(labeled.fraction > 0.0 && labeled.fraction <= 1.0)) throw ConfigError("labeled.fraction must be in (0, 1]");
    if (!(unlabeled.fraction > 0.0 && unlabeled.fraction <= 1.0)) {
        throw ConfigError("unlabeled.fraction must be in (0, 1]");
    }
    if (!(unlabeled.coverage > 0.0 && unlabeled.coverage <= 1.0)) {
        throw ConfigError("unlabeled.coverage must be in (0, 1]");
    }
    const auto& es = env_spec(env);
    if (unlabeled.coverage_dim >= es.state_dim) throw ConfigError("unlabeled.coverage_dim out of range");
    if (labeled.carve) {
        const auto& c = *labeled.carve;
        if (c.dim >= es.state_dim) throw ConfigError("carve.dim out of range");
        if (!(c.removal_ratio >= 0.0 && c.removal_ratio <= 1.0)) throw ConfigError("carve.ratio must be in [0, 1]");
        if (c.mode == CarveMode::densest) {
            if (c.bins == 0) throw ConfigError("carve.bins must be positive");
            if (!(c.segment_mass > 0.0 && c.segment_mass <= 1.0)) throw ConfigError("carve.mass must be in (0, 1]");
        } else if (!(c.lo <= c.hi)) {
            throw ConfigError("carve.lo must not exceed carve.hi");
        }
    }
}

Datasets build_datasets(const ExperimentSpec& spec, std::uint64_t seed) {
    const auto& es = env_spec(spec.env);
    // Each stage draws from its own fork of the seed so that recipes which
    // share a prefix produce identical intermediate data.
    const Rng root(mix64(seed ^ 0x6c75646f72ULL));
    Datasets d;
    auto labeled = generate_dataset(es, spec.labeled.tier, spec.labeled.n, root.fork(1));
    labeled = subsample(labeled, spec.labeled.fraction, root.fork(2));
    if (spec.labeled.carve) labeled = carve_ood(labeled, *spec.labeled.carve, root.fork(3));
    d.labeled = std::move(labeled);

    auto source = generate_dataset(es, spec.unlabeled.tier, spec.unlabeled.n, root.fork(4));
    source = subsample(source, spec.unlabeled.fraction, root.fork(5));
    auto unlabeled = strip_labels(source);
    if (spec.unlabeled.coverage < 1.0) {
        unlabeled = coverage_filter(unlabeled, spec.unlabeled.coverage_dim, spec.unlabeled.coverage);
    }
    d.unlabeled = std::move(unlabeled);
    if (d.labeled.empty()) throw DatasetError("labeled recipe produced an empty dataset");
    if (d.unlabeled.empty()) throw DatasetError("unlabeled recipe produced an empty dataset");
    return d;
}

PolicyEval evaluate_policy(const Policy& policy, const EnvSpec& env, int n_episodes, Rng rng) {
    if (n_episodes < 1) throw ConfigError("n_episodes must be >= 1");
    PolicyEval ev;
    for (int e = 0; e < n_episodes; ++e) {
        Rng ep_rng = rng.fork(static_cast<std::uint64_t>(e));
        ev.returns.push_back(rollout(env, policy, ep_rng).total_return);
    }
    ev.mean_return = mean_of(ev.returns);
    ev.normalized = normalized_score(ev.mean_return, score_reference(env.name));
    return ev;
}

PolicyEval evaluate_policy(const MlpParams& actor, const EnvSpec& env, int n_episodes, Rng rng) {
    return evaluate_policy([&](const Vec& s) { return mlp_predict(actor, s); }, env, n_episodes, rng);
}

TrainedSeed train_seed(const ExperimentSpec& spec, std::uint64_t seed, const StepObserver& observer) {
    spec.validate();
    const auto& es = env_spec(spec.env);
    const Rng root(seed);
    Rng batch_rng = root.fork(12);
    Rng unl_rng = root.fork(13);
    Rng noise_rng = root.fork(14);
    Rng pretrain_rng = root.fork(15);
    const Rng merge_rng = root.fork(16);
    const Rng eval_root = Rng(spec.eval_seed + seed);

    TrainedSeed out;
    SeedResult& res = out.result;
    res.seed = seed;

    Datasets data = build_datasets(spec, seed);
    res.unlabeled_size = data.unlabeled.size();

    LabeledDataset train = data.labeled;
    if (spec.algo == AlgoId::uds) {
        train = uds_merge(data.labeled, data.unlabeled, es, merge_rng);
    } else if (spec.algo == AlgoId::oril) {
        train = oril_label(data.labeled, data.unlabeled, spec.config, merge_rng);
    }
    res.labeled_size = train.size();

    NetworkBundle& b = out.bundle;
    b = make_bundle(es, spec.config, base_of(spec), root.fork(11));

    const bool ludor = uses_teacher(spec.algo);
    if (ludor && spec.config.teacher_enabled) {
        pretrain_teacher(b, data.unlabeled, spec.config, pretrain_rng);
    }

    UnlabeledDataset bc_pairs;
    if (spec.algo == AlgoId::bc_unlabeled) {
        bc_pairs = data.unlabeled;
    } else if (spec.algo == AlgoId::bc_union) {
        const PairBatch all = union_pairs(data.labeled, data.unlabeled);
        bc_pairs.env = spec.env;
        bc_pairs.states = all.states;
        bc_pairs.actions = all.actions;
    }

    std::uint64_t eval_index = 0;
    auto evaluate = [&](double* teacher_score) {
        const Rng r = eval_root.fork(eval_index++);
        const double s = evaluate_policy(b.actor, es, spec.n_episodes, r).normalized;
        if (ludor && teacher_score) *teacher_score = evaluate_policy(b.teacher, es, spec.n_episodes, r).normalized;
        return s;
    };

    double initial_teacher = std::numeric_limits<double>::quiet_NaN();
    res.initial_score = evaluate(&initial_teacher);
    {
        MetricsRow row;
        row.metrics.step = 0;
        row.eval_score = res.initial_score;
        out.metrics.push_back(row);
    }

    const double bound = es.action_bound;
    const std::size_t bs = spec.config.batch_size;
    for (std::int64_t t = 0; t < spec.max_timesteps; ++t) {
        StepMetrics m;
        if (is_bc(spec.algo)) {
            const PairBatch pb = sample_pairs(bc_pairs, bs, batch_rng);
            m.step = t;
            m.actor_loss = baseline_bc_step(b.actor, b.actor_opt, pb, t);
            m.phases = {Phase::actor};
        } else {
            const Batch batch = sample_batch(train, bs, batch_rng);
            if (ludor) {
                const PairBatch pb = sample_pairs(data.unlabeled, bs, unl_rng);
                m = ludor_train_step(b, batch, pb, spec.config, t, noise_rng, bound);
            } else if (spec.algo == AlgoId::td3bc_ubc || spec.algo == AlgoId::iql_ubc) {
                const PairBatch pb = sample_pairs(data.unlabeled, bs, unl_rng);
                m = baseline_combined_step(b, batch, pb, spec.config, t, noise_rng, bound);
            } else if (b.base == BaseLearner::td3bc) {
                m = td3bc_step(b, batch, uniform_weights(batch.size()), spec.config, t, noise_rng, bound);
            } else {
                m = iql_step(b, batch, uniform_weights(batch.size()), spec.config, t);
            }
        }
        if (observer) observer(t, b);

        const std::int64_t done_steps = t + 1;
        MetricsRow row;
        row.metrics = m;
        row.metrics.step = done_steps;
        bool keep = done_steps % spec.metrics_every == 0;
        if (done_steps % spec.eval_freq == 0) {
            double teacher = std::numeric_limits<double>::quiet_NaN();
            row.eval_score = evaluate(&teacher);
            res.eval_steps.push_back(done_steps);
            res.scores.push_back(row.eval_score);
            if (ludor) res.teacher_scores.push_back(teacher);
            keep = true;
        }
        if (keep) out.metrics.push_back(std::move(row));
    }

    res.final_score = final_score(res);
    if (ludor) {
        res.final_teacher_score =
            res.teacher_scores.empty() ? initial_teacher : mean_of(last_n(res.teacher_scores, kFinalEvaluations));
    }
    return out;
}

double final_score(const SeedResult& r) {
    if (r.scores.empty()) return r.initial_score;
    return mean_of(last_n(r.scores, kFinalEvaluations));
}

void summarize(EvalReport& report) {
    std::vector<double> pooled, teacher;
    report.partial = false;
    for (const auto& s : report.seeds) {
        if (!s.ok) {
            report.partial = true;
            continue;
        }
        if (s.scores.empty()) {
            pooled.push_back(s.initial_score);
        } else {
            const auto tail = last_n(s.scores, kFinalEvaluations);
            pooled.insert(pooled.end(), tail.begin(), tail.end());
        }
        if (!s.teacher_scores.empty()) {
            const auto tail = last_n(s.teacher_scores, kFinalEvaluations);
            teacher.insert(teacher.end(), tail.begin(), tail.end());
        } else if (std::isfinite(s.final_teacher_score) && s.final_teacher_score != 0.0) {
            teacher.push_back(s.final_teacher_score);
        }
    }
    report.final_mean = mean_of(pooled);
    double var = 0.0;
    for (double x : pooled) var += (x - report.final_mean) * (x - report.final_mean);
    report.final_std = pooled.empty() ? 0.0 : std::sqrt(var / static_cast<double>(pooled.size()));
    report.teacher_final_mean = mean_of(teacher);
}

Json report_to_json(const EvalReport& r, bool include_runtime) {
    Json seeds = Json::array();
    for (const auto& s : r.seeds) {
        seeds.push_back(Json{{"seed", s.seed},
                             {"ok", s.ok},
                             {"error", s.error},
                             {"initial_score", s.initial_score},
                             {"eval_steps", s.eval_steps},
                             {"scores", s.scores},
                             {"teacher_scores", s.teacher_scores},
                             {"final_score", s.final_score},
                             {"final_teacher_score", s.final_teacher_score},
                             {"labeled_size", s.labeled_size},
                             {"unlabeled_size", s.unlabeled_size}});
    }
    Json j{{"name", r.name},
           {"family", r.family},
           {"hash", r.hash},
           {"env", r.env},
           {"algo", r.algo},
           {"seeds", seeds},
           {"final_mean", r.final_mean},
           {"final_std", r.final_std},
           {"teacher_final_mean", r.teacher_final_mean},
           {"partial", r.partial}};
    if (include_runtime) j["runtime_seconds"] = r.runtime_seconds;
    return j;
}

EvalReport report_from_json(const Json& j) {
    try {
        EvalReport r;
        r.name = j.at("name").get<std::string>();
        r.family = j.at("family").get<std::string>();
        r.hash = j.at("hash").get<std::string>();
        r.env = j.at("env").get<std::string>();
        r.algo = j.at("algo").get<std::string>();
        for (const auto& s : j.at("seeds")) {
            SeedResult x;
            x.seed = s.at("seed").get<std::uint64_t>();
            x.ok = s.at("ok").get<bool>();
            x.error = s.at("error").get<std::string>();
            x.initial_score = s.at("initial_score").get<double>();
            x.eval_steps = s.at("eval_steps").get<std::vector<std::int64_t>>();
            x.scores = s.at("scores").get<std::vector<double>>();
            x.teacher_scores = s.at("teacher_scores").get<std::vector<double>>();
            x.final_score = s.at("final_score").get<double>();
            x.final_teacher_score = s.at("final_teacher_score").get<double>();
            x.labeled_size = s.at("labeled_size").get<std::size_t>();
            x.unlabeled_size = s.at("unlabeled_size").get<std::size_t>();
            r.seeds.push_back(std::move(x));
        }
        r.final_mean = j.at("final_mean").get<double>();
        r.final_std = j.at("final_std").get<double>();
        r.teacher_final_mean = j.at("teacher_final_mean").get<double>();
        r.partial = j.at("partial").get<bool>();
        r.runtime_seconds = j.value("runtime_seconds", 0.0);
        return r;
    } catch (const Json::exception& e) {
        throw Error(std::string("malformed report: ") + e.what());
    }
}

std::string report_digest(const EvalReport& r) {
    // NaN is not representable in JSON; nlohmann writes it as null, which is
    // still deterministic.
    const std::string text = report_to_json(r, false).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace {

std::string metrics_csv(const std::vector<std::pair<std::uint64_t, const std::vector<MetricsRow>*>>& rows) {
    std::string out = "seed,step,critic_loss,actor_loss,value_loss,teacher_loss,mean_kappa,lambda,skipped,eval_score\n";
    auto num = [](double x) { return std::isfinite(x) ? fmt(x) : std::string(); };
    for (const auto& [seed, list] : rows) {
        for (const auto& r : *list) {
            const auto& m = r.metrics;
            out += std::to_string(seed) + "," + std::to_string(m.step) + "," + num(m.critic_loss) + "," +
                   num(m.actor_loss) + "," + num(m.value_loss) + "," + num(m.teacher_loss) + "," +
                   num(m.mean_kappa) + "," + num(m.lambda) + "," + (m.skipped ? "1" : "0") + "," +
                   num(r.eval_score) + "\n";
        }
    }
    return out;
}

}  // namespace

std::string series_csv(const EvalReport& r) {
    std::string out = "seed,step,score,teacher_score\n";
    for (const auto& s : r.seeds) {
        if (!s.ok) continue;
        for (std::size_t i = 0; i < s.scores.size(); ++i) {
            out += std::to_string(s.seed) + "," + std::to_string(s.eval_steps[i]) + "," + fmt(s.scores[i]) + ",";
            if (i < s.teacher_scores.size()) out += fmt(s.teacher_scores[i]);
            out += "\n";
        }
    }
    return out;
}

EvalReport run_experiment(const ExperimentSpec& spec, const RunOptions& options) {
    spec.validate();
    const auto start = std::chrono::steady_clock::now();
    EvalReport report;
    report.name = spec.name;
    report.family = spec.family;
    report.hash = config_hash(spec);
    report.env = spec.env;
    report.algo = to_string(spec.algo);

    std::filesystem::path dir;
    if (!options.out_root.empty()) {
        dir = options.out_root / "runs" / report.hash;
        const auto existing = dir / "report.json";
        if (options.resume && std::filesystem::exists(existing)) {
            std::ifstream in(existing);
            try {
                EvalReport old = report_from_json(Json::parse(in));
                if (old.hash == report.hash && !old.partial) {
                    old.name = spec.name;
                    old.family = spec.family;
                    return old;
                }
            } catch (const std::exception&) {
                // unreadable report: recompute
            }
        }
        std::filesystem::create_directories(dir / "checkpoint");
        write_text(dir / "config.txt", canonical_config(spec));
    }

    std::vector<TrainedSeed> trained(spec.seeds.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < spec.seeds.size();) {
            const std::uint64_t seed = spec.seeds[i];
            try {
                trained[i] = train_seed(spec, seed);
            } catch (const Error& e) {
                trained[i] = TrainedSeed{};
                trained[i].result.seed = seed;
                trained[i].result.ok = false;
                trained[i].result.error = e.what();
                warn("run " + report.hash + " seed " + std::to_string(seed) + " failed: " + e.what());
            }
        }
    };
    {
        const int n = std::max(1, std::min<int>(options.seed_jobs, static_cast<int>(spec.seeds.size())));
        std::vector<std::thread> pool;
        for (int i = 1; i < n; ++i) pool.emplace_back(worker);
        worker();
        for (auto& t : pool) t.join();
    }
    for (const auto& t : trained) report.seeds.push_back(t.result);
    summarize(report);
    report.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    if (!dir.empty()) {
        std::vector<std::pair<std::uint64_t, const std::vector<MetricsRow>*>> rows;
        for (const auto& t : trained) {
            rows.emplace_back(t.result.seed, &t.metrics);
            if (!t.result.ok) continue;
            Checkpoint ck;
            ck.seed = t.result.seed;
            ck.step = spec.max_timesteps;
            const auto& b = t.bundle;
            ck.nets = {{"actor", b.actor}, {"actor_target", b.actor_target}, {"teacher", b.teacher},
                       {"q1", b.q1},       {"q2", b.q2},                     {"q1_target", b.q1_target},
                       {"q2_target", b.q2_target}, {"value", b.value}};
            write_checkpoint(dir / "checkpoint" / ("seed-" + std::to_string(t.result.seed) + ".ckpt"), ck);
        }
        write_text(dir / "metrics.csv", metrics_csv(rows));
        write_text(dir / "series.csv", series_csv(report));
        write_text(dir / "plot.svg", score_plot_svg(report));
        write_text(dir / "report.json", report_to_json(report).dump(2) + "\n");
    }
    return report;
}

std::vector<EvalReport> run_matrix(const std::vector<ExperimentSpec>& specs, const RunOptions& options, int jobs) {
    for (const auto& s : specs) s.validate();
    std::vector<EvalReport> out(specs.size());
    std::vector<std::string> errors(specs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= specs.size()) return;
            try {
                out[i] = run_experiment(specs[i], options);
            } catch (const std::exception& e) {
                errors[i] = e.what();
            }
        }
    };
    const int n = std::max(1, std::min<int>(jobs, static_cast<int>(specs.size())));
    std::vector<std::thread> pool;
    for (int i = 1; i < n; ++i) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    for (std::size_t i = 0; i < specs.size(); ++i) {
        if (!errors[i].empty()) throw Error("experiment '" + specs[i].name + "' failed: " + errors[i]);
    }
    return out;
}

}  // namespace ludor
