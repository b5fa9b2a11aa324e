#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ludor/dataset.hpp"
#include "ludor/error.hpp"
#include "test_util.hpp"

using namespace ludor;

namespace {

// One-dimensional state and action; state values as given.
LabeledDataset synthetic(const std::vector<double>& values) {
    LabeledDataset d;
    d.env = "pointmass-2d";
    const auto n = static_cast<Eigen::Index>(values.size());
    d.states.resize(1, n);
    for (Eigen::Index i = 0; i < n; ++i) d.states(0, i) = values[static_cast<std::size_t>(i)];
    d.actions = Mat::Zero(1, n);
    for (Eigen::Index i = 0; i < n; ++i) d.actions(0, i) = static_cast<double>(i);
    d.rewards = Vec::LinSpaced(n, 0.0, 1.0);
    d.next_states = d.states;
    d.dones.assign(values.size(), 0);
    return d;
}

// Exhaustive scan over every contiguous bin run: shortest run holding >= need, leftmost on ties.
std::pair<std::size_t, std::size_t> brute_force_run(const std::vector<std::size_t>& counts, std::size_t need) {
    for (std::size_t len = 1; len <= counts.size(); ++len) {
        for (std::size_t start = 0; start + len <= counts.size(); ++start) {
            std::size_t s = 0;
            for (std::size_t i = start; i < start + len; ++i) s += counts[i];
            if (s >= need) return {start, len};
        }
    }
    return {0, counts.size()};
}

bool same_bytes(const LabeledDataset& a, const LabeledDataset& b) {
    return encode_ods(AnyDataset{a}) == encode_ods(AnyDataset{b});
}

}  // namespace

TEST_SUITE("data") {

TEST_CASE("generate_dataset: n = 1 gives one valid transition") {
    const auto& es = env_spec("pendulum-swingup");
    const auto d = generate_dataset(es, Tier::medium, 1, Rng(3));
    REQUIRE(d.size() == 1);
    d.validate();
    CHECK(d.state_dim() == 3);
    CHECK(d.actions.cwiseAbs().maxCoeff() <= es.action_bound);
    CHECK(std::isfinite(d.rewards(0)));
    CHECK_THROWS_AS(generate_dataset(es, Tier::medium, 0, Rng(3)), ConfigError);
}

TEST_CASE("generate_dataset: same seed twice gives byte-identical datasets; episodes end in done") {
    for (const auto& n : env_names()) {
        const auto a = generate_dataset(env_spec(n), Tier::expert, 1000, Rng(5));
        const auto b = generate_dataset(env_spec(n), Tier::expert, 1000, Rng(5));
        CHECK(same_bytes(a, b));
        CHECK(!same_bytes(a, generate_dataset(env_spec(n), Tier::expert, 1000, Rng(6))));
        // after every done the next state is a fresh reset, otherwise the chain continues
        for (std::size_t i = 0; i + 1 < a.size(); ++i) {
            if (!a.dones[i]) CHECK(a.next_states.col(static_cast<Eigen::Index>(i)) == a.states.col(static_cast<Eigen::Index>(i + 1)));
        }
        CHECK(std::count(a.dones.begin(), a.dones.end(), 1) >= 1);
    }
}

TEST_CASE("generate_dataset: 10k expert point-mass transitions match the golden mean reward within 2%") {
    const auto d = generate_dataset(env_spec("pointmass-2d"), Tier::expert, 10000, Rng(7));
    CHECK(d.rewards.mean() == doctest::Approx(test::golden()["pointmass_expert_10k_mean_reward"].get<double>()).epsilon(0.02));
}

TEST_CASE("densest_segment: constant values give a degenerate interval") {
    std::vector<double> v(100, 2.5);
    const auto iv = densest_segment(v, 10, 0.6);
    CHECK(iv.lo == 2.5);
    CHECK(iv.hi == 2.5);
}

TEST_CASE("densest_segment: uniform values, 10 bins, mass 0.6 -> leftmost six-bin run [0, 0.6]") {
    std::vector<double> v;
    for (int k = 0; k < 10; ++k)
        for (int j = 0; j < 100; ++j) v.push_back((k + 0.5) / 10.0);
    // pin the range to [0, 1] without changing any bin count
    v[0] = 0.0;
    v.back() = 1.0;
    const auto iv = densest_segment(v, 10, 0.6);
    CHECK(iv.first_bin == 0);
    CHECK(iv.bin_count == 6);
    CHECK(iv.lo == doctest::Approx(0.0));
    CHECK(iv.hi == doctest::Approx(0.6));
}

TEST_CASE("densest_segment: bimodal sample covers the heavier mode and matches an exhaustive scan") {
    Rng r(21);
    std::vector<double> v;
    for (int i = 0; i < 3000; ++i) v.push_back(r.normal(-2.0, 0.3));
    for (int i = 0; i < 1000; ++i) v.push_back(r.normal(3.0, 0.3));
    const auto counts = histogram(v, 50);
    const auto iv = densest_segment(v, 50, 0.6);
    const auto [start, len] = brute_force_run(counts, static_cast<std::size_t>(std::ceil(0.6 * v.size())));
    CHECK(iv.first_bin == start);
    CHECK(iv.bin_count == len);
    CHECK(iv.lo < -2.0);
    CHECK(iv.hi > -2.0);
    CHECK(iv.hi < 0.0);
}

TEST_CASE("densest_segment: 100 random samples agree with the exhaustive scan and hold the mass") {
    Rng r(22);
    for (int rep = 0; rep < 100; ++rep) {
        const std::size_t n = 20 + r.below(500);
        const std::size_t bins = 2 + r.below(60);
        const double mass = 0.05 + 0.9 * r.uniform();
        std::vector<double> v(n);
        const int modes = 1 + static_cast<int>(r.below(3));
        for (auto& x : v) x = r.normal(3.0 * static_cast<double>(r.below(modes)), 0.2 + r.uniform());
        const auto counts = histogram(v, bins);
        const auto need = static_cast<std::size_t>(std::ceil(mass * n - 1e-9 * n));
        const auto iv = densest_segment(v, bins, mass);
        const auto [start, len] = brute_force_run(counts, need);
        CHECK(iv.first_bin == start);
        CHECK(iv.bin_count == len);
        std::size_t inside = 0;
        for (double x : v) inside += (x >= iv.lo - 1e-12 && x <= iv.hi + 1e-12);
        CHECK(inside >= need);
    }
}

TEST_CASE("carve_ood: removal ratio 0 leaves the dataset unchanged") {
    const auto d = generate_dataset(env_spec("pointmass-2d"), Tier::medium, 2000, Rng(1));
    CarveSpec s;
    s.removal_ratio = 0.0;
    const auto c = carve_ood(d, s, Rng(2));
    CHECK(c.size() == d.size());
    CHECK(c.states == d.states);
    CHECK(c.rewards == d.rewards);
}

TEST_CASE("carve_ood: ratio 1 over the full range empties the dataset") {
    const auto d = generate_dataset(env_spec("pointmass-2d"), Tier::medium, 500, Rng(1));
    CarveSpec s;
    s.removal_ratio = 1.0;
    s.mode = CarveMode::explicit_range;
    s.lo = d.states.row(0).minCoeff();
    s.hi = d.states.row(0).maxCoeff();
    CHECK(carve_ood(d, s, Rng(2)).empty());
}

TEST_CASE("carve_ood: ratio 0.6 on 1000 in-range of 2000 leaves 1400, removing only in-range items") {
    std::vector<double> v;
    Rng r(4);
    for (int i = 0; i < 2000; ++i) v.push_back(i % 2 ? r.uniform(0.0, 1.0) : r.uniform(2.0, 3.0));
    const auto d = synthetic(v);
    CarveSpec s;
    s.removal_ratio = 0.6;
    s.mode = CarveMode::explicit_range;
    s.lo = 0.0;
    s.hi = 1.0;
    const auto c = carve_ood(d, s, Rng(9));
    REQUIRE(c.size() == 1400);
    // actions carry the original index: survivors are untouched, removals are in range
    std::vector<char> kept(2000, 0);
    for (std::size_t i = 0; i < c.size(); ++i) {
        const auto idx = static_cast<std::size_t>(c.actions(0, static_cast<Eigen::Index>(i)));
        kept[idx] = 1;
        CHECK(c.states(0, static_cast<Eigen::Index>(i)) == v[idx]);
    }
    for (std::size_t i = 0; i < 2000; ++i)
        if (!kept[i]) CHECK(v[i] <= 1.0);
    CHECK(c.provenance.back()["op"] == "carve");
    CHECK(c.provenance.back()["removed"] == 600);
}

TEST_CASE("carve_ood: densest mode removes the densest segment; empty selection warns") {
    const auto d = generate_dataset(env_spec("pointmass-2d"), Tier::medium, 3000, Rng(1));
    CarveSpec s;
    s.dim = 0;
    s.removal_ratio = 1.0;
    Interval iv;
    const auto sel = carve_selection(d, s, &iv);
    CHECK(sel.size() >= static_cast<std::size_t>(0.6 * 3000));
    const auto c = carve_ood(d, s, Rng(2));
    CHECK(c.size() == d.size() - sel.size());
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(c.size()); ++i) {
        const double x = c.states(0, i);
        CHECK((x < iv.lo || x > iv.hi - 1e-12));
    }
    CarveSpec empty;
    empty.mode = CarveMode::explicit_range;
    empty.lo = 100.0;
    empty.hi = 101.0;
    const auto before = warning_count();
    CHECK(carve_ood(d, empty, Rng(2)).size() == d.size());
    CHECK(warning_count() == before + 1);
    CarveSpec bad;
    bad.dim = 9;
    CHECK_THROWS_AS(carve_ood(d, bad, Rng(2)), ConfigError);
}

TEST_CASE("coverage_filter: identity at 1.0, ~60% kept of uniform values at 0.6, range shrinks") {
    const auto u = strip_labels(generate_dataset(env_spec("pointmass-2d"), Tier::expert, 1000, Rng(2)));
    CHECK(coverage_filter(u, 0, 1.0).states == u.states);

    std::vector<double> v;
    Rng r(5);
    for (int i = 0; i < 10000; ++i) v.push_back(r.uniform());
    const auto c = coverage_filter(synthetic(v), 0, 0.6);
    CHECK(std::abs(static_cast<double>(c.size()) / 10000.0 - 0.6) <= 0.02);
    CHECK(c.states.minCoeff() >= *std::min_element(v.begin(), v.end()));
    CHECK(c.states.maxCoeff() <= *std::max_element(v.begin(), v.end()));
    CHECK(c.states.minCoeff() > 0.15);
    CHECK(c.states.maxCoeff() < 0.85);
    CHECK_THROWS_AS(coverage_filter(u, 0, 0.0), ConfigError);
}

TEST_CASE("subsample: fraction 1 keeps the multiset, 0.01 of 10000 keeps exactly 100") {
    const auto d = generate_dataset(env_spec("pendulum-swingup"), Tier::random, 10000, Rng(8));
    CHECK(subsample(d, 1.0, Rng(1)).states == d.states);
    CHECK(subsample(d, 0.01, Rng(1)).size() == 100);
    CHECK(subsample_count(10, 0.001) == 1);
    CHECK(subsample_count(1001, 0.5) == 501);
    CHECK_THROWS_AS(subsample(d, 0.0, Rng(1)), ConfigError);
}

TEST_CASE("subsample: sampled indices are uniform (chi-square over 1000 repeats, p > 0.01)") {
    std::vector<double> v(100);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i);
    const auto d = synthetic(v);
    std::vector<double> hits(100, 0.0);
    for (int rep = 0; rep < 1000; ++rep) {
        const auto s = subsample(d, 0.1, Rng(1000 + rep));
        REQUIRE(s.size() == 10);
        for (Eigen::Index i = 0; i < 10; ++i) {
            if (i > 0) CHECK(s.states(0, i) > s.states(0, i - 1));  // order preserved
            hits[static_cast<std::size_t>(s.states(0, i))] += 1.0;
        }
    }
    double chi2 = 0.0;
    for (double h : hits) chi2 += (h - 100.0) * (h - 100.0) / 100.0;
    CHECK(chi2 < 134.6416);  // 99th percentile of chi-square with 99 degrees of freedom
}

TEST_CASE("strip_labels: same length, lossless (s, a), smaller on disk") {
    const auto d = generate_dataset(env_spec("pointmass-2d"), Tier::expert, 300, Rng(3));
    const auto u = strip_labels(d);
    CHECK(u.size() == d.size());
    CHECK(u.states == d.states);
    CHECK(u.actions == d.actions);
    CHECK(encode_ods(AnyDataset{u}).size() < encode_ods(AnyDataset{d}).size());
}

TEST_CASE("ods round trip is exact; malformed input is rejected") {
    const auto d = generate_dataset(env_spec("pendulum-swingup"), Tier::medium, 257, Rng(3));
    const std::string bytes = encode_ods(AnyDataset{d});
    CHECK(bytes.rfind("ODS1 ", 0) == 0);
    const auto back = std::get<LabeledDataset>(decode_ods(bytes));
    CHECK(back.states == d.states);
    CHECK(back.actions == d.actions);
    CHECK(back.rewards == d.rewards);
    CHECK(back.next_states == d.next_states);
    CHECK(back.dones == d.dones);
    CHECK(back.provenance == d.provenance);
    CHECK(encode_ods(AnyDataset{back}) == bytes);
    const auto u = strip_labels(d);
    CHECK(encode_ods(decode_ods(encode_ods(AnyDataset{u}))) == encode_ods(AnyDataset{u}));
    CHECK_THROWS(decode_ods(bytes.substr(0, bytes.size() - 8)));
    CHECK_THROWS(decode_ods("nonsense"));
}

TEST_CASE("provenance replay reproduces the dataset byte for byte, in recorded order") {
    const auto& es = env_spec("pointmass-2d");
    const auto g = generate_dataset(es, Tier::medium, 4000, Rng(11));
    const auto s = subsample(g, 0.5, Rng(12));
    CarveSpec cs;
    cs.dim = 1;
    cs.removal_ratio = 0.6;
    const auto c = carve_ood(s, cs, Rng(13));
    const auto u = coverage_filter(strip_labels(c), 0, 0.8);
    std::vector<std::string> ops;
    for (const auto& op : u.provenance) ops.push_back(op["op"].get<std::string>());
    CHECK(ops == std::vector<std::string>{"generate", "subsample", "carve", "strip", "coverage"});
    CHECK(encode_ods(replay_provenance(c.provenance)) == encode_ods(AnyDataset{c}));
    CHECK(encode_ods(replay_provenance(u.provenance)) == encode_ods(AnyDataset{u}));
    // carve before subsample is a different dataset
    const auto swapped = subsample(carve_ood(g, cs, Rng(13)), 0.5, Rng(12));
    CHECK(!same_bytes(swapped, c));
    CHECK_THROWS_AS(replay_provenance(Json::array()), DatasetError);
}

TEST_CASE("state histograms: one CSV per dimension, counts sum to N") {
    const auto d = generate_dataset(env_spec("pendulum-swingup"), Tier::expert, 1000, Rng(3));
    const auto csvs = state_histograms_csv(d.states, 20);
    REQUIRE(csvs.size() == 3);
    for (const auto& csv : csvs) {
        std::istringstream in(csv);
        std::string line;
        std::getline(in, line);
        CHECK(line == "dim,bin,lo,hi,count,density");
        std::size_t total = 0, rows = 0;
        while (std::getline(in, line)) {
            std::vector<std::string> f;
            std::stringstream ss(line);
            std::string x;
            while (std::getline(ss, x, ',')) f.push_back(x);
            REQUIRE(f.size() == 6);
            total += std::stoul(f[4]);
            ++rows;
        }
        CHECK(rows == 20);
        CHECK(total == 1000);
    }
}

}  // TEST_SUITE
