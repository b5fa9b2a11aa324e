#include "ludor/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

#include "ludor/binio.hpp"
#include "ludor/error.hpp"

namespace ludor {

namespace {

Json rng_json(const Rng& rng) { return Json{{"seed", rng.seed()}, {"counter", rng.counter()}}; }

Rng rng_from_json(const Json& j) { return Rng(j.at("seed").get<std::uint64_t>(), j.at("counter").get<std::uint64_t>()); }

Mat select_cols(const Mat& m, std::span<const std::size_t> idx) {
    Mat out(m.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j) {
        out.col(static_cast<Eigen::Index>(j)) = m.col(static_cast<Eigen::Index>(idx[j]));
    }
    return out;
}

std::vector<double> row_values(const Mat& m, std::size_t dim) {
    if (dim >= static_cast<std::size_t>(m.rows())) {
        throw ConfigError("state dimension index " + std::to_string(dim) + " out of range (state-dim " +
                          std::to_string(m.rows()) + ")");
    }
    std::vector<double> v(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.cols(); ++i) {
        v[static_cast<std::size_t>(i)] = m(static_cast<Eigen::Index>(dim), i);
    }
    return v;
}

// Linear-interpolation quantile of sorted values.
double quantile_sorted(const std::vector<double>& sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto i = static_cast<std::size_t>(std::floor(pos));
    if (i + 1 >= sorted.size()) {
        return sorted.back();
    }
    const double frac = pos - static_cast<double>(i);
    return sorted[i] + frac * (sorted[i + 1] - sorted[i]);
}

template <class D>
std::vector<std::size_t> coverage_indices(const D& data, std::size_t dim, double keep_fraction) {
    if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) {
        throw ConfigError("coverage keep_fraction must lie in (0, 1]");
    }
    if (data.empty()) {
        throw DatasetError("coverage filter on an empty dataset");
    }
    const auto values = row_values(data.states, dim);
    std::vector<std::size_t> keep;
    if (keep_fraction == 1.0) {
        keep.resize(values.size());
        for (std::size_t i = 0; i < keep.size(); ++i) keep[i] = i;
        return keep;
    }
    auto sorted = values;
    std::sort(sorted.begin(), sorted.end());
    const double tail = (1.0 - keep_fraction) / 2.0;
    const double lo = quantile_sorted(sorted, tail);
    const double hi = quantile_sorted(sorted, 1.0 - tail);
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (values[i] >= lo && values[i] <= hi) {
            keep.push_back(i);
        }
    }
    if (keep.empty()) {
        throw DatasetError("coverage band is empty");
    }
    return keep;
}

template <class D>
std::vector<std::size_t> subsample_indices(const D& data, double fraction, Rng& rng) {
    if (!(fraction > 0.0 && fraction <= 1.0)) {
        throw ConfigError("subsample fraction must lie in (0, 1]");
    }
    const std::size_t k = subsample_count(data.size(), fraction);
    if (k == 0) {
        throw DatasetError("subsample produced an empty dataset");
    }
    return rng.sample_without_replacement(data.size(), k);
}

}  // namespace

Transition LabeledDataset::at(std::size_t i) const {
    const auto c = static_cast<Eigen::Index>(i);
    return Transition{states.col(c), actions.col(c), rewards(c), next_states.col(c), dones[i] != 0};
}

LabeledDataset LabeledDataset::select(std::span<const std::size_t> idx) const {
    LabeledDataset out;
    out.env = env;
    out.tier = tier;
    out.provenance = provenance;
    out.states = select_cols(states, idx);
    out.actions = select_cols(actions, idx);
    out.next_states = select_cols(next_states, idx);
    out.rewards.resize(static_cast<Eigen::Index>(idx.size()));
    out.dones.resize(idx.size());
    for (std::size_t j = 0; j < idx.size(); ++j) {
        out.rewards(static_cast<Eigen::Index>(j)) = rewards(static_cast<Eigen::Index>(idx[j]));
        out.dones[j] = dones[idx[j]];
    }
    return out;
}

void LabeledDataset::validate() const {
    const auto n = states.cols();
    if (actions.cols() != n || next_states.cols() != n || rewards.size() != n ||
        dones.size() != static_cast<std::size_t>(n) || next_states.rows() != states.rows()) {
        throw DatasetError("labeled dataset columns have inconsistent sizes");
    }
    if (!rewards.allFinite()) {
        throw DatasetError("labeled dataset has non-finite rewards");
    }
    if (!env.empty()) {
        const auto& spec = env_spec(env);
        if (n > 0 && (state_dim() != spec.state_dim || action_dim() != spec.action_dim)) {
            throw DatasetError("dataset dimensions do not match environment '" + env + "'");
        }
    }
}

UnlabeledDataset UnlabeledDataset::select(std::span<const std::size_t> idx) const {
    UnlabeledDataset out;
    out.env = env;
    out.tier = tier;
    out.provenance = provenance;
    out.states = select_cols(states, idx);
    out.actions = select_cols(actions, idx);
    return out;
}

void UnlabeledDataset::validate() const {
    if (actions.cols() != states.cols()) {
        throw DatasetError("unlabeled dataset columns have inconsistent sizes");
    }
    if (!env.empty()) {
        const auto& spec = env_spec(env);
        if (size() > 0 && (state_dim() != spec.state_dim || action_dim() != spec.action_dim)) {
            throw DatasetError("dataset dimensions do not match environment '" + env + "'");
        }
    }
}

LabeledDataset generate_dataset(const EnvSpec& spec, Tier tier, std::size_t n, Rng rng) {
    if (n == 0) {
        throw ConfigError("generate_dataset needs n_transitions > 0");
    }
    LabeledDataset d;
    d.env = spec.name;
    d.tier = tier;
    d.provenance = Json::array();
    d.provenance.push_back(
        {{"op", "generate"}, {"env", spec.name}, {"tier", to_string(tier)}, {"n", n}, {"rng", rng_json(rng)}});
    const auto sd = static_cast<Eigen::Index>(spec.state_dim);
    const auto ad = static_cast<Eigen::Index>(spec.action_dim);
    const auto cols = static_cast<Eigen::Index>(n);
    d.states.resize(sd, cols);
    d.actions.resize(ad, cols);
    d.next_states.resize(sd, cols);
    d.rewards.resize(cols);
    d.dones.resize(n);

    std::size_t i = 0;
    while (i < n) {
        Vec s = env_reset(spec, rng);
        for (int t = 0; t < spec.max_steps && i < n; ++t, ++i) {
            const Vec a = scripted_policy(tier, spec, s, rng);
            const auto r = env_step(spec, s, a, t, rng);
            const auto c = static_cast<Eigen::Index>(i);
            d.states.col(c) = s;
            d.actions.col(c) = a;
            d.rewards(c) = r.reward;
            d.next_states.col(c) = r.next_state;
            d.dones[i] = r.done() ? 1 : 0;
            if (r.done()) {
                ++i;
                break;
            }
            s = r.next_state;
        }
    }
    return d;
}

std::size_t bin_index(double x, double min, double width, std::size_t bins) {
    if (width <= 0.0) {
        return 0;
    }
    const double pos = std::floor((x - min) / width);
    if (pos < 0.0) return 0;
    const auto i = static_cast<std::size_t>(pos);
    return std::min(i, bins - 1);
}

std::vector<std::size_t> histogram(std::span<const double> values, std::size_t bins, double* min_out,
                                   double* width_out) {
    if (bins == 0) {
        throw ConfigError("histogram needs at least one bin");
    }
    if (values.empty()) {
        throw DatasetError("histogram of an empty sample");
    }
    const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
    const double width = (*mx - *mn) / static_cast<double>(bins);
    std::vector<std::size_t> counts(bins, 0);
    for (double x : values) {
        ++counts[bin_index(x, *mn, width, bins)];
    }
    if (min_out) *min_out = *mn;
    if (width_out) *width_out = width;
    return counts;
}

Interval densest_segment(std::span<const double> values, std::size_t bins, double mass) {
    if (values.empty()) {
        throw DatasetError("densest_segment on an empty sample");
    }
    if (!(mass > 0.0 && mass < 1.0)) {
        throw ConfigError("densest_segment mass must lie in (0, 1)");
    }
    double mn = 0.0;
    double width = 0.0;
    const auto counts = histogram(values, bins, &mn, &width);
    if (width == 0.0) {
        warn("densest_segment: constant-valued dimension, returning a degenerate interval");
        return Interval{mn, mn, 0, bins};
    }
    const double n = static_cast<double>(values.size());
    const auto need = static_cast<std::size_t>(std::ceil(mass * n - 1e-9 * n));

    std::vector<std::size_t> prefix(bins + 1, 0);
    for (std::size_t i = 0; i < bins; ++i) prefix[i + 1] = prefix[i] + counts[i];

    // two pointers: for each start, shortest end reaching `need`
    Interval best{0.0, 0.0, 0, bins + 1};
    std::size_t end = 0;
    for (std::size_t start = 0; start < bins; ++start) {
        end = std::max(end, start);
        while (end < bins && prefix[end] - prefix[start] < need) ++end;
        if (prefix[end] - prefix[start] < need) break;
        const std::size_t len = end - start;
        if (len < best.bin_count) {
            best.first_bin = start;
            best.bin_count = len;
        }
    }
    best.lo = mn + static_cast<double>(best.first_bin) * width;
    best.hi = best.first_bin + best.bin_count == bins ? mn + width * static_cast<double>(bins)
                                                      : mn + static_cast<double>(best.first_bin + best.bin_count) * width;
    return best;
}

Interval densest_segment(const LabeledDataset& data, std::size_t dim, std::size_t bins, double mass) {
    const auto v = row_values(data.states, dim);
    return densest_segment(v, bins, mass);
}

Json carve_spec_to_json(const CarveSpec& s) {
    Json j{{"dim", s.dim},
           {"removal_ratio", s.removal_ratio},
           {"mode", s.mode == CarveMode::densest ? "densest" : "range"},
           {"bins", s.bins}};
    if (s.mode == CarveMode::densest) {
        j["segment_mass"] = s.segment_mass;
    } else {
        j["lo"] = s.lo;
        j["hi"] = s.hi;
    }
    return j;
}

CarveSpec carve_spec_from_json(const Json& j) {
    CarveSpec s;
    s.dim = j.at("dim").get<std::size_t>();
    s.removal_ratio = j.at("removal_ratio").get<double>();
    const auto mode = j.at("mode").get<std::string>();
    if (mode == "densest") {
        s.mode = CarveMode::densest;
        s.segment_mass = j.at("segment_mass").get<double>();
    } else if (mode == "range") {
        s.mode = CarveMode::explicit_range;
        s.lo = j.at("lo").get<double>();
        s.hi = j.at("hi").get<double>();
    } else {
        throw ConfigError("unknown carve mode '" + mode + "'");
    }
    s.bins = j.at("bins").get<std::size_t>();
    return s;
}

std::vector<std::size_t> carve_selection(const LabeledDataset& data, const CarveSpec& spec, Interval* interval) {
    if (spec.dim >= data.state_dim()) {
        throw ConfigError("carve dimension " + std::to_string(spec.dim) + " out of range");
    }
    if (!(spec.removal_ratio >= 0.0 && spec.removal_ratio <= 1.0)) {
        throw ConfigError("removal_ratio must lie in [0, 1]");
    }
    std::vector<std::size_t> sel;
    if (data.empty()) {
        return sel;
    }
    const auto values = row_values(data.states, spec.dim);
    if (spec.mode == CarveMode::densest) {
        const Interval iv = densest_segment(values, spec.bins, spec.segment_mass);
        if (interval) *interval = iv;
        double mn = 0.0;
        double width = 0.0;
        histogram(values, spec.bins, &mn, &width);
        for (std::size_t i = 0; i < values.size(); ++i) {
            const auto b = bin_index(values[i], mn, width, spec.bins);
            if (b >= iv.first_bin && b < iv.first_bin + iv.bin_count) {
                sel.push_back(i);
            }
        }
    } else {
        if (interval) *interval = Interval{spec.lo, spec.hi, 0, 0};
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (values[i] >= spec.lo && values[i] <= spec.hi) {
                sel.push_back(i);
            }
        }
    }
    return sel;
}

LabeledDataset carve_ood(const LabeledDataset& data, const CarveSpec& spec, Rng rng) {
    Interval iv;
    const auto sel = carve_selection(data, spec, &iv);
    Json op{{"op", "carve"}, {"spec", carve_spec_to_json(spec)}, {"rng", rng_json(rng)}, {"lo", iv.lo}, {"hi", iv.hi}};
    if (sel.empty()) {
        warn("carve_ood: selection interval is empty, dataset unchanged");
        LabeledDataset out = data;
        out.provenance.push_back(op);
        return out;
    }
    const auto k = static_cast<std::size_t>(std::llround(spec.removal_ratio * static_cast<double>(sel.size())));
    const auto picked = rng.sample_without_replacement(sel.size(), k);
    std::vector<char> removed(data.size(), 0);
    for (auto p : picked) removed[sel[p]] = 1;
    std::vector<std::size_t> keep;
    keep.reserve(data.size() - k);
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (!removed[i]) keep.push_back(i);
    }
    LabeledDataset out = data.select(keep);
    op["removed"] = k;
    out.provenance.push_back(op);
    return out;
}

UnlabeledDataset coverage_filter(const UnlabeledDataset& data, std::size_t dim, double keep_fraction) {
    const auto keep = coverage_indices(data, dim, keep_fraction);
    auto out = data.select(keep);
    out.provenance.push_back({{"op", "coverage"}, {"dim", dim}, {"keep_fraction", keep_fraction}});
    return out;
}

LabeledDataset coverage_filter(const LabeledDataset& data, std::size_t dim, double keep_fraction) {
    const auto keep = coverage_indices(data, dim, keep_fraction);
    auto out = data.select(keep);
    out.provenance.push_back({{"op", "coverage"}, {"dim", dim}, {"keep_fraction", keep_fraction}});
    return out;
}

std::size_t subsample_count(std::size_t n, double fraction) {
    const double k = std::ceil(fraction * static_cast<double>(n) - 1e-9);
    return std::min(n, static_cast<std::size_t>(std::max(0.0, k)));
}

LabeledDataset subsample(const LabeledDataset& data, double fraction, Rng rng) {
    Json op{{"op", "subsample"}, {"fraction", fraction}, {"rng", rng_json(rng)}};
    const auto idx = subsample_indices(data, fraction, rng);
    auto out = data.select(idx);
    out.provenance.push_back(op);
    return out;
}

UnlabeledDataset subsample(const UnlabeledDataset& data, double fraction, Rng rng) {
    Json op{{"op", "subsample"}, {"fraction", fraction}, {"rng", rng_json(rng)}};
    const auto idx = subsample_indices(data, fraction, rng);
    auto out = data.select(idx);
    out.provenance.push_back(op);
    return out;
}

UnlabeledDataset strip_labels(const LabeledDataset& data) {
    UnlabeledDataset u;
    u.env = data.env;
    u.tier = data.tier;
    u.states = data.states;
    u.actions = data.actions;
    u.provenance = data.provenance;
    u.provenance.push_back({{"op", "strip"}});
    return u;
}

AnyDataset replay_provenance(const Json& provenance) {
    if (!provenance.is_array() || provenance.empty()) {
        throw DatasetError("provenance record is empty");
    }
    const auto& first = provenance.front();
    if (first.at("op") != "generate") {
        throw DatasetError("provenance must start with a generate step");
    }
    AnyDataset cur = generate_dataset(env_spec(first.at("env").get<std::string>()),
                                      tier_from_string(first.at("tier").get<std::string>()),
                                      first.at("n").get<std::size_t>(), rng_from_json(first.at("rng")));
    for (std::size_t i = 1; i < provenance.size(); ++i) {
        const auto& op = provenance[i];
        const auto name = op.at("op").get<std::string>();
        if (name == "subsample") {
            const double f = op.at("fraction").get<double>();
            const Rng r = rng_from_json(op.at("rng"));
            cur = std::visit([&](const auto& d) -> AnyDataset { return subsample(d, f, r); }, cur);
        } else if (name == "coverage") {
            const auto dim = op.at("dim").get<std::size_t>();
            const double f = op.at("keep_fraction").get<double>();
            cur = std::visit([&](const auto& d) -> AnyDataset { return coverage_filter(d, dim, f); }, cur);
        } else if (name == "carve") {
            auto* d = std::get_if<LabeledDataset>(&cur);
            if (!d) throw DatasetError("provenance: carve applied to an unlabeled dataset");
            cur = carve_ood(*d, carve_spec_from_json(op.at("spec")), rng_from_json(op.at("rng")));
        } else if (name == "strip") {
            auto* d = std::get_if<LabeledDataset>(&cur);
            if (!d) throw DatasetError("provenance: strip applied to an unlabeled dataset");
            cur = strip_labels(*d);
        } else {
            throw DatasetError("provenance: unknown operation '" + name + "'");
        }
    }
    return cur;
}

std::string encode_ods(const AnyDataset& any) {
    Json header;
    std::string body;
    std::visit(
        [&](const auto& d) {
            using D = std::decay_t<decltype(d)>;
            constexpr bool labeled = std::is_same_v<D, LabeledDataset>;
            header = Json{{"format", "ods"},
                          {"version", 1},
                          {"kind", labeled ? "labeled" : "unlabeled"},
                          {"env", d.env},
                          {"tier", to_string(d.tier)},
                          {"state_dim", d.state_dim()},
                          {"action_dim", d.action_dim()},
                          {"count", d.size()},
                          {"provenance", d.provenance}};
            const std::size_t row = labeled ? 2 * d.state_dim() + d.action_dim() + 2 : d.state_dim() + d.action_dim();
            body.reserve(row * d.size() * 8);
            for (Eigen::Index i = 0; i < d.states.cols(); ++i) {
                for (Eigen::Index r = 0; r < d.states.rows(); ++r) binio::put_f64(body, d.states(r, i));
                for (Eigen::Index r = 0; r < d.actions.rows(); ++r) binio::put_f64(body, d.actions(r, i));
                if constexpr (labeled) {
                    binio::put_f64(body, d.rewards(i));
                    for (Eigen::Index r = 0; r < d.next_states.rows(); ++r) binio::put_f64(body, d.next_states(r, i));
                    binio::put_f64(body, d.dones[static_cast<std::size_t>(i)] ? 1.0 : 0.0);
                }
            }
        },
        any);
    const std::string h = header.dump();
    return "ODS1 " + std::to_string(h.size()) + "\n" + h + body;
}

AnyDataset decode_ods(const std::string& bytes) {
    const auto nl = bytes.find('\n');
    if (nl == std::string::npos || bytes.compare(0, 5, "ODS1 ") != 0) {
        throw DatasetError("not an .ods file (bad magic)");
    }
    const auto header_len = std::stoull(bytes.substr(5, nl - 5));
    if (bytes.size() < nl + 1 + header_len) {
        throw DatasetError(".ods header truncated");
    }
    const Json h = Json::parse(bytes.substr(nl + 1, header_len));
    if (h.at("format") != "ods" || h.at("version") != 1) {
        throw DatasetError("unsupported .ods header");
    }
    const bool labeled = h.at("kind") == "labeled";
    const auto sd = h.at("state_dim").get<std::size_t>();
    const auto ad = h.at("action_dim").get<std::size_t>();
    const auto n = h.at("count").get<std::size_t>();
    const std::size_t row = labeled ? 2 * sd + ad + 2 : sd + ad;
    std::size_t pos = nl + 1 + header_len;
    if (bytes.size() != pos + row * n * 8) {
        throw DatasetError(".ods body has " + std::to_string(bytes.size() - pos) + " bytes, expected " +
                           std::to_string(row * n * 8));
    }
    auto next = [&]() {
        const double x = binio::get_f64(bytes.data() + pos);
        pos += 8;
        return x;
    };
    const auto cols = static_cast<Eigen::Index>(n);
    Mat states(static_cast<Eigen::Index>(sd), cols);
    Mat actions(static_cast<Eigen::Index>(ad), cols);
    if (labeled) {
        LabeledDataset d;
        d.env = h.at("env").get<std::string>();
        d.tier = tier_from_string(h.at("tier").get<std::string>());
        d.provenance = h.at("provenance");
        d.next_states.resize(static_cast<Eigen::Index>(sd), cols);
        d.rewards.resize(cols);
        d.dones.resize(n);
        for (Eigen::Index i = 0; i < cols; ++i) {
            for (std::size_t r = 0; r < sd; ++r) states(static_cast<Eigen::Index>(r), i) = next();
            for (std::size_t r = 0; r < ad; ++r) actions(static_cast<Eigen::Index>(r), i) = next();
            d.rewards(i) = next();
            for (std::size_t r = 0; r < sd; ++r) d.next_states(static_cast<Eigen::Index>(r), i) = next();
            d.dones[static_cast<std::size_t>(i)] = next() != 0.0 ? 1 : 0;
        }
        d.states = std::move(states);
        d.actions = std::move(actions);
        d.validate();
        return d;
    }
    UnlabeledDataset d;
    d.env = h.at("env").get<std::string>();
    d.tier = tier_from_string(h.at("tier").get<std::string>());
    d.provenance = h.at("provenance");
    for (Eigen::Index i = 0; i < cols; ++i) {
        for (std::size_t r = 0; r < sd; ++r) states(static_cast<Eigen::Index>(r), i) = next();
        for (std::size_t r = 0; r < ad; ++r) actions(static_cast<Eigen::Index>(r), i) = next();
    }
    d.states = std::move(states);
    d.actions = std::move(actions);
    d.validate();
    return d;
}

void write_ods(const std::filesystem::path& path, const AnyDataset& data) {
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw DatasetError("cannot open '" + path.string() + "' for writing");
    }
    const auto bytes = encode_ods(data);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

AnyDataset read_ods(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw DatasetError("cannot open '" + path.string() + "'");
    }
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return decode_ods(bytes);
}

LabeledDataset read_labeled(const std::filesystem::path& path) {
    auto any = read_ods(path);
    if (auto* d = std::get_if<LabeledDataset>(&any)) return std::move(*d);
    throw DatasetError("'" + path.string() + "' holds an unlabeled dataset, expected labeled");
}

UnlabeledDataset read_unlabeled(const std::filesystem::path& path) {
    auto any = read_ods(path);
    if (auto* d = std::get_if<UnlabeledDataset>(&any)) return std::move(*d);
    if (auto* d = std::get_if<LabeledDataset>(&any)) return strip_labels(*d);
    throw InternalError("unreachable");
}

std::vector<std::string> state_histograms_csv(const Mat& states, std::size_t bins) {
    std::vector<std::string> out;
    for (Eigen::Index dim = 0; dim < states.rows(); ++dim) {
        std::vector<double> v(static_cast<std::size_t>(states.cols()));
        for (Eigen::Index i = 0; i < states.cols(); ++i) v[static_cast<std::size_t>(i)] = states(dim, i);
        double mn = 0.0;
        double width = 0.0;
        const auto counts = histogram(v, bins, &mn, &width);
        std::string csv = "dim,bin,lo,hi,count,density\n";
        char line[256];
        for (std::size_t b = 0; b < bins; ++b) {
            const double lo = mn + width * static_cast<double>(b);
            const double hi = mn + width * static_cast<double>(b + 1);
            const double density = width > 0.0 ? static_cast<double>(counts[b]) / (static_cast<double>(v.size()) * width)
                                                : 0.0;
            std::snprintf(line, sizeof line, "%lld,%zu,%.17g,%.17g,%zu,%.17g\n", static_cast<long long>(dim), b, lo,
                          hi, counts[b], density);
            csv += line;
        }
        out.push_back(std::move(csv));
    }
    return out;
}

}  // namespace ludor
