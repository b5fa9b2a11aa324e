#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "ludor/envs.hpp"

namespace ludor {

using Json = nlohmann::json;

struct Transition {
    Vec state;
    Vec action;
    double reward = 0.0;
    Vec next_state;
    bool done = false;
};

/// Offline RL data: column i of each matrix is transition i.
struct LabeledDataset {
    std::string env;
    Tier tier = Tier::medium;
    Mat states;       // [state_dim x N]
    Mat actions;      // [action_dim x N]
    Vec rewards;      // [N]
    Mat next_states;  // [state_dim x N]
    std::vector<std::uint8_t> dones;
    /// Ordered list of operations that rebuilds this dataset from scratch.
    Json provenance = Json::array();

    std::size_t size() const { return static_cast<std::size_t>(states.cols()); }
    bool empty() const { return size() == 0; }
    std::size_t state_dim() const { return static_cast<std::size_t>(states.rows()); }
    std::size_t action_dim() const { return static_cast<std::size_t>(actions.rows()); }
    Transition at(std::size_t i) const;
    LabeledDataset select(std::span<const std::size_t> indices) const;
    void validate() const;
};

/// (state, action) pairs without rewards or successors.
struct UnlabeledDataset {
    std::string env;
    Tier tier = Tier::expert;
    Mat states;
    Mat actions;
    Json provenance = Json::array();

    std::size_t size() const { return static_cast<std::size_t>(states.cols()); }
    bool empty() const { return size() == 0; }
    std::size_t state_dim() const { return static_cast<std::size_t>(states.rows()); }
    std::size_t action_dim() const { return static_cast<std::size_t>(actions.rows()); }
    UnlabeledDataset select(std::span<const std::size_t> indices) const;
    void validate() const;
};

using AnyDataset = std::variant<LabeledDataset, UnlabeledDataset>;

LabeledDataset generate_dataset(const EnvSpec& spec, Tier tier, std::size_t n_transitions, Rng rng);

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    std::size_t first_bin = 0;
    std::size_t bin_count = 0;  // bins in the run
};

/// Histogram over [min, max] with `bins` equal bins; bin i holds values with
/// floor((x - min) / width) == i (the maximum goes to the last bin).
std::vector<std::size_t> histogram(std::span<const double> values, std::size_t bins, double* min_out = nullptr,
                                   double* width_out = nullptr);
std::size_t bin_index(double x, double min, double width, std::size_t bins);

/// Shortest run of contiguous bins holding at least `mass` of the values;
/// among equally short runs the leftmost wins. A constant-valued input yields
/// [v, v] and a warning.
Interval densest_segment(std::span<const double> values, std::size_t bins, double mass);
Interval densest_segment(const LabeledDataset& data, std::size_t dim, std::size_t bins, double mass);

enum class CarveMode { densest, explicit_range };

struct CarveSpec {
    std::size_t dim = 0;
    double removal_ratio = 0.6;
    CarveMode mode = CarveMode::densest;
    std::size_t bins = 50;
    double segment_mass = 0.6;  // densest mode
    double lo = 0.0;            // explicit_range mode
    double hi = 0.0;
};

Json carve_spec_to_json(const CarveSpec& spec);
CarveSpec carve_spec_from_json(const Json& j);

/// Indices (increasing) of transitions whose state[dim] lies in the carve's
/// selection interval.
std::vector<std::size_t> carve_selection(const LabeledDataset& data, const CarveSpec& spec, Interval* interval = nullptr);

/// Deletes round(removal_ratio * |selection|) uniformly chosen transitions
/// from the selection; everything else is kept in order.
LabeledDataset carve_ood(const LabeledDataset& data, const CarveSpec& spec, Rng rng);

/// Keeps pairs whose state[dim] lies in the central quantile band of width
/// keep_fraction.
UnlabeledDataset coverage_filter(const UnlabeledDataset& data, std::size_t dim, double keep_fraction);
LabeledDataset coverage_filter(const LabeledDataset& data, std::size_t dim, double keep_fraction);

/// ceil(fraction * N) items drawn uniformly without replacement, order preserved.
LabeledDataset subsample(const LabeledDataset& data, double fraction, Rng rng);
UnlabeledDataset subsample(const UnlabeledDataset& data, double fraction, Rng rng);
std::size_t subsample_count(std::size_t n, double fraction);

UnlabeledDataset strip_labels(const LabeledDataset& data);

/// Rebuilds a dataset by re-executing its provenance record.
AnyDataset replay_provenance(const Json& provenance);

// On-disk ".ods" format: the line "ODS1 <header-bytes>\n", a JSON header of
// exactly that many bytes, then one row per item of little-endian binary64
// values. Labeled rows are state, action, reward, next_state, done (0 or 1);
// unlabeled rows are state, action.
std::string encode_ods(const AnyDataset& data);
AnyDataset decode_ods(const std::string& bytes);
void write_ods(const std::filesystem::path& path, const AnyDataset& data);
AnyDataset read_ods(const std::filesystem::path& path);
LabeledDataset read_labeled(const std::filesystem::path& path);
UnlabeledDataset read_unlabeled(const std::filesystem::path& path);

/// Per-dimension state histograms as CSV text: dim,bin,lo,hi,count,density.
std::vector<std::string> state_histograms_csv(const Mat& states, std::size_t bins);

}  // namespace ludor
