#pragma once

#include <map>
#include <string>
#include <vector>

#include "ludor/experiment.hpp"

namespace ludor {

enum class Profile { desk, full };

/// Base spec for an env: desk profile is sized for one CPU core, full uses
/// the 120k-step / eval-every-2000 protocol.
ExperimentSpec default_spec(const std::string& env, Profile profile = Profile::desk);

struct MatrixOptions {
    std::vector<std::string> envs;  // empty: every registered env
    Profile profile = Profile::desk;
    /// key = value overrides applied to every spec after the family's own settings.
    std::map<std::string, std::string> overrides;
};

std::vector<std::string> family_names();

/// Specs of one experiment family. Specs within a family share seeds and
/// eval seeds, so datasets are paired wherever the recipes agree.
std::vector<ExperimentSpec> experiment_matrix(const std::string& family, const MatrixOptions& options = {});

}  // namespace ludor
