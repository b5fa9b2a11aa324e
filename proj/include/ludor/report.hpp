#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ludor/experiment.hpp"

namespace ludor {

/// Raw evaluation series: seed,step,score,teacher_score.
std::string series_csv(const EvalReport& report);

/// Score-vs-step line plot, one polyline per seed (teacher dashed).
std::string score_plot_svg(const EvalReport& report);

/// One row per report: name,env,algo,hash,seeds,ok_seeds,final_mean,final_std,teacher_final_mean,partial.
std::string family_csv(const std::vector<EvalReport>& reports);

/// Writes <out_root>/reports/<family>.csv for every family present and
/// <out_root>/reports/plots/<hash>.svg for every report. Returns the CSV paths.
std::vector<std::filesystem::path> render_report(const std::vector<EvalReport>& reports,
                                                 const std::filesystem::path& out_root);

/// Loads every runs/<hash>/report.json below `out_root`.
std::vector<EvalReport> load_reports(const std::filesystem::path& out_root);

}  // namespace ludor
