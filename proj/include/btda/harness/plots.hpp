#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "btda/harness/experiment.hpp"

namespace btda::harness {

/// Self-contained static SVGs: hist_p_{method}.svg per method and
/// corr_{mean,std,p}.svg heat grids. Numeric values appear as text labels so
/// the plots diff cleanly. An empty method set writes nothing (warning logged).
void emit_plots(const ExperimentReport& report, const std::filesystem::path& out_dir);

/// Mean-p vs training-set-size line chart across several reports (one line per
/// method).
void emit_size_sweep_chart(
    const std::vector<std::pair<Index, std::map<Method, double>>>& mean_p_by_size,
    const std::filesystem::path& path);

}  // namespace btda::harness
