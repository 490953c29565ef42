#pragma once

#include <map>
#include <vector>

#include "btda/harness/config.hpp"
#include "btda/stats.hpp"

namespace btda::harness {

struct RunOptions {
    bool resume = false;
    bool assume_yes = false;
    Index workers = 0;  // 0 = BTDA_WORKERS or hardware concurrency
    bool write_outputs = true;
    bool quiet = false;
};

struct MethodSummary {
    double mean_p = 0.0;
    double low_noise_fraction = 0.0;
    Index n_pairs = 0;
    Index n_degenerate = 0;
};

struct ExperimentReport {
    ExperimentConfig config;
    std::string hash;
    Index n_train = 0;
    Index n_test = 0;
    Index trainings_run = 0;
    Index trainings_reused = 0;

    /// One row per (method, train, test), ordered by (method, train, test).
    std::vector<PairStatistics> pair_stats;
    /// Raw per-sample scores per method, same ordering as pair_stats rows.
    std::map<Method, std::vector<EstimatorScoreSamples>> scores;
    std::map<Method, PValueHistogram> histograms;
    std::map<PairStatisticKind, CorrelationReport> correlations;
    std::map<Method, MethodSummary> summaries;
};

/// End-to-end run: original posterior, per-j counterfactuals (LOO), estimator
/// scores, statistics, reports. Checkpoints persist under output_dir and are
/// reused on --resume; report files are written atomically.
ExperimentReport run_experiment(const ExperimentConfig& config,
                                const RunOptions& options = {});

/// Writes pair_stats.csv, scores_{method}.csv, corr_*.{csv,json}, summary.json
/// and the plot SVGs into output_dir.
void write_report(const ExperimentReport& report);

/// Rebuilds the derived report (histograms, correlations, summaries) from an
/// existing pair_stats.csv; used by the plot subcommand.
ExperimentReport load_report(const std::filesystem::path& dir);

}  // namespace btda::harness
