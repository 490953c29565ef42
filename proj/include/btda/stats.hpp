#pragma once

#include <vector>

#include "btda/attribution.hpp"
#include "btda/types.hpp"

namespace btda {

/// Per train-test pair summary. For LOO the sample count is T^2 (all cross
/// pairs) and sample_variance = variance * T^2 / (T^2 - 1); for per-sample
/// estimators it is the plain sample count. Pairs with too few samples for a
/// variance are flagged degenerate instead of erroring (t/p become NaN).
struct PairStatistics {
    Method method = Method::Loo;
    Index train_index = 0;
    Index test_index = 0;
    double mean = 0.0;
    double variance = 0.0;
    double sample_variance = 0.0;
    double t_stat = 0.0;
    double p_value = 1.0;
    Index n_samples = 0;
    bool degenerate = false;
};

/// Mean of the T matched (diagonal) differences.
double loo_mean(const LossDifferenceMatrix& matrix);

/// Mean squared deviation from loo_mean over all T^2 cross pairs; the
/// corrected form divides by T^2 - 1.
double loo_variance(const LossDifferenceMatrix& matrix, bool sample_corrected);

struct Moments {
    double mean = 0.0;
    double variance = 0.0;         // population (1/n)
    double sample_variance = 0.0;  // corrected (1/(n-1))
};

Moments estimator_moments(const EstimatorScoreSamples& samples);

struct TestResult {
    double t_stat = 0.0;
    double p_value = 1.0;
};

/// t = mean / sqrt(sample_variance / n_effective) against H0: tau = 0, with
/// p from the two-sided Student-t tail at dof = n_effective - 1. Zero variance
/// maps to t = 0, p = 1 when the mean is also zero and to p = 0 otherwise.
TestResult significance_test(double mean, double sample_variance, Index n_effective);

double pearson(const Vector& xs, const Vector& ys);

/// Pearson correlation of average-ranked values; ties get the mean of their
/// rank range.
double spearman(const Vector& xs, const Vector& ys);
Vector average_ranks(const Vector& xs);

PairStatistics loo_pair_statistics(const LossDifferenceMatrix& matrix);
PairStatistics estimator_pair_statistics(const EstimatorScoreSamples& samples);

enum class PairStatisticKind { Mean, StdDev, PValue };
const char* pair_statistic_name(PairStatisticKind kind);

/// Method x method Pearson/Spearman matrices over one per-pair statistic.
/// Pairs with an undefined value for any method are dropped listwise
/// (count reported); cells whose inputs have zero variance are NaN.
struct CorrelationReport {
    PairStatisticKind statistic = PairStatisticKind::Mean;
    std::vector<Method> methods;
    Matrix pearson_matrix;
    Matrix spearman_matrix;
    Index n_pairs = 0;
    Index n_dropped = 0;
};

CorrelationReport build_correlation_report(const std::vector<PairStatistics>& stats,
                                           PairStatisticKind kind);

struct PValueHistogram {
    std::vector<Index> counts;  // equal-width bins over [0,1], last bin right-inclusive
    Index n = 0;
    double low_noise_fraction = 0.0;  // |{p < 0.05}| / n
};

PValueHistogram p_value_histogram(const Vector& p_values, Index bins);

}  // namespace btda
