#include "btda/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "btda/errors.hpp"
#include "btda/special.hpp"

namespace btda {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double extract_statistic(const PairStatistics& s, PairStatisticKind kind) {
    switch (kind) {
        case PairStatisticKind::Mean: return s.mean;
        case PairStatisticKind::StdDev:
            return s.degenerate ? kNaN : std::sqrt(s.sample_variance);
        case PairStatisticKind::PValue: return s.degenerate ? kNaN : s.p_value;
    }
    return kNaN;
}

}  // namespace

double loo_mean(const LossDifferenceMatrix& matrix) {
    if (matrix.t() < 1) throw DegenerateSampleCount("loo_mean: empty matrix");
    return matrix.values.diagonal().mean();
}

double loo_variance(const LossDifferenceMatrix& matrix, bool sample_corrected) {
    const Index t = matrix.t();
    const double n = static_cast<double>(t) * static_cast<double>(t);
    if (sample_corrected && n <= 1.0) {
        throw DegenerateSampleCount("loo_variance: T^2 <= 1 with correction");
    }
    const double mu = loo_mean(matrix);
    const double ss = (matrix.values.array() - mu).square().sum();
    return ss / (sample_corrected ? n - 1.0 : n);
}

Moments estimator_moments(const EstimatorScoreSamples& samples) {
    const Index n = samples.samples.size();
    if (n < 2) throw DegenerateSampleCount("estimator_moments: need n >= 2");
    Moments m;
    m.mean = samples.samples.mean();
    const double ss = (samples.samples.array() - m.mean).square().sum();
    m.variance = ss / static_cast<double>(n);
    m.sample_variance = ss / static_cast<double>(n - 1);
    return m;
}

TestResult significance_test(double mean, double sample_variance, Index n_effective) {
    if (n_effective < 2) throw DegenerateSampleCount("significance_test: n < 2");
    if (sample_variance < 0.0) throw DomainError("significance_test: negative variance");

    TestResult r;
    if (sample_variance == 0.0) {
        if (mean == 0.0) {
            r.t_stat = 0.0;
            r.p_value = 1.0;
        } else {
            r.t_stat = mean > 0.0 ? std::numeric_limits<double>::infinity()
                                  : -std::numeric_limits<double>::infinity();
            r.p_value = 0.0;
        }
        return r;
    }
    r.t_stat = mean / std::sqrt(sample_variance / static_cast<double>(n_effective));
    r.p_value = student_t_p_two_sided(r.t_stat, n_effective - 1);
    return r;
}

double pearson(const Vector& xs, const Vector& ys) {
    if (xs.size() != ys.size() || xs.size() < 2) {
        throw std::invalid_argument("pearson: need equal lengths >= 2");
    }
    const double mx = xs.mean(), my = ys.mean();
    const Eigen::ArrayXd dx = xs.array() - mx;
    const Eigen::ArrayXd dy = ys.array() - my;
    const double sx = std::sqrt(dx.square().sum());
    const double sy = std::sqrt(dy.square().sum());
    if (sx == 0.0 || sy == 0.0) throw ZeroVarianceInput("pearson: zero-variance input");
    double r = (dx * dy).sum() / (sx * sy);
    return std::clamp(r, -1.0, 1.0);
}

Vector average_ranks(const Vector& xs) {
    const Index n = xs.size();
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::sort(order.begin(), order.end(),
              [&](Index a, Index b) { return xs(a) < xs(b); });

    Vector ranks(n);
    Index i = 0;
    while (i < n) {
        Index j = i;
        while (j + 1 < n && xs(order[static_cast<std::size_t>(j + 1)]) ==
                                xs(order[static_cast<std::size_t>(i)])) {
            ++j;
        }
        // 1-based ranks; ties share the mean of their rank range.
        const double mean_rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (Index k = i; k <= j; ++k) {
            ranks(order[static_cast<std::size_t>(k)]) = mean_rank;
        }
        i = j + 1;
    }
    return ranks;
}

double spearman(const Vector& xs, const Vector& ys) {
    if (xs.size() != ys.size() || xs.size() < 2) {
        throw std::invalid_argument("spearman: need equal lengths >= 2");
    }
    return pearson(average_ranks(xs), average_ranks(ys));
}

PairStatistics loo_pair_statistics(const LossDifferenceMatrix& matrix) {
    PairStatistics s;
    s.method = Method::Loo;
    s.train_index = matrix.train_index;
    s.test_index = matrix.test_index;
    const Index t = matrix.t();
    s.n_samples = t * t;
    s.mean = loo_mean(matrix);
    if (s.n_samples < 2) {
        s.degenerate = true;
        s.variance = s.sample_variance = s.t_stat = s.p_value = kNaN;
        return s;
    }
    s.variance = loo_variance(matrix, false);
    s.sample_variance = loo_variance(matrix, true);
    const TestResult r = significance_test(s.mean, s.sample_variance, s.n_samples);
    s.t_stat = r.t_stat;
    s.p_value = r.p_value;
    return s;
}

PairStatistics estimator_pair_statistics(const EstimatorScoreSamples& samples) {
    PairStatistics s;
    s.method = samples.method;
    s.train_index = samples.train_index;
    s.test_index = samples.test_index;
    s.n_samples = samples.samples.size();
    if (s.n_samples < 2) {
        s.mean = s.n_samples == 1 ? samples.samples(0) : kNaN;
        s.degenerate = true;
        s.variance = s.sample_variance = s.t_stat = s.p_value = kNaN;
        return s;
    }
    const Moments m = estimator_moments(samples);
    s.mean = m.mean;
    s.variance = m.variance;
    s.sample_variance = m.sample_variance;
    const TestResult r = significance_test(s.mean, s.sample_variance, s.n_samples);
    s.t_stat = r.t_stat;
    s.p_value = r.p_value;
    return s;
}

const char* pair_statistic_name(PairStatisticKind kind) {
    switch (kind) {
        case PairStatisticKind::Mean: return "mean";
        case PairStatisticKind::StdDev: return "std";
        case PairStatisticKind::PValue: return "p";
    }
    return "?";
}

CorrelationReport build_correlation_report(const std::vector<PairStatistics>& stats,
                                           PairStatisticKind kind) {
    CorrelationReport report;
    report.statistic = kind;

    // Methods present, in canonical order; values keyed by (train, test).
    std::vector<Method> methods;
    for (Method m : all_methods()) {
        if (std::any_of(stats.begin(), stats.end(),
                        [m](const PairStatistics& s) { return s.method == m; })) {
            methods.push_back(m);
        }
    }
    report.methods = methods;
    const Index k = static_cast<Index>(methods.size());
    report.pearson_matrix = Matrix::Identity(k, k);
    report.spearman_matrix = Matrix::Identity(k, k);
    if (k == 0) return report;

    std::map<std::pair<Index, Index>, std::map<Method, double>> by_pair;
    for (const auto& s : stats) {
        by_pair[{s.train_index, s.test_index}][s.method] = extract_statistic(s, kind);
    }

    // Listwise deletion: keep pairs where every method has a finite value.
    std::vector<std::map<Method, double>> kept;
    for (const auto& [pair, values] : by_pair) {
        bool complete = values.size() == methods.size();
        for (const auto& [m, v] : values) complete = complete && std::isfinite(v);
        if (complete) kept.push_back(values);
    }
    report.n_pairs = static_cast<Index>(kept.size());
    report.n_dropped = static_cast<Index>(by_pair.size() - kept.size());

    std::vector<Vector> columns(methods.size(), Vector(report.n_pairs));
    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
        for (Index pi = 0; pi < report.n_pairs; ++pi) {
            columns[mi](pi) = kept[static_cast<std::size_t>(pi)].at(methods[mi]);
        }
    }

    for (Index a = 0; a < k; ++a) {
        for (Index b = a + 1; b < k; ++b) {
            double pr = kNaN, sr = kNaN;
            if (report.n_pairs >= 2) {
                try {
                    pr = pearson(columns[static_cast<std::size_t>(a)],
                                 columns[static_cast<std::size_t>(b)]);
                } catch (const ZeroVarianceInput&) {
                }
                try {
                    sr = spearman(columns[static_cast<std::size_t>(a)],
                                  columns[static_cast<std::size_t>(b)]);
                } catch (const ZeroVarianceInput&) {
                }
            }
            report.pearson_matrix(a, b) = report.pearson_matrix(b, a) = pr;
            report.spearman_matrix(a, b) = report.spearman_matrix(b, a) = sr;
        }
    }
    return report;
}

PValueHistogram p_value_histogram(const Vector& p_values, Index bins) {
    if (bins < 1) throw std::invalid_argument("p_value_histogram: bins must be >= 1");
    PValueHistogram h;
    h.counts.assign(static_cast<std::size_t>(bins), 0);
    h.n = p_values.size();
    Index low_noise = 0;
    for (Index i = 0; i < p_values.size(); ++i) {
        const double p = p_values(i);
        if (!(p >= 0.0 && p <= 1.0)) {
            throw DomainError("p_value_histogram: p outside [0,1]");
        }
        const Index bin = std::min<Index>(static_cast<Index>(p * static_cast<double>(bins)),
                                          bins - 1);
        ++h.counts[static_cast<std::size_t>(bin)];
        if (p < 0.05) ++low_noise;
    }
    h.low_noise_fraction =
        h.n > 0 ? static_cast<double>(low_noise) / static_cast<double>(h.n) : 0.0;
    return h;
}

}  // namespace btda
