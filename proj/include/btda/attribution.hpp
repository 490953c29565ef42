#pragma once

#include <string>
#include <vector>

#include "btda/posterior.hpp"

namespace btda {

enum class Method { Loo, Ats, If, GradDot, GradCos, TracIn };

const char* method_name(Method m);
Method method_from_name(const std::string& name);
const std::vector<Method>& all_methods();

/// T x T cross-pair loss differences for one (train, test) pair:
/// values(t, t') = L(z; theta_removed^(t)) - L(z; theta^(t')). The diagonal
/// holds the matched differences.
struct LossDifferenceMatrix {
    Index train_index = 0;
    Index test_index = 0;
    Matrix values;

    Index t() const { return values.rows(); }
};

struct EstimatorScoreSamples {
    Method method = Method::GradDot;
    Index train_index = 0;
    Index test_index = 0;
    Vector samples;
    /// Per-sample CG convergence, only populated by if_scores with the CG solver.
    std::vector<bool> cg_converged;
};

LossDifferenceMatrix loo_matrix(const PosteriorSampleSet& original,
                                const PosteriorSampleSet& counterfactual,
                                const Sample& test_point, Index train_index,
                                Index test_index = 0);

/// Per posterior sample t: L(z; ats_step(theta^(t), j)) - L(z; theta^(t)).
EstimatorScoreSamples ats_scores(const PosteriorSampleSet& original,
                                 const WeightedDataset& data, Index j,
                                 const Sample& test_point, const TrainConfig& config,
                                 Index test_index = 0);

struct IfOptions {
    double damping = 0.005;
    enum class Solver { Dense, Cg } solver = Solver::Dense;
    double cg_tol = 1e-10;
    Index cg_max_iter = 0;  // 0 = 10 * param_count
    /// Hessian of the actual training objective includes the L2 curvature;
    /// set false to use the bare loss Hessian instead.
    bool include_l2_curvature = true;
};

/// Single-sample influence core: -g_test^T x with (H + damping I) x = g_train.
double if_score_single(const Matrix& hessian, double damping, const Vector& g_train,
                       const Vector& g_test);

/// Per posterior sample: influence-function score
/// -grad L(z)^T (H + damping I)^{-1} grad L(z_j), H the training-objective
/// Hessian at that sample and the gradients plain per-sample gradients.
EstimatorScoreSamples if_scores(const PosteriorSampleSet& original,
                                const WeightedDataset& data, Index j,
                                const Sample& test_point, const IfOptions& options = {},
                                Index test_index = 0);

/// Per posterior sample: <grad L(z_j), grad L(z)>.
EstimatorScoreSamples grad_dot_scores(const PosteriorSampleSet& original,
                                      const WeightedDataset& data, Index j,
                                      const Sample& test_point, Index test_index = 0);

/// Cosine of the two gradients; defined as 0 when either norm is <= 1e-12.
EstimatorScoreSamples grad_cos_scores(const PosteriorSampleSet& original,
                                      const WeightedDataset& data, Index j,
                                      const Sample& test_point, Index test_index = 0);

/// Per ensemble member: mean Grad-Dot over that member's checkpoints
/// (t_de samples).
EstimatorScoreSamples tracin_scores(const PosteriorSampleSet& original,
                                    const WeightedDataset& data, Index j,
                                    const Sample& test_point, Index test_index = 0);

}  // namespace btda
