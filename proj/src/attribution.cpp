#include "btda/attribution.hpp"

#include <cmath>
#include <iostream>
#include <map>
#include <string>

#include "btda/errors.hpp"
#include "btda/linalg.hpp"

namespace btda {

namespace {

std::vector<Index> canonical_order(const PosteriorSampleSet& set) {
    return canonical_positions(set);
}

Vector plain_gradient(const ParamVector& params, const Sample& s) {
    return sample_gradient(params, s.features, s.label);
}

}  // namespace

const char* method_name(Method m) {
    switch (m) {
        case Method::Loo: return "loo";
        case Method::Ats: return "ats";
        case Method::If: return "if";
        case Method::GradDot: return "gd";
        case Method::GradCos: return "gc";
        case Method::TracIn: return "tracin";
    }
    return "?";
}

Method method_from_name(const std::string& name) {
    for (Method m : all_methods()) {
        if (name == method_name(m)) return m;
    }
    throw ConfigError("unknown method name: " + name);
}

const std::vector<Method>& all_methods() {
    static const std::vector<Method> methods = {Method::Loo,     Method::Ats,
                                                Method::If,      Method::GradDot,
                                                Method::GradCos, Method::TracIn};
    return methods;
}

LossDifferenceMatrix loo_matrix(const PosteriorSampleSet& original,
                                const PosteriorSampleSet& counterfactual,
                                const Sample& test_point, Index train_index,
                                Index test_index) {
    const auto pairs = matched_pairs(original, counterfactual);  // validates matching
    const Index t = static_cast<Index>(pairs.size());

    Vector removed_losses(t), original_losses(t);
    for (Index k = 0; k < t; ++k) {
        const auto& pair = pairs[static_cast<std::size_t>(k)];
        const auto& cf = counterfactual.samples[static_cast<std::size_t>(pair.counterfactual_pos)];
        const auto& orig = original.samples[static_cast<std::size_t>(pair.original_pos)];
        try {
            removed_losses(k) = sample_loss(cf.params, test_point.features, test_point.label);
            original_losses(k) = sample_loss(orig.params, test_point.features, test_point.label);
        } catch (const NonFiniteLoss& e) {
            throw NonFiniteLoss("loo_matrix: j=" + std::to_string(train_index) +
                                " sample t=" + std::to_string(k) + ": " + e.what());
        }
    }

    LossDifferenceMatrix out;
    out.train_index = train_index;
    out.test_index = test_index;
    out.values = removed_losses.replicate(1, t) -
                 original_losses.transpose().replicate(t, 1);
    return out;
}

EstimatorScoreSamples ats_scores(const PosteriorSampleSet& original,
                                 const WeightedDataset& data, Index j,
                                 const Sample& test_point, const TrainConfig& config,
                                 Index test_index) {
    const auto order = canonical_order(original);
    EstimatorScoreSamples out{Method::Ats, j, test_index,
                              Vector(static_cast<Index>(order.size())), {}};
    for (std::size_t k = 0; k < order.size(); ++k) {
        const auto& theta = original.samples[static_cast<std::size_t>(order[k])].params;
        const ParamVector stepped = ats_step(theta, data, j, config);
        out.samples(static_cast<Index>(k)) =
            sample_loss(stepped, test_point.features, test_point.label) -
            sample_loss(theta, test_point.features, test_point.label);
    }
    return out;
}

double if_score_single(const Matrix& hessian, double damping, const Vector& g_train,
                       const Vector& g_test) {
    const Matrix damped =
        hessian + damping * Matrix::Identity(hessian.rows(), hessian.cols());
    return -g_test.dot(solve_spd(damped, g_train));
}

EstimatorScoreSamples if_scores(const PosteriorSampleSet& original,
                                const WeightedDataset& data, Index j,
                                const Sample& test_point, const IfOptions& options,
                                Index test_index) {
    const auto order = canonical_order(original);
    const Sample train_point = data.sample(j);
    const IndexList everything = all_indices(data.size());

    EstimatorScoreSamples out{Method::If, j, test_index,
                              Vector(static_cast<Index>(order.size())), {}};
    const bool use_cg = options.solver == IfOptions::Solver::Cg;
    if (use_cg) out.cg_converged.assign(order.size(), true);

    for (std::size_t k = 0; k < order.size(); ++k) {
        const auto& theta = original.samples[static_cast<std::size_t>(order[k])].params;
        ParamVector hessian_params = theta;
        if (!options.include_l2_curvature) hessian_params.spec.l2_coefficient = 0.0;

        const Vector g_train = plain_gradient(theta, train_point);
        const Vector g_test = plain_gradient(theta, test_point);

        if (!use_cg && theta.spec.param_count() <= 2000) {
            const Matrix h = explicit_hessian(hessian_params, data, everything);
            try {
                out.samples(static_cast<Index>(k)) =
                    if_score_single(h, options.damping, g_train, g_test);
            } catch (const NotPositiveDefinite& e) {
                throw NotPositiveDefinite(std::string(e.what()) +
                                          " (raise IfOptions::damping)");
            }
        } else {
            const double damping = options.damping;
            const LinearOperator op = [&](const Vector& v) -> Vector {
                return hessian_vector_product(hessian_params, data, everything, v) +
                       damping * v;
            };
            const Index max_iter = options.cg_max_iter > 0
                                       ? options.cg_max_iter
                                       : 10 * theta.spec.param_count();
            const CgResult r = conjugate_gradient(op, g_train, options.cg_tol, max_iter);
            if (out.cg_converged.empty()) out.cg_converged.assign(order.size(), true);
            out.cg_converged[k] = r.converged;
            out.samples(static_cast<Index>(k)) = -g_test.dot(r.x);
        }
    }
    return out;
}

EstimatorScoreSamples grad_dot_scores(const PosteriorSampleSet& original,
                                      const WeightedDataset& data, Index j,
                                      const Sample& test_point, Index test_index) {
    const auto order = canonical_order(original);
    const Sample train_point = data.sample(j);
    EstimatorScoreSamples out{Method::GradDot, j, test_index,
                              Vector(static_cast<Index>(order.size())), {}};
    for (std::size_t k = 0; k < order.size(); ++k) {
        const auto& theta = original.samples[static_cast<std::size_t>(order[k])].params;
        out.samples(static_cast<Index>(k)) =
            plain_gradient(theta, train_point).dot(plain_gradient(theta, test_point));
    }
    return out;
}

EstimatorScoreSamples grad_cos_scores(const PosteriorSampleSet& original,
                                      const WeightedDataset& data, Index j,
                                      const Sample& test_point, Index test_index) {
    const auto order = canonical_order(original);
    const Sample train_point = data.sample(j);
    EstimatorScoreSamples out{Method::GradCos, j, test_index,
                              Vector(static_cast<Index>(order.size())), {}};
    for (std::size_t k = 0; k < order.size(); ++k) {
        const auto& theta = original.samples[static_cast<std::size_t>(order[k])].params;
        const Vector gj = plain_gradient(theta, train_point);
        const Vector gz = plain_gradient(theta, test_point);
        const double nj = gj.norm(), nz = gz.norm();
        if (nj <= 1e-12 || nz <= 1e-12) {
            std::cerr << "[btda] grad_cos: near-zero gradient for pair (" << j << ", "
                      << test_index << "); score set to 0\n";
            out.samples(static_cast<Index>(k)) = 0.0;
        } else {
            out.samples(static_cast<Index>(k)) = gj.dot(gz) / (nj * nz);
        }
    }
    return out;
}

EstimatorScoreSamples tracin_scores(const PosteriorSampleSet& original,
                                    const WeightedDataset& data, Index j,
                                    const Sample& test_point, Index test_index) {
    const Sample train_point = data.sample(j);

    std::map<Index, std::vector<const ParamVector*>> by_member;
    for (const auto& s : original.samples) by_member[s.member_id].push_back(&s.params);

    EstimatorScoreSamples out{Method::TracIn, j, test_index,
                              Vector(static_cast<Index>(by_member.size())), {}};
    Index m = 0;
    for (const auto& [member, checkpoints] : by_member) {
        if (checkpoints.empty()) throw std::invalid_argument("tracin: empty member");
        double acc = 0.0;
        for (const ParamVector* theta : checkpoints) {
            acc += plain_gradient(*theta, train_point).dot(plain_gradient(*theta, test_point));
        }
        out.samples(m++) = acc / static_cast<double>(checkpoints.size());
    }
    return out;
}

}  // namespace btda
