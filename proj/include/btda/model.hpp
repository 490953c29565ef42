#pragma once

#include <vector>

#include "btda/types.hpp"

namespace btda {

enum class ModelKind { LogisticRegression, Mlp };
enum class Activation { Gelu };

/// Parameter layout (flat, column-major per block):
///   LogisticRegression: [vec(W) (C x d), b (C)]
///   Mlp:                [vec(W1) (H x d), b1 (H), vec(W2) (C x H), b2 (C)]
struct ModelSpec {
    ModelKind kind = ModelKind::LogisticRegression;
    Index input_dim = 0;
    Index hidden_dim = 0;  // 0 for logistic regression
    Index num_classes = 2;
    Activation activation = Activation::Gelu;
    double l2_coefficient = 0.0;

    Index param_count() const;
    void validate() const;
    bool operator==(const ModelSpec&) const = default;
};

struct ParamVector {
    Vector values;
    ModelSpec spec;
};

/// Training set with per-sample loss weights; weight 0 encodes removal of a
/// sample while keeping its slot in the shuffle. Weights are restricted to
/// {0, 1} so leave-one-out semantics stay unambiguous.
struct WeightedDataset {
    Matrix features;          // N x d, one row per sample
    std::vector<int> labels;  // each in [0, num_classes)
    Vector loss_weights;

    Index size() const { return features.rows(); }
    double effective_count() const { return loss_weights.sum(); }
    Sample sample(Index i) const;
    void validate(Index num_classes) const;
};

/// Cross-entropy of one sample, log-sum-exp stabilized. No weights, no L2.
double sample_loss(const ParamVector& params, const Vector& x, int label);

/// Plain per-sample gradient of sample_loss; the estimators consume this.
Vector sample_gradient(const ParamVector& params, const Vector& x, int label);

/// Unweighted per-sample cross-entropy for the listed indices. loss_weights
/// scale gradient contributions during training only and are not applied here;
/// the L2 term is likewise excluded.
Vector per_sample_losses(const ParamVector& params, const WeightedDataset& data,
                         const IndexList& indices);

/// Gradient of the training objective restricted to the listed indices:
/// (sum_i w_i grad l_i) / (sum_i w_i) + l2 * theta. All-zero weights yield
/// exactly the L2 term.
Vector loss_gradient(const ParamVector& params, const WeightedDataset& data,
                     const IndexList& indices);

/// H v for the same objective as loss_gradient (L2 contributes l2 * v),
/// computed analytically forward-over-reverse.
Vector hessian_vector_product(const ParamVector& params, const WeightedDataset& data,
                              const IndexList& indices, const Vector& v);

/// Dense Hessian of the same objective. Logistic regression uses the closed
/// Kronecker form; the MLP assembles columns from hessian_vector_product.
/// Guarded at param_count <= 2000 (ParamCountTooLarge above).
Matrix explicit_hessian(const ParamVector& params, const WeightedDataset& data,
                        const IndexList& indices);

/// Full training objective: weighted mean loss + (l2/2) ||theta||^2.
double training_objective(const ParamVector& params, const WeightedDataset& data);

}  // namespace btda
