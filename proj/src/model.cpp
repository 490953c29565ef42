#include "btda/model.hpp"

#include <cmath>
#include <stdexcept>

#include "btda/errors.hpp"

namespace btda {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

double norm_cdf(double u) { return 0.5 * std::erfc(-u * kInvSqrt2); }
double norm_pdf(double u) { return kInvSqrt2Pi * std::exp(-0.5 * u * u); }

// Exact Gaussian-CDF GeLU and its first two derivatives.
double gelu(double u) { return u * norm_cdf(u); }
double gelu_d1(double u) { return norm_cdf(u) + u * norm_pdf(u); }
double gelu_d2(double u) { return norm_pdf(u) * (2.0 - u * u); }

using ConstMatMap = Eigen::Map<const Matrix>;
using ConstVecMap = Eigen::Map<const Vector>;
using MatMap = Eigen::Map<Matrix>;
using VecMap = Eigen::Map<Vector>;

struct LrViews {
    ConstMatMap w;
    ConstVecMap b;
};

LrViews lr_views(const ModelSpec& s, const double* p) {
    const Index d = s.input_dim, c = s.num_classes;
    return {ConstMatMap(p, c, d), ConstVecMap(p + c * d, c)};
}

struct MlpViews {
    ConstMatMap w1;
    ConstVecMap b1;
    ConstMatMap w2;
    ConstVecMap b2;
};

MlpViews mlp_views(const ModelSpec& s, const double* p) {
    const Index d = s.input_dim, h = s.hidden_dim, c = s.num_classes;
    return {ConstMatMap(p, h, d), ConstVecMap(p + h * d, h),
            ConstMatMap(p + h * d + h, c, h), ConstVecMap(p + h * d + h + c * h, c)};
}

struct Forward {
    Vector a;  // MLP pre-activations
    Vector h;  // MLP hidden activations
    Vector p;  // softmax probabilities
    double loss = 0.0;
};

Forward run_forward(const ModelSpec& spec, const double* theta, const Vector& x,
                    int label) {
    Forward f;
    Vector s;
    if (spec.kind == ModelKind::LogisticRegression) {
        const auto v = lr_views(spec, theta);
        s = v.w * x + v.b;
    } else {
        const auto v = mlp_views(spec, theta);
        f.a = v.w1 * x + v.b1;
        f.h = f.a.unaryExpr([](double u) { return gelu(u); });
        s = v.w2 * f.h + v.b2;
    }
    const double m = s.maxCoeff();
    const Vector e = (s.array() - m).exp();
    const double z = e.sum();
    f.p = e / z;
    f.loss = std::log(z) + m - s(label);
    if (!std::isfinite(f.loss) || !f.p.allFinite()) {
        throw NonFiniteLoss("non-finite loss (diverged parameters upstream?)");
    }
    return f;
}

// acc += weight * grad l(x, label); no L2 term here.
void add_sample_gradient(const ModelSpec& spec, const double* theta, const Vector& x,
                         int label, double weight, Vector& acc) {
    const Forward f = run_forward(spec, theta, x, label);
    Vector ds = f.p;
    ds(label) -= 1.0;

    const Index d = spec.input_dim, c = spec.num_classes;
    if (spec.kind == ModelKind::LogisticRegression) {
        MatMap gw(acc.data(), c, d);
        VecMap gb(acc.data() + c * d, c);
        gw.noalias() += weight * ds * x.transpose();
        gb += weight * ds;
        return;
    }
    const Index h = spec.hidden_dim;
    const auto v = mlp_views(spec, theta);
    MatMap gw1(acc.data(), h, d);
    VecMap gb1(acc.data() + h * d, h);
    MatMap gw2(acc.data() + h * d + h, c, h);
    VecMap gb2(acc.data() + h * d + h + c * h, c);

    gw2.noalias() += weight * ds * f.h.transpose();
    gb2 += weight * ds;
    const Vector dh = v.w2.transpose() * ds;
    const Vector da = dh.cwiseProduct(f.a.unaryExpr([](double u) { return gelu_d1(u); }));
    gw1.noalias() += weight * da * x.transpose();
    gb1 += weight * da;
}

// acc += weight * H_sample v, forward-over-reverse; no L2 term here.
void add_sample_hvp(const ModelSpec& spec, const double* theta, const Vector& x,
                    int label, double weight, const Vector& vvec, Vector& acc) {
    const Forward f = run_forward(spec, theta, x, label);
    const Index d = spec.input_dim, c = spec.num_classes;

    if (spec.kind == ModelKind::LogisticRegression) {
        const auto tv = lr_views(spec, vvec.data());
        const Vector s_dot = tv.w * x + tv.b;
        const Vector dp = f.p.cwiseProduct(s_dot) - f.p * f.p.dot(s_dot);
        MatMap hw(acc.data(), c, d);
        VecMap hb(acc.data() + c * d, c);
        hw.noalias() += weight * dp * x.transpose();
        hb += weight * dp;
        return;
    }

    const Index h = spec.hidden_dim;
    const auto v = mlp_views(spec, theta);
    const auto tv = mlp_views(spec, vvec.data());

    const Vector g1 = f.a.unaryExpr([](double u) { return gelu_d1(u); });
    const Vector g2 = f.a.unaryExpr([](double u) { return gelu_d2(u); });

    // Forward tangents.
    const Vector a_dot = tv.w1 * x + tv.b1;
    const Vector h_dot = g1.cwiseProduct(a_dot);
    const Vector s_dot = tv.w2 * f.h + v.w2 * h_dot + tv.b2;
    const Vector dp = f.p.cwiseProduct(s_dot) - f.p * f.p.dot(s_dot);

    // Reverse pass with tangents.
    Vector ds = f.p;
    ds(label) -= 1.0;
    const Vector dh = v.w2.transpose() * ds;
    const Vector dh_dot = tv.w2.transpose() * ds + v.w2.transpose() * dp;
    const Vector da_dot =
        g2.cwiseProduct(a_dot).cwiseProduct(dh) + g1.cwiseProduct(dh_dot);

    MatMap hw1(acc.data(), h, d);
    VecMap hb1(acc.data() + h * d, h);
    MatMap hw2(acc.data() + h * d + h, c, h);
    VecMap hb2(acc.data() + h * d + h + c * h, c);

    hw2.noalias() += weight * (dp * f.h.transpose() + ds * h_dot.transpose());
    hb2 += weight * dp;
    hw1.noalias() += weight * da_dot * x.transpose();
    hb1 += weight * da_dot;
}

void check_indices(const WeightedDataset& data, const IndexList& indices) {
    for (Index i : indices) {
        if (i < 0 || i >= data.size()) {
            throw std::out_of_range("dataset index out of range");
        }
    }
}

void check_params(const ParamVector& params) {
    params.spec.validate();
    if (params.values.size() != params.spec.param_count()) {
        throw std::invalid_argument("ParamVector length does not match spec");
    }
    if (!params.values.allFinite()) {
        throw NonFiniteLoss("ParamVector contains non-finite entries");
    }
}

}  // namespace

Index ModelSpec::param_count() const {
    if (kind == ModelKind::LogisticRegression) {
        return input_dim * num_classes + num_classes;
    }
    return input_dim * hidden_dim + hidden_dim + hidden_dim * num_classes + num_classes;
}

void ModelSpec::validate() const {
    if (input_dim < 1) throw std::invalid_argument("ModelSpec: input_dim must be >= 1");
    if (num_classes < 2) throw std::invalid_argument("ModelSpec: num_classes must be >= 2");
    if (l2_coefficient < 0.0) throw std::invalid_argument("ModelSpec: l2 must be >= 0");
    if (kind == ModelKind::LogisticRegression && hidden_dim != 0) {
        throw std::invalid_argument("ModelSpec: logistic regression has hidden_dim 0");
    }
    if (kind == ModelKind::Mlp && hidden_dim < 1) {
        throw std::invalid_argument("ModelSpec: MLP needs hidden_dim >= 1");
    }
}

Sample WeightedDataset::sample(Index i) const {
    return {features.row(i).transpose(), labels[static_cast<std::size_t>(i)]};
}

void WeightedDataset::validate(Index num_classes) const {
    const Index n = size();
    if (static_cast<Index>(labels.size()) != n || loss_weights.size() != n) {
        throw std::invalid_argument("WeightedDataset: field sizes disagree");
    }
    if (!features.allFinite()) {
        throw std::invalid_argument("WeightedDataset: non-finite features");
    }
    for (int y : labels) {
        if (y < 0 || y >= num_classes) {
            throw std::invalid_argument("WeightedDataset: label out of range");
        }
    }
    for (Index i = 0; i < n; ++i) {
        const double w = loss_weights(i);
        if (w != 0.0 && w != 1.0) {
            throw std::invalid_argument("WeightedDataset: loss weights must be 0 or 1");
        }
    }
    if (loss_weights.sum() < 1.0) {
        throw std::invalid_argument("WeightedDataset: effective training set is empty");
    }
}

double sample_loss(const ParamVector& params, const Vector& x, int label) {
    check_params(params);
    return run_forward(params.spec, params.values.data(), x, label).loss;
}

Vector sample_gradient(const ParamVector& params, const Vector& x, int label) {
    check_params(params);
    Vector g = Vector::Zero(params.spec.param_count());
    add_sample_gradient(params.spec, params.values.data(), x, label, 1.0, g);
    return g;
}

Vector per_sample_losses(const ParamVector& params, const WeightedDataset& data,
                         const IndexList& indices) {
    check_params(params);
    check_indices(data, indices);
    Vector out(static_cast<Index>(indices.size()));
    for (std::size_t k = 0; k < indices.size(); ++k) {
        const Sample s = data.sample(indices[k]);
        out(static_cast<Index>(k)) =
            run_forward(params.spec, params.values.data(), s.features, s.label).loss;
    }
    return out;
}

Vector loss_gradient(const ParamVector& params, const WeightedDataset& data,
                     const IndexList& indices) {
    check_params(params);
    check_indices(data, indices);
    Vector g = Vector::Zero(params.spec.param_count());
    double weight_sum = 0.0;
    for (Index i : indices) {
        const double w = data.loss_weights(i);
        if (w == 0.0) continue;
        const Sample s = data.sample(i);
        add_sample_gradient(params.spec, params.values.data(), s.features, s.label, w, g);
        weight_sum += w;
    }
    if (weight_sum > 0.0) g /= weight_sum;
    g += params.spec.l2_coefficient * params.values;
    return g;
}

Vector hessian_vector_product(const ParamVector& params, const WeightedDataset& data,
                              const IndexList& indices, const Vector& v) {
    check_params(params);
    check_indices(data, indices);
    if (v.size() != params.spec.param_count()) {
        throw std::invalid_argument("hessian_vector_product: v has wrong length");
    }
    Vector hv = Vector::Zero(v.size());
    double weight_sum = 0.0;
    for (Index i : indices) {
        const double w = data.loss_weights(i);
        if (w == 0.0) continue;
        const Sample s = data.sample(i);
        add_sample_hvp(params.spec, params.values.data(), s.features, s.label, w, v, hv);
        weight_sum += w;
    }
    if (weight_sum > 0.0) hv /= weight_sum;
    hv += params.spec.l2_coefficient * v;
    return hv;
}

Matrix explicit_hessian(const ParamVector& params, const WeightedDataset& data,
                        const IndexList& indices) {
    check_params(params);
    check_indices(data, indices);
    const Index p = params.spec.param_count();
    if (p > 2000) {
        throw ParamCountTooLarge("explicit_hessian: param_count exceeds 2000");
    }

    if (params.spec.kind == ModelKind::LogisticRegression) {
        // Closed form: sum_i (w_i / W) kron(xt_i xt_i^T, S_i) + l2 I, with
        // xt = [x; 1] and S = diag(p) - p p^T. Block (k1, k2) sits at
        // (k1 C, k2 C) under the [vec(W), b] layout.
        const Index d = params.spec.input_dim, c = params.spec.num_classes;
        Matrix h = Matrix::Zero(p, p);
        double weight_sum = 0.0;
        for (Index i : indices) {
            const double w = data.loss_weights(i);
            if (w == 0.0) continue;
            const Sample s = data.sample(i);
            const Forward f = run_forward(params.spec, params.values.data(), s.features,
                                          s.label);
            const Matrix smat =
                Matrix(f.p.asDiagonal()) - f.p * f.p.transpose();
            Vector xt(d + 1);
            xt << s.features, 1.0;
            for (Index k1 = 0; k1 <= d; ++k1) {
                for (Index k2 = 0; k2 <= d; ++k2) {
                    h.block(k1 * c, k2 * c, c, c) += (w * xt(k1) * xt(k2)) * smat;
                }
            }
            weight_sum += w;
        }
        if (weight_sum > 0.0) h /= weight_sum;
        h += params.spec.l2_coefficient * Matrix::Identity(p, p);
        return h;
    }

    // MLP: column k is hessian_vector_product with v = e_k.
    Matrix h(p, p);
    Vector e = Vector::Zero(p);
    for (Index k = 0; k < p; ++k) {
        e(k) = 1.0;
        h.col(k) = hessian_vector_product(params, data, indices, e);
        e(k) = 0.0;
    }
    return h;
}

double training_objective(const ParamVector& params, const WeightedDataset& data) {
    check_params(params);
    double loss_sum = 0.0;
    double weight_sum = 0.0;
    for (Index i = 0; i < data.size(); ++i) {
        const double w = data.loss_weights(i);
        if (w == 0.0) continue;
        const Sample s = data.sample(i);
        loss_sum += w * run_forward(params.spec, params.values.data(), s.features,
                                    s.label).loss;
        weight_sum += w;
    }
    const double mean_loss = weight_sum > 0.0 ? loss_sum / weight_sum : 0.0;
    return mean_loss + 0.5 * params.spec.l2_coefficient * params.values.squaredNorm();
}

}  // namespace btda
