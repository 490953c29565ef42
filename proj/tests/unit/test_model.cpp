#include <doctest.h>

#include <cmath>
#include <limits>

#include "btda/errors.hpp"
#include "btda/model.hpp"
#include "btda/rng.hpp"

using namespace btda;

namespace {

ModelSpec lr_spec(Index d, Index c, double l2 = 0.0) {
    return {ModelKind::LogisticRegression, d, 0, c, Activation::Gelu, l2};
}

ModelSpec mlp_spec(Index d, Index h, Index c, double l2 = 0.0) {
    return {ModelKind::Mlp, d, h, c, Activation::Gelu, l2};
}

ParamVector random_params(const ModelSpec& spec, RngStream& rng, double scale = 0.8) {
    ParamVector p{Vector(spec.param_count()), spec};
    for (Index i = 0; i < p.values.size(); ++i) p.values(i) = rng.uniform(-scale, scale);
    return p;
}

WeightedDataset make_dataset(Index n, Index d, Index c, RngStream& rng) {
    WeightedDataset data;
    data.features.resize(n, d);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < d; ++j) data.features(i, j) = rng.uniform(-2.0, 2.0);
    data.labels.resize(static_cast<std::size_t>(n));
    for (auto& y : data.labels) y = static_cast<int>(rng.below(static_cast<std::uint64_t>(c)));
    data.loss_weights = Vector::Ones(n);
    return data;
}

// Second, independent loss coding path: direct probability ratio in long
// double without the max-shift trick.
double naive_cross_entropy(const ParamVector& params, const Vector& x, int label) {
    const ModelSpec& s = params.spec;
    const double* p = params.values.data();
    std::vector<long double> logits(static_cast<std::size_t>(s.num_classes), 0.0L);
    if (s.kind == ModelKind::LogisticRegression) {
        for (Index c = 0; c < s.num_classes; ++c) {
            long double acc = p[s.num_classes * s.input_dim + c];  // bias
            for (Index k = 0; k < s.input_dim; ++k) {
                acc += static_cast<long double>(p[c + s.num_classes * k]) * x(k);
            }
            logits[static_cast<std::size_t>(c)] = acc;
        }
    } else {
        const Index d = s.input_dim, h = s.hidden_dim, c = s.num_classes;
        std::vector<long double> hidden(static_cast<std::size_t>(h));
        for (Index m = 0; m < h; ++m) {
            long double a = p[h * d + m];
            for (Index k = 0; k < d; ++k) {
                a += static_cast<long double>(p[m + h * k]) * x(k);
            }
            const long double phi = 0.5L * erfcl(-a / sqrtl(2.0L));
            hidden[static_cast<std::size_t>(m)] = a * phi;
        }
        for (Index cc = 0; cc < c; ++cc) {
            long double acc = p[h * d + h + c * h + cc];
            for (Index m = 0; m < h; ++m) {
                acc += static_cast<long double>(p[h * d + h + cc + c * m]) *
                       hidden[static_cast<std::size_t>(m)];
            }
            logits[static_cast<std::size_t>(cc)] = acc;
        }
    }
    long double denom = 0.0L;
    for (long double v : logits) denom += expl(v);
    return static_cast<double>(-logl(expl(logits[static_cast<std::size_t>(label)]) / denom));
}

double objective(const ParamVector& params, const WeightedDataset& data) {
    return training_objective(params, data);
}

Vector fd_gradient(const ParamVector& params, const WeightedDataset& data, double h) {
    Vector g(params.values.size());
    ParamVector probe = params;
    for (Index k = 0; k < params.values.size(); ++k) {
        probe.values(k) = params.values(k) + h;
        const double up = objective(probe, data);
        probe.values(k) = params.values(k) - h;
        const double down = objective(probe, data);
        probe.values(k) = params.values(k);
        g(k) = (up - down) / (2.0 * h);
    }
    return g;
}

}  // namespace

TEST_CASE("param_count formulas") {
    CHECK(lr_spec(4, 3).param_count() == 4 * 3 + 3);
    CHECK(mlp_spec(2, 16, 3).param_count() == 2 * 16 + 16 + 16 * 3 + 3);
}

TEST_CASE("uniform logits give ln C per sample") {
    const ModelSpec spec = lr_spec(4, 3);
    const ParamVector zero{Vector::Zero(spec.param_count()), spec};
    WeightedDataset data;
    data.features = Matrix::Zero(2, 4);
    data.labels = {0, 2};
    data.loss_weights = Vector::Ones(2);

    const Vector losses = per_sample_losses(zero, data, {0, 1});
    CHECK(losses(0) == doctest::Approx(std::log(3.0)).epsilon(1e-12));
    CHECK(losses(1) == doctest::Approx(1.0986).epsilon(1e-3));
}

TEST_CASE("loss matches an independent log-sum-exp implementation") {
    RngStream rng(10, 0);
    for (int trial = 0; trial < 10; ++trial) {
        const ModelSpec spec =
            trial % 2 == 0 ? lr_spec(5, 4) : mlp_spec(3, 6, 3);
        const ParamVector params = random_params(spec, rng);
        const WeightedDataset data = make_dataset(1, spec.input_dim, spec.num_classes, rng);
        const double lib = sample_loss(params, data.sample(0).features, data.sample(0).label);
        const double ref = naive_cross_entropy(params, data.sample(0).features,
                                               data.sample(0).label);
        CHECK(lib == doctest::Approx(ref).epsilon(1e-12));
    }
}

TEST_CASE("per-sample losses ignore loss weights and L2") {
    RngStream rng(11, 0);
    const ModelSpec spec = lr_spec(3, 3, /*l2=*/0.5);
    const ParamVector params = random_params(spec, rng);
    WeightedDataset data = make_dataset(4, 3, 3, rng);
    const Vector before = per_sample_losses(params, data, all_indices(4));
    data.loss_weights << 0, 1, 0, 1;
    const Vector after = per_sample_losses(params, data, all_indices(4));
    CHECK((before - after).norm() == 0.0);
}

TEST_CASE("logistic regression gradient equals the closed form") {
    RngStream rng(12, 0);
    const ModelSpec spec = lr_spec(4, 3);
    const ParamVector params = random_params(spec, rng);
    const WeightedDataset data = make_dataset(1, 4, 3, rng);
    const Sample s = data.sample(0);

    // Closed form: (softmax(logits) - onehot(label)) outer [x; 1].
    const Index c = 3, d = 4;
    Vector logits(c);
    for (Index cc = 0; cc < c; ++cc) {
        logits(cc) = params.values(c * d + cc);
        for (Index k = 0; k < d; ++k) logits(cc) += params.values(cc + c * k) * s.features(k);
    }
    const Vector probs = (logits.array() - logits.maxCoeff()).exp();
    Vector ds = probs / probs.sum();
    ds(s.label) -= 1.0;
    Vector expected(spec.param_count());
    for (Index k = 0; k < d; ++k)
        for (Index cc = 0; cc < c; ++cc) expected(cc + c * k) = ds(cc) * s.features(k);
    for (Index cc = 0; cc < c; ++cc) expected(c * d + cc) = ds(cc);

    const Vector got = sample_gradient(params, s.features, s.label);
    CHECK((got - expected).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("gradient check: central finite differences over 20 random draws") {
    RngStream rng(13, 0);
    const double h = 1e-5;
    for (int trial = 0; trial < 20; ++trial) {
        const ModelSpec spec = trial % 2 == 0 ? lr_spec(4, 3, 0.01)
                                              : mlp_spec(2, 16, 3, 0.01);  // 99 params
        const ParamVector params = random_params(spec, rng);
        WeightedDataset data = make_dataset(6, spec.input_dim, spec.num_classes, rng);
        data.loss_weights(1) = 0.0;  // exercise the weight-zero path too

        const Vector analytic = loss_gradient(params, data, all_indices(6));
        const Vector fd = fd_gradient(params, data, h);
        const double rel = (analytic - fd).norm() / std::max(1e-12, fd.norm());
        CHECK(rel <= 1e-5);
    }
}

TEST_CASE("all-zero-weight index list yields exactly the L2 gradient") {
    RngStream rng(14, 0);
    const ModelSpec spec = lr_spec(3, 2, 0.25);
    const ParamVector params = random_params(spec, rng);
    WeightedDataset data = make_dataset(4, 3, 2, rng);
    data.loss_weights << 0, 0, 1, 1;

    const Vector g = loss_gradient(params, data, {0, 1});
    CHECK((g - 0.25 * params.values).norm() == 0.0);
}

TEST_CASE("weight linearity on the sum-form objective") {
    RngStream rng(15, 0);
    const ModelSpec spec = mlp_spec(3, 5, 3, 0.1);
    const ParamVector params = random_params(spec, rng);
    const WeightedDataset data = make_dataset(8, 3, 3, rng);

    const auto sum_form = [&](const IndexList& idx) {
        double wsum = 0.0;
        for (Index i : idx) wsum += data.loss_weights(i);
        return ((loss_gradient(params, data, idx) -
                 spec.l2_coefficient * params.values) *
                wsum).eval();
    };

    const IndexList left = {0, 1, 2}, right = {3, 4}, both = {0, 1, 2, 3, 4};
    CHECK((sum_form(both) - (sum_form(left) + sum_form(right))).lpNorm<Eigen::Infinity>() <
          1e-12);
}

TEST_CASE("hessian_vector_product: trivial cases") {
    RngStream rng(16, 0);
    const ModelSpec spec = mlp_spec(2, 4, 3, 0.3);
    const ParamVector params = random_params(spec, rng);
    WeightedDataset data = make_dataset(3, 2, 3, rng);

    CHECK(hessian_vector_product(params, data, all_indices(3),
                                 Vector::Zero(spec.param_count()))
              .norm() == 0.0);

    // Pure L2 objective (all listed weights zero): H v = l2 v exactly.
    data.loss_weights << 0, 0, 1;
    Vector v = random_params(spec, rng).values;
    const Vector hv = hessian_vector_product(params, data, {0, 1}, v);
    CHECK((hv - 0.3 * v).norm() == 0.0);
}

TEST_CASE("HVP matches finite differences of the analytic gradient") {
    RngStream rng(17, 0);
    for (int trial = 0; trial < 10; ++trial) {
        const ModelSpec spec =
            trial % 2 == 0 ? lr_spec(3, 3, 0.05) : mlp_spec(2, 5, 3, 0.05);
        const ParamVector params = random_params(spec, rng);
        const WeightedDataset data = make_dataset(5, spec.input_dim, spec.num_classes, rng);
        const Vector v = random_params(spec, rng).values;

        const double h = 1e-6 * (1.0 + v.lpNorm<Eigen::Infinity>());
        ParamVector up = params, down = params;
        up.values += h * v;
        down.values -= h * v;
        const Vector fd = (loss_gradient(up, data, all_indices(5)) -
                           loss_gradient(down, data, all_indices(5))) /
                          (2.0 * h);
        const Vector hv = hessian_vector_product(params, data, all_indices(5), v);
        CHECK((hv - fd).norm() / std::max(1.0, fd.norm()) < 5e-5);
    }
}

TEST_CASE("explicit Hessian: HVP with basis vectors reproduces columns") {
    RngStream rng(18, 0);
    // Logistic regression: closed Kronecker form vs forward-over-reverse HVP.
    const ModelSpec spec = lr_spec(5, 4, 0.02);  // 24 params
    const ParamVector params = random_params(spec, rng);
    const WeightedDataset data = make_dataset(7, 5, 4, rng);

    const Matrix h = explicit_hessian(params, data, all_indices(7));
    Vector e = Vector::Zero(spec.param_count());
    for (Index k = 0; k < spec.param_count(); ++k) {
        e(k) = 1.0;
        const Vector col = hessian_vector_product(params, data, all_indices(7), e);
        CHECK((h.col(k) - col).lpNorm<Eigen::Infinity>() < 1e-6);
        e(k) = 0.0;
    }
    CHECK(is_symmetric(h, 1e-8));
}

TEST_CASE("explicit Hessian (MLP) matches a finite-difference Hessian oracle") {
    RngStream rng(19, 0);
    const ModelSpec spec = mlp_spec(2, 3, 2, 0.05);  // 17 params
    const ParamVector params = random_params(spec, rng);
    const WeightedDataset data = make_dataset(4, 2, 2, rng);

    const Matrix h = explicit_hessian(params, data, all_indices(4));
    CHECK(is_symmetric(h, 1e-8));

    const double step = 1e-5;
    ParamVector probe = params;
    for (Index k = 0; k < spec.param_count(); ++k) {
        probe.values(k) = params.values(k) + step;
        const Vector up = loss_gradient(probe, data, all_indices(4));
        probe.values(k) = params.values(k) - step;
        const Vector down = loss_gradient(probe, data, all_indices(4));
        probe.values(k) = params.values(k);
        const Vector fd_col = (up - down) / (2.0 * step);
        CHECK((h.col(k) - fd_col).lpNorm<Eigen::Infinity>() < 1e-5);
    }
}

TEST_CASE("ridge Hessian on separable two-class data is positive definite") {
    // Two well-separated clusters; eigenvalue oracle checks H + lambda I > 0.
    const ModelSpec spec = lr_spec(2, 2, 0.0);
    WeightedDataset data;
    data.features.resize(6, 2);
    data.features << -2, -2, -2.2, -1.9, -1.8, -2.1, 2, 2, 2.1, 1.9, 1.8, 2.2;
    data.labels = {0, 0, 0, 1, 1, 1};
    data.loss_weights = Vector::Ones(6);
    RngStream rng(20, 0);
    const ParamVector params = random_params(spec, rng);

    Matrix h = explicit_hessian(params, data, all_indices(6));
    h += 0.005 * Matrix::Identity(h.rows(), h.cols());
    const Eigen::SelfAdjointEigenSolver<Matrix> eigs(h);
    CHECK(eigs.eigenvalues().minCoeff() > 0.0);
}

TEST_CASE("explicit Hessian guards the parameter count") {
    const ModelSpec spec = mlp_spec(100, 30, 10);  // > 2000 params
    ParamVector params{Vector::Zero(spec.param_count()), spec};
    RngStream rng(21, 0);
    const WeightedDataset data = make_dataset(2, 100, 10, rng);
    CHECK_THROWS_AS(explicit_hessian(params, data, {0, 1}), ParamCountTooLarge);
}

TEST_CASE("non-finite parameters raise NonFiniteLoss") {
    const ModelSpec spec = lr_spec(2, 2);
    ParamVector params{Vector::Zero(spec.param_count()), spec};
    params.values(0) = std::numeric_limits<double>::infinity();
    Vector x = Vector::Ones(2);
    CHECK_THROWS_AS(sample_loss(params, x, 0), NonFiniteLoss);
}

TEST_CASE("dataset validation rejects fractional weights and empty effective sets") {
    RngStream rng(22, 0);
    WeightedDataset data = make_dataset(3, 2, 2, rng);
    data.loss_weights << 1, 0.5, 1;
    CHECK_THROWS_AS(data.validate(2), std::invalid_argument);
    data.loss_weights << 0, 0, 0;
    CHECK_THROWS_AS(data.validate(2), std::invalid_argument);
    data.loss_weights << 1, 0, 0;
    CHECK_NOTHROW(data.validate(2));
}
