#include <doctest.h>

#include <cmath>

#include "btda/attribution.hpp"
#include "btda/errors.hpp"
#include "btda/harness/dataset.hpp"
#include "btda/stats.hpp"

using namespace btda;

namespace {

struct Fixture {
    ModelSpec spec{ModelKind::LogisticRegression, 2, 0, 3, Activation::Gelu, 0.005};
    WeightedDataset data;
    Sample test_point;
    TrainConfig cfg;
    RandomnessRegime regime;

    Fixture() {
        harness::BlobsConfig blobs;
        blobs.classes = 3;
        blobs.dim = 2;
        blobs.train_per_class = {4};
        blobs.test_per_class = {1};
        blobs.separation = 4.0;
        blobs.sigma = 1.0;
        blobs.data_seed = 7;
        auto ds = harness::generate_blobs(blobs);
        data = ds.train;
        test_point = ds.test.front();

        cfg.learning_rate = 0.05;
        cfg.weight_decay = 0.005;
        cfg.batch_size = 6;
        cfg.epochs = 4;
        cfg.swa_window = 2;

        regime.kind = RegimeKind::DeInit;
        regime.t_de = 3;
        regime.t_swa = 2;
        regime.master_seed = 17;
    }

    PosteriorSampleSet original() const {
        return sample_posterior(spec, data, cfg, regime);
    }
};

}  // namespace

TEST_CASE("loo_matrix: identical sets give zero matched differences") {
    // With j weight-zeroed from the start the two posteriors coincide, so the
    // matched (diagonal) differences are exactly zero and the cross-pair
    // matrix is antisymmetric: entry (t, t') = L(z; theta_t) - L(z; theta_t')
    // still carries the sample-to-sample noise, as the variance formula
    // requires.
    Fixture f;
    f.data.loss_weights(2) = 0.0;
    const auto original = f.original();
    const auto counterfactual = sample_posterior(f.spec, f.data, f.cfg, f.regime, Index{2});
    const auto m = loo_matrix(original, counterfactual, f.test_point, 2);
    CHECK(m.values.diagonal().cwiseAbs().maxCoeff() == 0.0);
    CHECK((m.values + m.values.transpose()).cwiseAbs().maxCoeff() == 0.0);

    const auto stats = loo_pair_statistics(m);
    CHECK(stats.mean == 0.0);
    CHECK(stats.t_stat == 0.0);
    CHECK(stats.p_value == 1.0);
}

TEST_CASE("loo_matrix: T = 1 reduces to the deterministic loss difference") {
    Fixture f;
    f.cfg.swa_window = 1;
    RandomnessRegime r = f.regime;
    r.t_de = 1;
    r.t_swa = 1;
    const auto original = sample_posterior(f.spec, f.data, f.cfg, r);
    const auto counterfactual = sample_posterior(f.spec, f.data, f.cfg, r, Index{0});
    const auto m = loo_matrix(original, counterfactual, f.test_point, 0);
    REQUIRE(m.values.rows() == 1);
    const double direct =
        sample_loss(counterfactual.samples[0].params, f.test_point.features,
                    f.test_point.label) -
        sample_loss(original.samples[0].params, f.test_point.features, f.test_point.label);
    CHECK(m.values(0, 0) == direct);
}

TEST_CASE("loo_matrix entries match direct recomputation on random triples") {
    Fixture f;
    const auto original = f.original();
    const auto counterfactual = sample_posterior(f.spec, f.data, f.cfg, f.regime, Index{1});
    const auto m = loo_matrix(original, counterfactual, f.test_point, 1);

    const auto orig_order = canonical_positions(original);
    const auto cf_order = canonical_positions(counterfactual);
    RngStream rng(123, 0);
    for (int k = 0; k < 5; ++k) {
        const Index t = static_cast<Index>(rng.below(static_cast<std::uint64_t>(m.t())));
        const Index u = static_cast<Index>(rng.below(static_cast<std::uint64_t>(m.t())));
        const double direct =
            sample_loss(counterfactual.samples[static_cast<std::size_t>(cf_order[t])].params,
                        f.test_point.features, f.test_point.label) -
            sample_loss(original.samples[static_cast<std::size_t>(orig_order[u])].params,
                        f.test_point.features, f.test_point.label);
        CHECK(m.values(t, u) == doctest::Approx(direct).epsilon(1e-15));
    }
}

TEST_CASE("ats_scores: lr = 0 zeroes every sample; cardinality is T") {
    Fixture f;
    const auto original = f.original();
    TrainConfig zero_lr = f.cfg;
    zero_lr.learning_rate = 0.0;
    const auto scores = ats_scores(original, f.data, 0, f.test_point, zero_lr);
    CHECK(scores.samples.size() == f.regime.total_samples());
    CHECK(scores.samples.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("ats_scores: first-order Taylor value at small lr") {
    Fixture f;
    f.data.loss_weights(0) = 1.0;
    const auto original = f.original();
    TrainConfig small = f.cfg;
    small.learning_rate = 1e-4;
    small.weight_decay = 0.005;

    // Evaluate the train sample itself as the test point. Second-order Taylor
    // oracle: -lr <s, g_j> + (lr^2 / 2) s^T H_z s with s the ATS step
    // direction and H_z the bare per-sample loss Hessian.
    const Sample z = f.data.sample(0);
    const auto scores = ats_scores(original, f.data, 0, z, small);
    const auto order = canonical_positions(original);

    WeightedDataset only_z;
    only_z.features = z.features.transpose();
    only_z.labels = {z.label};
    only_z.loss_weights = Vector::Ones(1);

    for (Index t = 0; t < scores.samples.size(); ++t) {
        const auto& theta = original.samples[static_cast<std::size_t>(order[t])].params;
        const Vector gj = sample_gradient(theta, z.features, z.label);
        const Vector step = gj + 0.005 * theta.values;

        ParamVector bare = theta;
        bare.spec.l2_coefficient = 0.0;
        const Matrix hz = explicit_hessian(bare, only_z, {0});
        const double lr = small.learning_rate;
        const double taylor = -lr * step.dot(gj) + 0.5 * lr * lr * step.dot(hz * step);
        CHECK(std::abs(scores.samples(t) - taylor) < 1e-8);
    }
}

TEST_CASE("if_score_single: identity Hessian collapses to negative grad-dot") {
    Vector a(3), b(3);
    a << 1, -2, 0.5;
    b << 0.3, 0.7, -1;
    const double score = if_score_single(Matrix::Identity(3, 3), 0.0, a, b);
    CHECK(std::abs(score + a.dot(b)) < 1e-15);
}

TEST_CASE("identity-Hessian IF equals -GD elementwise over a posterior") {
    Fixture f;
    const auto original = f.original();
    const auto gd = grad_dot_scores(original, f.data, 2, f.test_point);
    const auto order = canonical_positions(original);

    const Sample train_point = f.data.sample(2);
    const Matrix identity = Matrix::Identity(f.spec.param_count(), f.spec.param_count());
    for (Index t = 0; t < gd.samples.size(); ++t) {
        const auto& theta = original.samples[static_cast<std::size_t>(order[t])].params;
        const Vector gj = sample_gradient(theta, train_point.features, train_point.label);
        const Vector gz = sample_gradient(theta, f.test_point.features, f.test_point.label);
        const double collapsed = if_score_single(identity, 0.0, gj, gz);
        CHECK(std::abs(collapsed + gd.samples(t)) <= 1e-12 * std::max(1.0, std::abs(gd.samples(t))));
    }
}

TEST_CASE("if_scores: zero test gradient gives score zero; huge damping bounds it") {
    Fixture f;
    const auto original = f.original();
    const auto order = canonical_positions(original);
    const auto& theta = original.samples[static_cast<std::size_t>(order[0])].params;
    const Sample train_point = f.data.sample(1);
    const Vector gj = sample_gradient(theta, train_point.features, train_point.label);
    const Vector gz = sample_gradient(theta, f.test_point.features, f.test_point.label);

    const Matrix h = explicit_hessian(theta, f.data, all_indices(f.data.size()));
    CHECK(if_score_single(h, 0.005, gj, Vector::Zero(gj.size())) == 0.0);

    const double bounded = if_score_single(h, 1e6, gj, gz);
    CHECK(std::abs(bounded) <= gj.norm() * gz.norm() / 1e6);
}

TEST_CASE("if_scores: dense and CG paths agree") {
    Fixture f;
    const auto original = f.original();
    IfOptions dense;
    dense.damping = 0.01;
    IfOptions cg = dense;
    cg.solver = IfOptions::Solver::Cg;
    cg.cg_tol = 1e-12;

    const auto a = if_scores(original, f.data, 0, f.test_point, dense);
    const auto b = if_scores(original, f.data, 0, f.test_point, cg);
    REQUIRE(a.samples.size() == b.samples.size());
    for (Index t = 0; t < a.samples.size(); ++t) {
        CHECK(a.samples(t) == doctest::Approx(b.samples(t)).epsilon(1e-8));
        CHECK(b.cg_converged[static_cast<std::size_t>(t)]);
    }
}

TEST_CASE("grad_dot: self pair is non-negative, symmetric in arguments") {
    Fixture f;
    const auto original = f.original();
    const Sample self = f.data.sample(3);
    const auto self_scores = grad_dot_scores(original, f.data, 3, self);
    for (Index t = 0; t < self_scores.samples.size(); ++t) {
        CHECK(self_scores.samples(t) >= 0.0);
    }

    // grad_dot(j -> z) == grad_dot(z -> j) when both are training points.
    const auto ab = grad_dot_scores(original, f.data, 3, f.data.sample(5));
    const auto ba = grad_dot_scores(original, f.data, 5, f.data.sample(3));
    CHECK((ab.samples - ba.samples).cwiseAbs().maxCoeff() == 0.0);

    // Oracle recomputation via sample_gradient.
    const auto order = canonical_positions(original);
    for (Index t = 0; t < ab.samples.size(); ++t) {
        const auto& theta = original.samples[static_cast<std::size_t>(order[t])].params;
        const double direct =
            sample_gradient(theta, f.data.sample(3).features, f.data.sample(3).label)
                .dot(sample_gradient(theta, f.data.sample(5).features,
                                     f.data.sample(5).label));
        CHECK(ab.samples(t) == doctest::Approx(direct).epsilon(1e-15));
    }
}

TEST_CASE("grad_cos: bounds, self-similarity, and the algebraic identity") {
    Fixture f;
    const auto original = f.original();
    const Sample self = f.data.sample(4);
    const auto self_cos = grad_cos_scores(original, f.data, 4, self);
    for (Index t = 0; t < self_cos.samples.size(); ++t) {
        CHECK(self_cos.samples(t) == doctest::Approx(1.0).epsilon(1e-12));
    }

    const auto gc = grad_cos_scores(original, f.data, 1, f.test_point);
    const auto gd = grad_dot_scores(original, f.data, 1, f.test_point);
    const auto order = canonical_positions(original);
    for (Index t = 0; t < gc.samples.size(); ++t) {
        CHECK(gc.samples(t) >= -1.0);
        CHECK(gc.samples(t) <= 1.0);
        const auto& theta = original.samples[static_cast<std::size_t>(order[t])].params;
        const Vector gj = sample_gradient(theta, f.data.sample(1).features,
                                          f.data.sample(1).label);
        const Vector gz = sample_gradient(theta, f.test_point.features, f.test_point.label);
        // gc * ||g_j|| * ||g_z|| = gd, and the cosine is scale invariant.
        CHECK(std::abs(gc.samples(t) * gj.norm() * gz.norm() - gd.samples(t)) <=
              1e-12 * std::max(1.0, std::abs(gd.samples(t))));
        for (double c : {0.5, 3.0}) {
            const Vector scaled = c * gj;
            const double cos_scaled = scaled.dot(gz) / (scaled.norm() * gz.norm());
            CHECK(cos_scaled == doctest::Approx(gc.samples(t)).epsilon(1e-12));
        }
    }
}

TEST_CASE("tracin: t_swa = 1 coincides with grad-dot; brute-force oracle") {
    Fixture f;
    // Single-checkpoint members: TracIn sample == the GD sample there.
    f.cfg.swa_window = 1;
    RandomnessRegime r = f.regime;
    r.t_swa = 1;
    const auto single = sample_posterior(f.spec, f.data, f.cfg, r);
    const auto ti = tracin_scores(single, f.data, 0, f.test_point);
    const auto gd = grad_dot_scores(single, f.data, 0, f.test_point);
    CHECK((ti.samples - gd.samples).cwiseAbs().maxCoeff() == 0.0);

    // Multi-checkpoint: per-member mean of per-checkpoint GD values.
    Fixture g;
    const auto original = g.original();
    const auto tracin = tracin_scores(original, g.data, 2, g.test_point);
    REQUIRE(tracin.samples.size() == g.regime.t_de);
    const auto gd_all = grad_dot_scores(original, g.data, 2, g.test_point);
    const auto order = canonical_positions(original);
    for (Index m = 0; m < g.regime.t_de; ++m) {
        double acc = 0.0;
        Index count = 0;
        for (Index t = 0; t < gd_all.samples.size(); ++t) {
            if (original.samples[static_cast<std::size_t>(order[t])].member_id == m) {
                acc += gd_all.samples(t);
                ++count;
            }
        }
        CHECK(tracin.samples(m) ==
              doctest::Approx(acc / static_cast<double>(count)).epsilon(1e-12));
    }
}

TEST_CASE("method names round-trip") {
    for (Method m : all_methods()) {
        CHECK(method_from_name(method_name(m)) == m);
    }
    CHECK_THROWS_AS(method_from_name("bogus"), ConfigError);
}
