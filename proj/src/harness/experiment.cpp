#include "btda/harness/experiment.hpp"

#include <json.hpp>

#include <atomic>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include "btda/errors.hpp"
#include "btda/harness/plots.hpp"
#include "btda/linalg.hpp"
#include "btda/parallel.hpp"

namespace btda::harness {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kCodeVersion = "btda 0.1.0";
constexpr Index kHistogramBins = 10;

std::string fmt_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string utc_timestamp() {
    const std::time_t now = std::time(nullptr);
    char buf[32];
    std::tm tm_utc{};
    gmtime_r(&now, &tm_utc);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

void write_file_atomic(const fs::path& path, const std::string& content) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw std::runtime_error("cannot write " + tmp.string());
        os << content;
    }
    fs::rename(tmp, path);
}

std::string set_name(std::optional<Index> removed) {
    if (!removed) return "orig";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "loo_%04lld", static_cast<long long>(*removed));
    return buf;
}

DatasetPair build_dataset(const ExperimentConfig& cfg) {
    if (cfg.dataset == DatasetKind::Blobs) return generate_blobs(cfg.blobs);
    return load_idx(cfg.idx);
}

ModelSpec make_spec(const ExperimentConfig& cfg, const DatasetPair& ds) {
    ModelSpec spec;
    spec.kind = cfg.model_kind;
    spec.input_dim = ds.input_dim;
    spec.hidden_dim = cfg.model_kind == ModelKind::Mlp ? cfg.hidden_dim : 0;
    spec.num_classes = ds.num_classes;
    spec.l2_coefficient = cfg.training.weight_decay;
    spec.validate();
    return spec;
}

struct RunContext {
    const ExperimentConfig& cfg;
    const ModelSpec& spec;
    const WeightedDataset& train;
    RunOptions opts;
    fs::path ckpt_root;
    fs::path manifest_dir;
    std::atomic<Index> trained{0};
    std::atomic<Index> reused{0};
};

struct MemberResult {
    std::uint64_t init_seed = 0;
    std::uint64_t batch_seed = 0;
    std::vector<std::pair<Index, ParamVector>> checkpoints;
    bool loaded_from_disk = false;
};

fs::path member_dir(const RunContext& ctx, const std::string& name, Index member) {
    return ctx.ckpt_root / name / ("m" + std::to_string(member));
}

fs::path checkpoint_path(const fs::path& dir, Index epoch) {
    return dir / ("ep" + std::to_string(epoch) + ".bin");
}

/// Loads a persisted member run; returns false when anything is missing or
/// does not match the expected seeds/shape.
bool try_load_member(const RunContext& ctx, const std::string& name, Index member,
                     std::uint64_t init_seed, std::uint64_t batch_seed,
                     MemberResult& out) {
    const fs::path dir = member_dir(ctx, name, member);
    const fs::path meta_path = dir / "meta.json";
    std::ifstream is(meta_path);
    if (!is) return false;
    json meta;
    try {
        is >> meta;
    } catch (const json::exception&) {
        return false;
    }
    if (meta.value("init_seed", std::uint64_t{0}) != init_seed ||
        meta.value("batch_seed", std::uint64_t{0}) != batch_seed ||
        meta.value("param_count", Index{0}) != ctx.spec.param_count()) {
        return false;
    }
    const auto epochs = meta.value("epochs", std::vector<Index>{});
    if (static_cast<Index>(epochs.size()) != ctx.cfg.training.swa_window) return false;

    out.init_seed = init_seed;
    out.batch_seed = batch_seed;
    out.checkpoints.clear();
    for (Index epoch : epochs) {
        const fs::path p = checkpoint_path(dir, epoch);
        if (!fs::exists(p)) return false;
        Vector params = load_checkpoint(p);
        if (params.size() != ctx.spec.param_count()) return false;
        out.checkpoints.emplace_back(epoch, ParamVector{std::move(params), ctx.spec});
    }
    out.loaded_from_disk = true;
    return true;
}

void persist_member(const RunContext& ctx, const std::string& name, Index member,
                    const MemberResult& result) {
    const fs::path dir = member_dir(ctx, name, member);
    fs::create_directories(dir);
    json epochs = json::array();
    for (const auto& [epoch, params] : result.checkpoints) {
        save_checkpoint(checkpoint_path(dir, epoch), params.values);
        epochs.push_back(epoch);
    }
    json meta;
    meta["member"] = member;
    meta["init_seed"] = result.init_seed;
    meta["batch_seed"] = result.batch_seed;
    meta["epochs"] = epochs;
    meta["param_count"] = ctx.spec.param_count();
    write_file_atomic(dir / "meta.json", meta.dump(2) + "\n");
}

/// Trains (or loads, under --resume) one posterior sample set and persists
/// checkpoints plus the sample-set manifest.
PosteriorSampleSet obtain_sample_set(RunContext& ctx, std::optional<Index> removed) {
    const RandomnessRegime& regime = ctx.cfg.regime;
    const std::string name = set_name(removed);

    WeightedDataset effective = ctx.train;
    if (removed) effective.loss_weights(*removed) = 0.0;

    std::vector<MemberResult> members(static_cast<std::size_t>(regime.t_de));
    parallel_for(regime.t_de, worker_count(ctx.opts.workers), [&](Index m) {
        auto& slot = members[static_cast<std::size_t>(m)];
        const auto [init_seed, batch_seed] = member_seeds(regime, m);
        if (ctx.opts.resume && try_load_member(ctx, name, m, init_seed, batch_seed, slot)) {
            ctx.reused.fetch_add(1);
            return;
        }
        TrainTrajectory traj;
        try {
            traj = btda::train(ctx.spec, effective, ctx.cfg.training, init_seed, batch_seed);
        } catch (const DivergedTraining& e) {
            throw DivergedTraining(name + " member " + std::to_string(m) + ": " + e.what());
        }
        slot.init_seed = init_seed;
        slot.batch_seed = batch_seed;
        slot.checkpoints = std::move(traj.checkpoints);
        persist_member(ctx, name, m, slot);
        ctx.trained.fetch_add(1);
    });

    PosteriorSampleSet set;
    set.regime = regime;
    set.removed_index = removed;
    json manifest_members = json::array();
    for (Index m = 0; m < regime.t_de; ++m) {
        const auto& member = members[static_cast<std::size_t>(m)];
        set.seeds_used.emplace_back(member.init_seed, member.batch_seed);
        json files = json::array();
        for (const auto& [epoch, params] : member.checkpoints) {
            set.samples.push_back({m, epoch, params});
            files.push_back((fs::path("checkpoints") / name / ("m" + std::to_string(m)) /
                             ("ep" + std::to_string(epoch) + ".bin"))
                                .generic_string());
        }
        json jm;
        jm["member"] = m;
        jm["init_seed"] = member.init_seed;
        jm["batch_seed"] = member.batch_seed;
        jm["checkpoints"] = files;
        manifest_members.push_back(jm);
    }
    set.validate();

    json manifest;
    manifest["regime"] =
        json{{"kind", regime.kind == RegimeKind::DeInit ? "de_init" : "de_batch"},
             {"t_de", regime.t_de},
             {"t_swa", regime.t_swa},
             {"master_seed", regime.master_seed},
             {"pin_batch_seed", regime.pin_batch_seed}};
    if (removed) manifest["removed_index"] = *removed;
    else manifest["removed_index"] = nullptr;
    manifest["members"] = manifest_members;
    write_file_atomic(ctx.manifest_dir / (name + ".json"), manifest.dump(2) + "\n");
    return set;
}

struct EstimatorCaches {
    std::vector<Index> order;         // canonical positions, size T
    Matrix test_losses;               // T x Z
    std::vector<Matrix> train_grads;  // per t: P x N
    std::vector<Matrix> test_grads;   // per t: P x Z
};

EstimatorCaches build_caches(const RunContext& ctx, const PosteriorSampleSet& original,
                             const std::vector<Sample>& tests, bool need_grads) {
    EstimatorCaches caches;
    caches.order = canonical_positions(original);
    const Index t_total = static_cast<Index>(caches.order.size());
    const Index n = ctx.train.size();
    const Index z_total = static_cast<Index>(tests.size());

    caches.test_losses.resize(t_total, z_total);
    if (need_grads) {
        caches.train_grads.assign(static_cast<std::size_t>(t_total), Matrix());
        caches.test_grads.assign(static_cast<std::size_t>(t_total), Matrix());
    }

    parallel_for(t_total, worker_count(ctx.opts.workers), [&](Index t) {
        const auto& params =
            original.samples[static_cast<std::size_t>(caches.order[static_cast<std::size_t>(t)])]
                .params;
        for (Index z = 0; z < z_total; ++z) {
            caches.test_losses(t, z) =
                sample_loss(params, tests[static_cast<std::size_t>(z)].features,
                            tests[static_cast<std::size_t>(z)].label);
        }
        if (!need_grads) return;
        Matrix gj(ctx.spec.param_count(), n);
        for (Index j = 0; j < n; ++j) {
            const Sample s = ctx.train.sample(j);
            gj.col(j) = sample_gradient(params, s.features, s.label);
        }
        Matrix gz(ctx.spec.param_count(), z_total);
        for (Index z = 0; z < z_total; ++z) {
            gz.col(z) = sample_gradient(params, tests[static_cast<std::size_t>(z)].features,
                                        tests[static_cast<std::size_t>(z)].label);
        }
        caches.train_grads[static_cast<std::size_t>(t)] = std::move(gj);
        caches.test_grads[static_cast<std::size_t>(t)] = std::move(gz);
    });
    return caches;
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& cfg, const RunOptions& opts) {
    cfg.validate();
    const DatasetPair ds = build_dataset(cfg);
    const ModelSpec spec = make_spec(cfg, ds);
    ds.train.validate(spec.num_classes);

    const Index n = ds.train.size();
    const Index z_total = static_cast<Index>(ds.test.size());
    const Index planned = cfg.implied_training_count(n);
    const std::string hash = config_hash(cfg);

    if (!opts.quiet) {
        std::cerr << "[btda] config " << hash << ": " << n << " train / " << z_total
                  << " test samples, T = " << cfg.regime.t_de << " x " << cfg.regime.t_swa
                  << ", planned trainings: " << planned << "\n";
    }
    if (planned > 5000 && !opts.assume_yes) {
        throw ConfigError("implied training count " + std::to_string(planned) +
                          " exceeds 5000; confirm with --yes");
    }

    RunContext ctx{cfg, spec, ds.train, opts, cfg.output_dir / "checkpoints",
                   cfg.output_dir / "manifests"};
    fs::create_directories(ctx.ckpt_root);
    fs::create_directories(ctx.manifest_dir);

    const fs::path manifest_path = cfg.output_dir / "manifest.json";
    if (opts.resume && fs::exists(manifest_path)) {
        std::ifstream is(manifest_path);
        json manifest;
        is >> manifest;
        if (manifest.value("config_hash", std::string{}) != hash) {
            throw ConfigError("resume: output_dir holds a different config (hash mismatch)");
        }
    }
    {
        json manifest;
        manifest["code_version"] = kCodeVersion;
        manifest["config_hash"] = hash;
        manifest["status"] = "running";
        manifest["n_train"] = n;
        manifest["n_test"] = z_total;
        manifest["implied_trainings"] = planned;
        write_file_atomic(manifest_path, manifest.dump(2) + "\n");
    }

    if (!opts.quiet) std::cerr << "[btda] sampling original posterior\n";
    const PosteriorSampleSet original = obtain_sample_set(ctx, std::nullopt);
    const Index t_total = cfg.regime.total_samples();

    const bool need_grads = cfg.wants(Method::If) || cfg.wants(Method::GradDot) ||
                            cfg.wants(Method::GradCos) || cfg.wants(Method::TracIn);
    const EstimatorCaches caches = build_caches(ctx, original, ds.test, need_grads);

    // Counterfactual posteriors and their test-loss tables (LOO only).
    std::vector<Matrix> cf_losses;  // per j: T x Z
    if (cfg.wants(Method::Loo)) {
        cf_losses.assign(static_cast<std::size_t>(n), Matrix());
        for (Index j = 0; j < n; ++j) {
            if (!opts.quiet && (j % 10 == 0)) {
                std::cerr << "[btda] counterfactual posterior " << j << "/" << n << "\n";
            }
            const PosteriorSampleSet cf = obtain_sample_set(ctx, j);
            const auto cf_order = canonical_positions(cf);
            Matrix losses(t_total, z_total);
            parallel_for(t_total, worker_count(opts.workers), [&](Index t) {
                const auto& params =
                    cf.samples[static_cast<std::size_t>(cf_order[static_cast<std::size_t>(t)])]
                        .params;
                for (Index z = 0; z < z_total; ++z) {
                    losses(t, z) =
                        sample_loss(params, ds.test[static_cast<std::size_t>(z)].features,
                                    ds.test[static_cast<std::size_t>(z)].label);
                }
            });
            cf_losses[static_cast<std::size_t>(j)] = std::move(losses);
        }
    }

    // Per-posterior-sample score tables, each N x Z.
    std::vector<Matrix> gd_mat, gc_mat, if_mat, ats_mat;
    if (cfg.wants(Method::GradDot) || cfg.wants(Method::GradCos) || cfg.wants(Method::TracIn)) {
        gd_mat.assign(static_cast<std::size_t>(t_total), Matrix());
        if (cfg.wants(Method::GradCos)) gc_mat.assign(static_cast<std::size_t>(t_total), Matrix());
        parallel_for(t_total, worker_count(opts.workers), [&](Index t) {
            const Matrix& gj = caches.train_grads[static_cast<std::size_t>(t)];
            const Matrix& gz = caches.test_grads[static_cast<std::size_t>(t)];
            Matrix dots = gj.transpose() * gz;
            if (cfg.wants(Method::GradCos)) {
                const Vector nj = gj.colwise().norm();
                const Vector nz = gz.colwise().norm();
                Matrix cos(n, z_total);
                for (Index j = 0; j < n; ++j) {
                    for (Index z = 0; z < z_total; ++z) {
                        cos(j, z) = (nj(j) <= 1e-12 || nz(z) <= 1e-12)
                                        ? 0.0
                                        : dots(j, z) / (nj(j) * nz(z));
                    }
                }
                gc_mat[static_cast<std::size_t>(t)] = std::move(cos);
            }
            gd_mat[static_cast<std::size_t>(t)] = std::move(dots);
        });
    }
    std::vector<std::vector<bool>> if_cg_flags;  // per t, per j; empty on the dense path
    if (cfg.wants(Method::If)) {
        if (!opts.quiet) std::cerr << "[btda] influence-function solves\n";
        if_mat.assign(static_cast<std::size_t>(t_total), Matrix());
        const IndexList everything = all_indices(n);
        const bool dense = spec.param_count() <= 2000;
        if (!dense) if_cg_flags.assign(static_cast<std::size_t>(t_total), {});
        parallel_for(t_total, worker_count(opts.workers), [&](Index t) {
            const auto& params =
                original.samples[static_cast<std::size_t>(
                                     caches.order[static_cast<std::size_t>(t)])]
                    .params;
            const Matrix& g_train = caches.train_grads[static_cast<std::size_t>(t)];
            Matrix solved(spec.param_count(), n);
            if (dense) {
                Matrix h = explicit_hessian(params, ds.train, everything);
                h.diagonal().array() += cfg.if_damping;
                Eigen::LDLT<Matrix> ldlt(h);
                if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() <= 1e-12) {
                    throw NotPositiveDefinite("influence Hessian at sample " +
                                              std::to_string(t) + " not PD; raise if.damping");
                }
                solved = ldlt.solve(g_train);
            } else {
                const double damping = cfg.if_damping;
                const LinearOperator op = [&](const Vector& v) -> Vector {
                    return hessian_vector_product(params, ds.train, everything, v) +
                           damping * v;
                };
                auto& flags = if_cg_flags[static_cast<std::size_t>(t)];
                flags.assign(static_cast<std::size_t>(n), true);
                for (Index j = 0; j < n; ++j) {
                    const CgResult r = conjugate_gradient(op, g_train.col(j), 1e-10,
                                                          10 * spec.param_count());
                    solved.col(j) = r.x;
                    flags[static_cast<std::size_t>(j)] = r.converged;
                }
            }
            if_mat[static_cast<std::size_t>(t)] =
                -(solved.transpose() * caches.test_grads[static_cast<std::size_t>(t)]);
        });
    }
    if (cfg.wants(Method::Ats)) {
        if (!opts.quiet) std::cerr << "[btda] single-step scores\n";
        ats_mat.assign(static_cast<std::size_t>(t_total), Matrix());
        parallel_for(t_total, worker_count(opts.workers), [&](Index t) {
            const auto& params =
                original.samples[static_cast<std::size_t>(
                                     caches.order[static_cast<std::size_t>(t)])]
                    .params;
            Matrix scores(n, z_total);
            for (Index j = 0; j < n; ++j) {
                const ParamVector stepped = ats_step(params, ds.train, j, cfg.training);
                for (Index z = 0; z < z_total; ++z) {
                    scores(j, z) =
                        sample_loss(stepped, ds.test[static_cast<std::size_t>(z)].features,
                                    ds.test[static_cast<std::size_t>(z)].label) -
                        caches.test_losses(t, z);
                }
            }
            ats_mat[static_cast<std::size_t>(t)] = std::move(scores);
        });
    }

    // Member groups (canonical order) for TracIn.
    std::vector<std::vector<Index>> member_rows(static_cast<std::size_t>(cfg.regime.t_de));
    for (Index t = 0; t < t_total; ++t) {
        const auto& s =
            original.samples[static_cast<std::size_t>(caches.order[static_cast<std::size_t>(t)])];
        member_rows[static_cast<std::size_t>(s.member_id)].push_back(t);
    }

    ExperimentReport report;
    report.config = cfg;
    report.hash = hash;
    report.n_train = n;
    report.n_test = z_total;
    report.trainings_run = ctx.trained.load();
    report.trainings_reused = ctx.reused.load();

    const auto samples_for = [&](Method method, Index j, Index z) {
        EstimatorScoreSamples s;
        s.method = method;
        s.train_index = j;
        s.test_index = z;
        switch (method) {
            case Method::Loo: {
                const Matrix& cf = cf_losses[static_cast<std::size_t>(j)];
                s.samples = cf.col(z) - caches.test_losses.col(z);
                break;
            }
            case Method::Ats:
            case Method::If:
            case Method::GradDot:
            case Method::GradCos: {
                const auto& mats = method == Method::Ats       ? ats_mat
                                   : method == Method::If      ? if_mat
                                   : method == Method::GradDot ? gd_mat
                                                               : gc_mat;
                s.samples.resize(t_total);
                for (Index t = 0; t < t_total; ++t) {
                    s.samples(t) = mats[static_cast<std::size_t>(t)](j, z);
                }
                if (method == Method::If && !if_cg_flags.empty()) {
                    s.cg_converged.resize(static_cast<std::size_t>(t_total));
                    for (Index t = 0; t < t_total; ++t) {
                        s.cg_converged[static_cast<std::size_t>(t)] =
                            if_cg_flags[static_cast<std::size_t>(t)][static_cast<std::size_t>(j)];
                    }
                }
                break;
            }
            case Method::TracIn: {
                s.samples.resize(cfg.regime.t_de);
                for (Index m = 0; m < cfg.regime.t_de; ++m) {
                    double acc = 0.0;
                    for (Index t : member_rows[static_cast<std::size_t>(m)]) {
                        acc += gd_mat[static_cast<std::size_t>(t)](j, z);
                    }
                    s.samples(m) = acc / static_cast<double>(
                                             member_rows[static_cast<std::size_t>(m)].size());
                }
                break;
            }
        }
        return s;
    };

    if (!opts.quiet) std::cerr << "[btda] per-pair statistics\n";
    for (Method method : all_methods()) {
        if (!cfg.wants(method)) continue;
        auto& score_rows = report.scores[method];
        score_rows.reserve(static_cast<std::size_t>(n * z_total));
        for (Index j = 0; j < n; ++j) {
            for (Index z = 0; z < z_total; ++z) {
                EstimatorScoreSamples s = samples_for(method, j, z);
                PairStatistics stat;
                if (method == Method::Loo) {
                    LossDifferenceMatrix m;
                    m.train_index = j;
                    m.test_index = z;
                    const Vector a = cf_losses[static_cast<std::size_t>(j)].col(z);
                    const Vector b = caches.test_losses.col(z);
                    m.values = a.replicate(1, t_total) -
                               b.transpose().replicate(t_total, 1);
                    stat = loo_pair_statistics(m);
                } else {
                    stat = estimator_pair_statistics(s);
                }
                report.pair_stats.push_back(stat);
                score_rows.push_back(std::move(s));
            }
        }
    }

    for (Method method : all_methods()) {
        if (!cfg.wants(method)) continue;
        std::vector<double> ps;
        Index degenerate = 0;
        for (const auto& s : report.pair_stats) {
            if (s.method != method) continue;
            if (s.degenerate) {
                ++degenerate;
            } else {
                ps.push_back(s.p_value);
            }
        }
        Vector pvec = Eigen::Map<const Vector>(ps.data(), static_cast<Index>(ps.size()));
        const PValueHistogram hist = p_value_histogram(pvec, kHistogramBins);
        MethodSummary summary;
        summary.n_pairs = static_cast<Index>(ps.size()) + degenerate;
        summary.n_degenerate = degenerate;
        summary.low_noise_fraction = hist.low_noise_fraction;
        summary.mean_p = ps.empty() ? std::numeric_limits<double>::quiet_NaN()
                                    : pvec.mean();
        report.histograms[method] = hist;
        report.summaries[method] = summary;
    }

    for (PairStatisticKind kind :
         {PairStatisticKind::Mean, PairStatisticKind::StdDev, PairStatisticKind::PValue}) {
        report.correlations[kind] = build_correlation_report(report.pair_stats, kind);
    }

    if (opts.write_outputs) {
        write_report(report);
        json manifest;
        manifest["code_version"] = kCodeVersion;
        manifest["config_hash"] = hash;
        manifest["status"] = "complete";
        manifest["n_train"] = n;
        manifest["n_test"] = z_total;
        manifest["implied_trainings"] = planned;
        manifest["trainings_run"] = report.trainings_run;
        manifest["trainings_reused"] = report.trainings_reused;
        write_file_atomic(manifest_path, manifest.dump(2) + "\n");
    }
    if (!opts.quiet) std::cerr << "[btda] done\n";
    return report;
}

void write_report(const ExperimentReport& report) {
    const fs::path dir = report.config.output_dir;
    fs::create_directories(dir);

    {
        std::string csv =
            "method,train_index,test_index,mean,variance,sample_variance,t_stat,p_value,"
            "n_samples,degenerate\n";
        for (const auto& s : report.pair_stats) {
            csv += method_name(s.method);
            csv += ',' + std::to_string(s.train_index) + ',' + std::to_string(s.test_index) +
                   ',' + fmt_g17(s.mean) + ',' + fmt_g17(s.variance) + ',' +
                   fmt_g17(s.sample_variance) + ',' + fmt_g17(s.t_stat) + ',' +
                   fmt_g17(s.p_value) + ',' + std::to_string(s.n_samples) + ',' +
                   (s.degenerate ? "1" : "0") + "\n";
        }
        write_file_atomic(dir / "pair_stats.csv", csv);
    }

    for (const auto& [method, rows] : report.scores) {
        std::string csv = "train_index,test_index,sample_id,score\n";
        for (const auto& row : rows) {
            for (Index k = 0; k < row.samples.size(); ++k) {
                csv += std::to_string(row.train_index) + ',' +
                       std::to_string(row.test_index) + ',' + std::to_string(k) + ',' +
                       fmt_g17(row.samples(k)) + "\n";
            }
        }
        write_file_atomic(dir / ("scores_" + std::string(method_name(method)) + ".csv"), csv);
    }

    for (const auto& [kind, corr] : report.correlations) {
        const std::string stem = std::string("corr_") + pair_statistic_name(kind);
        std::string csv = "kind,method";
        for (Method m : corr.methods) csv += std::string(",") + method_name(m);
        csv += "\n";
        const auto emit_matrix = [&](const char* label, const Matrix& m) {
            for (Index r = 0; r < m.rows(); ++r) {
                csv += label;
                csv += std::string(",") + method_name(corr.methods[static_cast<std::size_t>(r)]);
                for (Index c = 0; c < m.cols(); ++c) csv += ',' + fmt_g17(m(r, c));
                csv += "\n";
            }
        };
        emit_matrix("pearson", corr.pearson_matrix);
        emit_matrix("spearman", corr.spearman_matrix);
        write_file_atomic(dir / (stem + ".csv"), csv);

        json j;
        j["statistic"] = pair_statistic_name(kind);
        j["n_pairs"] = corr.n_pairs;
        j["n_dropped"] = corr.n_dropped;
        j["methods"] = json::array();
        for (Method m : corr.methods) j["methods"].push_back(method_name(m));
        const auto to_json_matrix = [&](const Matrix& m) {
            json rows = json::array();
            for (Index r = 0; r < m.rows(); ++r) {
                json row = json::array();
                for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
                rows.push_back(row);
            }
            return rows;
        };
        j["pearson"] = to_json_matrix(corr.pearson_matrix);
        j["spearman"] = to_json_matrix(corr.spearman_matrix);
        write_file_atomic(dir / (stem + ".json"), j.dump(2) + "\n");
    }

    {
        json j;
        j["code_version"] = kCodeVersion;
        j["config_hash"] = report.hash;
        j["generated_at"] = utc_timestamp();
        j["master_seed"] = report.config.regime.master_seed;
        j["data_seed"] = report.config.dataset == DatasetKind::Blobs
                             ? report.config.blobs.data_seed
                             : report.config.idx.data_seed;
        j["n_train"] = report.n_train;
        j["n_test"] = report.n_test;
        j["trainings_run"] = report.trainings_run;
        j["trainings_reused"] = report.trainings_reused;
        json methods;
        for (const auto& [method, summary] : report.summaries) {
            json sm;
            sm["mean_p"] = summary.mean_p;
            sm["low_noise_fraction"] = summary.low_noise_fraction;
            sm["n_pairs"] = summary.n_pairs;
            sm["n_degenerate"] = summary.n_degenerate;
            methods[method_name(method)] = sm;
        }
        j["methods"] = methods;
        write_file_atomic(dir / "summary.json", j.dump(2) + "\n");
    }

    {
        std::string config_text = serialize_config(report.config);
        write_file_atomic(dir / "config.resolved", config_text);
    }

    emit_plots(report, dir);
}

ExperimentReport load_report(const fs::path& dir) {
    std::ifstream is(dir / "pair_stats.csv");
    if (!is) throw ConfigError("load_report: no pair_stats.csv in " + dir.string());

    ExperimentReport report;
    report.config.output_dir = dir;
    std::string line;
    std::getline(is, line);  // header
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (fields.size() != 10) throw ConfigError("load_report: malformed row: " + line);
        PairStatistics s;
        s.method = method_from_name(fields[0]);
        s.train_index = std::stoll(fields[1]);
        s.test_index = std::stoll(fields[2]);
        s.mean = std::strtod(fields[3].c_str(), nullptr);
        s.variance = std::strtod(fields[4].c_str(), nullptr);
        s.sample_variance = std::strtod(fields[5].c_str(), nullptr);
        s.t_stat = std::strtod(fields[6].c_str(), nullptr);
        s.p_value = std::strtod(fields[7].c_str(), nullptr);
        s.n_samples = std::stoll(fields[8]);
        s.degenerate = fields[9] == "1";
        report.pair_stats.push_back(s);
        report.config.methods.insert(s.method);
    }

    for (Method method : all_methods()) {
        if (!report.config.wants(method)) continue;
        std::vector<double> ps;
        Index degenerate = 0;
        for (const auto& s : report.pair_stats) {
            if (s.method != method) continue;
            if (s.degenerate) ++degenerate;
            else ps.push_back(s.p_value);
        }
        const Vector pvec =
            Eigen::Map<const Vector>(ps.data(), static_cast<Index>(ps.size()));
        const PValueHistogram hist = p_value_histogram(pvec, kHistogramBins);
        MethodSummary summary;
        summary.n_pairs = static_cast<Index>(ps.size()) + degenerate;
        summary.n_degenerate = degenerate;
        summary.low_noise_fraction = hist.low_noise_fraction;
        summary.mean_p =
            ps.empty() ? std::numeric_limits<double>::quiet_NaN() : pvec.mean();
        report.histograms[method] = hist;
        report.summaries[method] = summary;
    }
    for (PairStatisticKind kind :
         {PairStatisticKind::Mean, PairStatisticKind::StdDev, PairStatisticKind::PValue}) {
        report.correlations[kind] = build_correlation_report(report.pair_stats, kind);
    }
    return report;
}

}  // namespace btda::harness
