// Command-line front end: run experiments, regenerate plots, sweep dataset
// sizes, validate configs.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <unistd.h>

#include "btda/errors.hpp"
#include "btda/harness/config.hpp"
#include "btda/harness/experiment.hpp"
#include "btda/harness/plots.hpp"

namespace {

using namespace btda;
using namespace btda::harness;

Index dataset_train_size(const ExperimentConfig& cfg) {
    if (cfg.dataset == DatasetKind::Blobs) {
        const auto& counts = cfg.blobs.train_per_class;
        if (counts.size() == 1) return counts[0] * cfg.blobs.classes;
        Index n = 0;
        for (Index c : counts) n += c;
        return n;
    }
    const Index classes = cfg.idx.keep_classes.empty()
                              ? -1
                              : static_cast<Index>(cfg.idx.keep_classes.size());
    return classes < 0 ? -1 : classes * cfg.idx.per_class_train;
}

bool confirm_or_abort(const ExperimentConfig& cfg, bool assume_yes) {
    const Index n = dataset_train_size(cfg);
    const Index planned = n >= 0 ? cfg.implied_training_count(n) : -1;
    if (planned >= 0) {
        std::cout << "planned trainings: " << planned << " (t_de = " << cfg.regime.t_de
                  << (cfg.wants(Method::Loo)
                          ? ", LOO sweep over " + std::to_string(n) + " train samples"
                          : ", estimator-only")
                  << ")\n";
    }
    if (planned <= 5000 || assume_yes) return true;
    if (!isatty(fileno(stdin))) {
        std::cerr << "error: " << planned
                  << " trainings exceed 5000; re-run with --yes to confirm\n";
        return false;
    }
    std::cout << "proceed? [y/N] " << std::flush;
    std::string answer;
    std::getline(std::cin, answer);
    return answer == "y" || answer == "Y" || answer == "yes";
}

ExperimentConfig config_for_size(ExperimentConfig cfg, Index n_train) {
    if (cfg.dataset == DatasetKind::Blobs) {
        const Index classes = cfg.blobs.classes;
        std::vector<Index> counts(static_cast<std::size_t>(classes), n_train / classes);
        for (Index c = 0; c < n_train % classes; ++c) ++counts[static_cast<std::size_t>(c)];
        cfg.blobs.train_per_class = counts;
    } else {
        if (cfg.idx.keep_classes.empty()) {
            throw ConfigError("sweep-size over idx needs idx.keep_classes");
        }
        const Index classes = static_cast<Index>(cfg.idx.keep_classes.size());
        if (n_train % classes != 0) {
            throw ConfigError("sweep-size: idx sizes must be divisible by the class count");
        }
        cfg.idx.per_class_train = n_train / classes;
    }
    return cfg;
}

int cmd_run(const std::string& config_path, bool yes, bool resume,
            const std::string& methods_override, const std::string& regime_override,
            const std::string& output_override, Index workers) {
    ExperimentConfig cfg = parse_config_file(config_path);
    if (!methods_override.empty()) {
        cfg.methods.clear();
        std::stringstream ss(methods_override);
        std::string item;
        while (std::getline(ss, item, ',')) cfg.methods.insert(method_from_name(item));
    }
    if (!regime_override.empty()) {
        if (regime_override == "de_init") cfg.regime.kind = RegimeKind::DeInit;
        else if (regime_override == "de_batch") cfg.regime.kind = RegimeKind::DeBatch;
        else throw ConfigError("--regime: expected de_init|de_batch");
    }
    if (!output_override.empty()) cfg.output_dir = output_override;
    cfg.validate();

    if (!confirm_or_abort(cfg, yes || resume)) return 2;

    RunOptions opts;
    opts.resume = resume;
    opts.assume_yes = true;  // gate handled above
    opts.workers = workers;
    const ExperimentReport report = run_experiment(cfg, opts);

    std::cout << "report written to " << cfg.output_dir.string() << "\n";
    for (const auto& [method, summary] : report.summaries) {
        std::printf("  %-7s mean p = %.4f  frac(p<0.05) = %.4f  (%lld pairs)\n",
                    method_name(method), summary.mean_p, summary.low_noise_fraction,
                    static_cast<long long>(summary.n_pairs));
    }
    return 0;
}

int cmd_plot(const std::string& report_dir) {
    const ExperimentReport report = load_report(report_dir);
    emit_plots(report, report_dir);
    std::cout << "plots regenerated in " << report_dir << "\n";
    return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& sizes_csv, bool yes,
              Index workers) {
    ExperimentConfig base = parse_config_file(config_path);
    std::vector<Index> sizes;
    {
        std::stringstream ss(sizes_csv);
        std::string item;
        while (std::getline(ss, item, ',')) sizes.push_back(std::stoll(item));
    }
    if (sizes.empty()) throw ConfigError("sweep-size: no sizes given");

    std::vector<std::pair<Index, std::map<Method, double>>> mean_p_by_size;
    nlohmann::json summary;
    for (Index n : sizes) {
        ExperimentConfig cfg = config_for_size(base, n);
        cfg.output_dir = base.output_dir / ("size_" + std::to_string(n));
        cfg.validate();
        if (!confirm_or_abort(cfg, yes)) return 2;

        RunOptions opts;
        opts.assume_yes = true;
        opts.workers = workers;
        const ExperimentReport report = run_experiment(cfg, opts);

        std::map<Method, double> mean_p;
        nlohmann::json row;
        for (const auto& [method, s] : report.summaries) {
            mean_p[method] = s.mean_p;
            row[method_name(method)] = s.mean_p;
        }
        summary[std::to_string(n)] = row;
        mean_p_by_size.emplace_back(n, std::move(mean_p));
    }

    std::filesystem::create_directories(base.output_dir);
    emit_size_sweep_chart(mean_p_by_size, base.output_dir / "sweep_meanp.svg");
    std::ofstream os(base.output_dir / "sweep_summary.json");
    os << summary.dump(2) << "\n";
    std::cout << "sweep summary in " << base.output_dir.string() << "\n";
    return 0;
}

int cmd_validate(const std::string& config_path) {
    const ExperimentConfig cfg = parse_config_file(config_path);
    std::cout << serialize_config(cfg);
    std::cout << "# config_hash = " << config_hash(cfg) << "\n";
    const Index n = dataset_train_size(cfg);
    if (n >= 0) {
        std::cout << "# implied trainings = " << cfg.implied_training_count(n) << "\n";
    } else {
        std::cout << "# implied trainings depend on the idx file contents\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bayesian training data attribution experiments"};
    app.require_subcommand(1);

    std::string config_path, report_dir, methods, regime, output, sizes;
    bool yes = false, resume = false;
    Index workers = 0;

    auto* run = app.add_subcommand("run", "run an experiment from a config file");
    run->add_option("config", config_path, "config file")->required();
    run->add_flag("--yes", yes, "confirm large training counts");
    run->add_flag("--resume", resume, "reuse completed trainings in output_dir");
    run->add_option("--methods", methods, "comma list overriding configured methods");
    run->add_option("--regime", regime, "override randomness regime (de_init|de_batch)");
    run->add_option("--output", output, "override output directory");
    run->add_option("--workers", workers, "worker pool size (default BTDA_WORKERS)");

    auto* plot = app.add_subcommand("plot", "regenerate SVG plots from a report dir");
    plot->add_option("report_dir", report_dir, "directory with pair_stats.csv")->required();

    auto* sweep = app.add_subcommand("sweep-size", "run the experiment at several N");
    sweep->add_option("config", config_path, "config file")->required();
    sweep->add_option("--sizes", sizes, "comma list of training set sizes")->required();
    sweep->add_flag("--yes", yes, "confirm large training counts");
    sweep->add_option("--workers", workers, "worker pool size");

    auto* validate = app.add_subcommand("validate-config", "parse and echo a config");
    validate->add_option("config", config_path, "config file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(config_path, yes, resume, methods, regime, output, workers);
        if (plot->parsed()) return cmd_plot(report_dir);
        if (sweep->parsed()) return cmd_sweep(config_path, sizes, yes, workers);
        if (validate->parsed()) return cmd_validate(config_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
