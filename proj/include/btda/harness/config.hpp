#pragma once

#include <filesystem>
#include <set>
#include <string>

#include "btda/attribution.hpp"
#include "btda/harness/dataset.hpp"
#include "btda/posterior.hpp"
#include "btda/training.hpp"

namespace btda::harness {

enum class DatasetKind { Blobs, IdxFile };

/// Full experiment description. On disk this is a flat `key = value` document
/// with `#` comments; parse and serialize round-trip losslessly.
struct ExperimentConfig {
    DatasetKind dataset = DatasetKind::Blobs;
    BlobsConfig blobs;
    IdxConfig idx;

    ModelKind model_kind = ModelKind::Mlp;
    Index hidden_dim = 16;

    TrainConfig training;
    RandomnessRegime regime;

    std::set<Method> methods = {Method::Loo, Method::Ats, Method::If, Method::GradDot,
                                Method::GradCos, Method::TracIn};
    double if_damping = 0.005;
    std::filesystem::path output_dir = "out";

    bool wants(Method m) const { return methods.count(m) > 0; }
    /// Trainings this run will launch: t_de per posterior, one posterior plus
    /// one counterfactual per train sample when LOO is requested.
    Index implied_training_count(Index n_train) const;
    void validate() const;
};

ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config_file(const std::filesystem::path& path);

/// Canonical on-disk form (sorted keys, full precision).
std::string serialize_config(const ExperimentConfig& config);

/// FNV-1a over the canonical form, as 16 hex digits; embedded in every output.
std::string config_hash(const ExperimentConfig& config);

}  // namespace btda::harness
