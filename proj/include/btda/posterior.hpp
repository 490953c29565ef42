#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "btda/training.hpp"

namespace btda {

enum class RegimeKind { DeInit, DeBatch };

struct RandomnessRegime {
    RegimeKind kind = RegimeKind::DeInit;
    Index t_de = 10;
    Index t_swa = 5;
    std::uint64_t master_seed = 0;
    /// DE-Init ablation: hold the batch seed fixed across members so only the
    /// initialization varies.
    bool pin_batch_seed = false;

    Index total_samples() const { return t_de * t_swa; }
    void validate() const;
};

/// (init_seed, batch_seed) for ensemble member m. DE-Init varies both per
/// member (unless pinned); DE-Batch fixes the init seed at member 0's.
std::pair<std::uint64_t, std::uint64_t> member_seeds(const RandomnessRegime& regime,
                                                     Index member);

struct PosteriorSample {
    Index member_id = 0;
    Index checkpoint_epoch = 0;
    ParamVector params;
};

struct PosteriorSampleSet {
    RandomnessRegime regime;
    /// t_de * t_swa samples, ordered by (member_id, checkpoint_epoch).
    std::vector<PosteriorSample> samples;
    std::optional<Index> removed_index;
    /// (init_seed, batch_seed) actually used per member; pairing evidence.
    std::vector<std::pair<std::uint64_t, std::uint64_t>> seeds_used;

    void validate() const;
};

/// Runs t_de independent trainings and collects the last t_swa epoch-end
/// checkpoints of each. Seed derivation is identical whether or not
/// removed_index is set, which is what makes the pairing matched. Training
/// failures surface as DivergedTraining with the member id attached.
PosteriorSampleSet sample_posterior(const ModelSpec& spec, const WeightedDataset& data,
                                    const TrainConfig& config,
                                    const RandomnessRegime& regime,
                                    std::optional<Index> removed_index = std::nullopt,
                                    Index workers = 1);

struct MatchedPair {
    Index original_pos = 0;
    Index counterfactual_pos = 0;
    Index member_id = 0;
    Index checkpoint_epoch = 0;
};

/// Pairs samples by identical (member_id, checkpoint_epoch), sorted by that
/// key. Throws MismatchedSampleSets if the key sets differ or the
/// counterfactual lacks a removed index.
std::vector<MatchedPair> matched_pairs(const PosteriorSampleSet& original,
                                       const PosteriorSampleSet& counterfactual);

/// Keeps only the last t_swa checkpoints of each member (SWA-count ablation).
PosteriorSampleSet restrict_swa(const PosteriorSampleSet& set, Index t_swa);

/// Sample positions sorted by (member_id, checkpoint_epoch); the canonical
/// sample index t used everywhere downstream.
std::vector<Index> canonical_positions(const PosteriorSampleSet& set);

}  // namespace btda
