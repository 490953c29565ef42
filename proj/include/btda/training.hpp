#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <utility>
#include <vector>

#include "btda/model.hpp"
#include "btda/rng.hpp"

namespace btda {

enum class Optimizer { Sgd, Adam };

struct TrainConfig {
    Optimizer optimizer = Optimizer::Adam;
    double learning_rate = 0.001;
    double weight_decay = 0.005;  // coupled L2 in the loss; must match ModelSpec.l2_coefficient
    Index batch_size = 32;
    Index epochs = 15;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    Index swa_window = 5;

    // The single-sample attribution step is a stateless SGD step regardless of
    // the training optimizer (see ats_step).
    static constexpr bool ats_uses_optimizer_state = false;

    void validate() const;
};

struct TrainTrajectory {
    std::uint64_t init_seed = 0;
    std::uint64_t batch_seed = 0;
    /// Last swa_window epoch-end parameter states, in epoch order (1-based epochs).
    std::vector<std::pair<Index, ParamVector>> checkpoints;
    ParamVector final_params;
    double final_train_loss = 0.0;
};

/// Glorot-uniform weights (+-sqrt(6/(fan_in+fan_out)) per layer), zero biases.
ParamVector initialize_params(const ModelSpec& spec, RngStream rng);

/// Fisher-Yates permutation of [0, n), a function of (rng seed, epoch) only —
/// never of loss weights, so original and counterfactual runs see identical
/// batch sequences.
IndexList shuffle_epoch(Index n, Index epoch, const RngStream& rng);

/// Deterministic mini-batch training. Batch gradient is
/// (sum_{i in batch} w_i grad l_i) / (sum w_i) + l2 * theta; an all-zero-weight
/// batch contributes only the L2 term. Throws DivergedTraining on a non-finite
/// final loss.
TrainTrajectory train(const ModelSpec& spec, const WeightedDataset& data,
                      const TrainConfig& config, std::uint64_t init_seed,
                      std::uint64_t batch_seed,
                      const std::optional<ParamVector>& init_override = std::nullopt);

/// theta_{+j} = theta - lr * (grad l_j(theta) + l2 * theta): one plain gradient
/// step on sample j at the training learning rate, no optimizer moment state.
/// lr = 0 is allowed (used by tests) and returns theta unchanged.
ParamVector ats_step(const ParamVector& params, const WeightedDataset& data, Index j,
                     const TrainConfig& config);

/// Checkpoint files: 16-byte header (magic "BTDA", u32 version, u64 param
/// count, little-endian) followed by the raw f64 parameter payload.
void save_checkpoint(const std::filesystem::path& path, const Vector& params);
Vector load_checkpoint(const std::filesystem::path& path);

}  // namespace btda
