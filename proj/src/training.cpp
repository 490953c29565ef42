#include "btda/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "btda/errors.hpp"

namespace btda {

namespace {

void write_u32_le(std::ostream& os, std::uint32_t v) {
    unsigned char buf[4];
    for (int i = 0; i < 4; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(buf), 4);
}

void write_u64_le(std::ostream& os, std::uint64_t v) {
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint32_t read_u32_le(std::istream& is) {
    unsigned char buf[4];
    is.read(reinterpret_cast<char*>(buf), 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[i]) << (8 * i);
    return v;
}

std::uint64_t read_u64_le(std::istream& is) {
    unsigned char buf[8];
    is.read(reinterpret_cast<char*>(buf), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
}

constexpr std::uint32_t kCheckpointVersion = 1;

// Accumulates the weight-scaled batch gradient in place; shared by SGD/Adam.
Vector batch_gradient(const ParamVector& params, const WeightedDataset& data,
                      const IndexList& batch) {
    return loss_gradient(params, data, batch);
}

}  // namespace

void TrainConfig::validate() const {
    if (learning_rate <= 0.0) throw std::invalid_argument("TrainConfig: learning_rate must be > 0");
    if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
    if (swa_window < 1 || epochs < swa_window) {
        throw std::invalid_argument("TrainConfig: requires epochs >= swa_window >= 1");
    }
    if (weight_decay < 0.0) throw std::invalid_argument("TrainConfig: weight_decay must be >= 0");
}

ParamVector initialize_params(const ModelSpec& spec, RngStream rng) {
    spec.validate();
    ParamVector out{Vector::Zero(spec.param_count()), spec};

    const auto fill_layer = [&rng](double* w, Index rows, Index cols) {
        const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
        for (Index k = 0; k < rows * cols; ++k) w[k] = rng.uniform(-bound, bound);
    };

    const Index d = spec.input_dim, c = spec.num_classes;
    if (spec.kind == ModelKind::LogisticRegression) {
        fill_layer(out.values.data(), c, d);  // bias block stays zero
    } else {
        const Index h = spec.hidden_dim;
        fill_layer(out.values.data(), h, d);
        fill_layer(out.values.data() + h * d + h, c, h);
    }
    return out;
}

IndexList shuffle_epoch(Index n, Index epoch, const RngStream& rng) {
    if (n < 1) throw std::invalid_argument("shuffle_epoch: n must be >= 1");
    RngStream s = rng.substream(static_cast<std::uint64_t>(epoch));
    IndexList perm = all_indices(n);
    for (Index i = n - 1; i > 0; --i) {
        const Index j = static_cast<Index>(s.below(static_cast<std::uint64_t>(i) + 1));
        std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
    }
    return perm;
}

TrainTrajectory train(const ModelSpec& spec, const WeightedDataset& data,
                      const TrainConfig& config, std::uint64_t init_seed,
                      std::uint64_t batch_seed,
                      const std::optional<ParamVector>& init_override) {
    spec.validate();
    config.validate();
    data.validate(spec.num_classes);
    if (spec.l2_coefficient != config.weight_decay) {
        throw ConfigError("train: ModelSpec.l2_coefficient must equal TrainConfig.weight_decay");
    }

    ParamVector theta = init_override ? *init_override
                                      : initialize_params(spec, RngStream(init_seed, 0));
    if (init_override && init_override->spec != spec) {
        throw std::invalid_argument("train: init_override spec mismatch");
    }

    const Index n = data.size();
    const Index p = spec.param_count();

    Vector m = Vector::Zero(p);
    Vector v = Vector::Zero(p);
    Index adam_step = 0;

    TrainTrajectory traj;
    traj.init_seed = init_seed;
    traj.batch_seed = batch_seed;

    const RngStream batch_rng(batch_seed, 0);
    for (Index epoch = 1; epoch <= config.epochs; ++epoch) {
        const IndexList perm = shuffle_epoch(n, epoch, batch_rng);
        for (Index start = 0; start < n; start += config.batch_size) {
            const Index stop = std::min(n, start + config.batch_size);
            const IndexList batch(perm.begin() + start, perm.begin() + stop);
            const Vector g = batch_gradient(theta, data, batch);

            if (config.optimizer == Optimizer::Sgd) {
                theta.values -= config.learning_rate * g;
            } else {
                ++adam_step;
                m = config.adam_beta1 * m + (1.0 - config.adam_beta1) * g;
                v = config.adam_beta2 * v + (1.0 - config.adam_beta2) * g.cwiseAbs2();
                const double bc1 = 1.0 - std::pow(config.adam_beta1, adam_step);
                const double bc2 = 1.0 - std::pow(config.adam_beta2, adam_step);
                theta.values.array() -=
                    config.learning_rate * (m.array() / bc1) /
                    ((v.array() / bc2).sqrt() + config.adam_eps);
            }
        }
        if (epoch > config.epochs - config.swa_window) {
            traj.checkpoints.emplace_back(epoch, theta);
        }
    }

    traj.final_params = theta;
    traj.final_train_loss = training_objective(theta, data);
    if (!std::isfinite(traj.final_train_loss)) {
        throw DivergedTraining("train: non-finite final training loss");
    }
    return traj;
}

ParamVector ats_step(const ParamVector& params, const WeightedDataset& data, Index j,
                     const TrainConfig& config) {
    if (j < 0 || j >= data.size()) throw std::out_of_range("ats_step: bad sample index");
    if (config.learning_rate == 0.0) return params;  // test hook: tau_ATS = 0

    const Sample s = data.sample(j);
    const Vector g = sample_gradient(params, s.features, s.label) +
                     params.spec.l2_coefficient * params.values;
    ParamVector out = params;
    out.values -= config.learning_rate * g;
    return out;
}

void save_checkpoint(const std::filesystem::path& path, const Vector& params) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("save_checkpoint: cannot open " + path.string());
    os.write("BTDA", 4);
    write_u32_le(os, kCheckpointVersion);
    write_u64_le(os, static_cast<std::uint64_t>(params.size()));
    for (Index i = 0; i < params.size(); ++i) {
        std::uint64_t bits;
        std::memcpy(&bits, &params(i), 8);
        write_u64_le(os, bits);
    }
    if (!os) throw std::runtime_error("save_checkpoint: write failed for " + path.string());
}

Vector load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_checkpoint: cannot open " + path.string());
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "BTDA", 4) != 0) {
        throw std::runtime_error("load_checkpoint: bad magic in " + path.string());
    }
    const std::uint32_t version = read_u32_le(is);
    if (version != kCheckpointVersion) {
        throw std::runtime_error("load_checkpoint: unsupported version");
    }
    const std::uint64_t count = read_u64_le(is);
    Vector out(static_cast<Index>(count));
    for (std::uint64_t i = 0; i < count; ++i) {
        const std::uint64_t bits = read_u64_le(is);
        double d;
        std::memcpy(&d, &bits, 8);
        out(static_cast<Index>(i)) = d;
    }
    if (!is) throw std::runtime_error("load_checkpoint: truncated file " + path.string());
    return out;
}

}  // namespace btda
