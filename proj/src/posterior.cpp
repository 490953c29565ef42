#include "btda/posterior.hpp"

#include <algorithm>
#include <map>
#include <string>

#include "btda/errors.hpp"
#include "btda/parallel.hpp"

namespace btda {

void RandomnessRegime::validate() const {
    if (t_de < 1 || t_swa < 1) {
        throw std::invalid_argument("RandomnessRegime: t_de and t_swa must be >= 1");
    }
}

std::pair<std::uint64_t, std::uint64_t> member_seeds(const RandomnessRegime& regime,
                                                     Index member) {
    const auto m = static_cast<std::uint64_t>(member);
    std::uint64_t init_index = 0;
    std::uint64_t batch_index = m;
    if (regime.kind == RegimeKind::DeInit) {
        init_index = m;
        if (regime.pin_batch_seed) batch_index = 0;
    }
    return {derive_seed(regime.master_seed, "init", init_index),
            derive_seed(regime.master_seed, "batch", batch_index)};
}

void PosteriorSampleSet::validate() const {
    regime.validate();
    if (static_cast<Index>(samples.size()) != regime.total_samples()) {
        throw std::invalid_argument("PosteriorSampleSet: wrong sample count");
    }
    std::map<std::pair<Index, Index>, int> seen;
    for (const auto& s : samples) {
        if (++seen[{s.member_id, s.checkpoint_epoch}] > 1) {
            throw std::invalid_argument("PosteriorSampleSet: duplicate (member, epoch)");
        }
        if (!(s.params.spec == samples.front().params.spec)) {
            throw std::invalid_argument("PosteriorSampleSet: mixed model specs");
        }
    }
}

PosteriorSampleSet sample_posterior(const ModelSpec& spec, const WeightedDataset& data,
                                    const TrainConfig& config,
                                    const RandomnessRegime& regime,
                                    std::optional<Index> removed_index, Index workers) {
    regime.validate();
    if (config.swa_window != regime.t_swa) {
        throw ConfigError("sample_posterior: TrainConfig.swa_window must equal t_swa");
    }

    WeightedDataset effective = data;
    if (removed_index) {
        if (*removed_index < 0 || *removed_index >= data.size()) {
            throw std::out_of_range("sample_posterior: removed_index out of range");
        }
        effective.loss_weights(*removed_index) = 0.0;
    }

    std::vector<TrainTrajectory> runs(static_cast<std::size_t>(regime.t_de));
    std::vector<std::pair<std::uint64_t, std::uint64_t>> seeds(
        static_cast<std::size_t>(regime.t_de));

    parallel_for(regime.t_de, worker_count(workers), [&](Index m) {
        const auto [init_seed, batch_seed] = member_seeds(regime, m);
        seeds[static_cast<std::size_t>(m)] = {init_seed, batch_seed};
        try {
            runs[static_cast<std::size_t>(m)] =
                btda::train(spec, effective, config, init_seed, batch_seed);
        } catch (const DivergedTraining& e) {
            throw DivergedTraining("member " + std::to_string(m) + ": " + e.what());
        }
    });

    PosteriorSampleSet set;
    set.regime = regime;
    set.removed_index = removed_index;
    set.seeds_used = std::move(seeds);
    set.samples.reserve(static_cast<std::size_t>(regime.total_samples()));
    for (Index m = 0; m < regime.t_de; ++m) {
        for (const auto& [epoch, params] : runs[static_cast<std::size_t>(m)].checkpoints) {
            set.samples.push_back({m, epoch, params});
        }
    }
    set.validate();
    return set;
}

std::vector<MatchedPair> matched_pairs(const PosteriorSampleSet& original,
                                       const PosteriorSampleSet& counterfactual) {
    if (!counterfactual.removed_index) {
        throw MismatchedSampleSets("matched_pairs: counterfactual has no removed index");
    }
    if (original.regime.kind != counterfactual.regime.kind ||
        original.samples.size() != counterfactual.samples.size()) {
        throw MismatchedSampleSets("matched_pairs: regimes or sizes differ");
    }

    std::map<std::pair<Index, Index>, Index> cf_pos;
    for (std::size_t i = 0; i < counterfactual.samples.size(); ++i) {
        const auto& s = counterfactual.samples[i];
        cf_pos[{s.member_id, s.checkpoint_epoch}] = static_cast<Index>(i);
    }

    std::map<std::pair<Index, Index>, Index> orig_pos;
    for (std::size_t i = 0; i < original.samples.size(); ++i) {
        const auto& s = original.samples[i];
        orig_pos[{s.member_id, s.checkpoint_epoch}] = static_cast<Index>(i);
    }

    std::vector<MatchedPair> pairs;
    pairs.reserve(original.samples.size());
    for (const auto& [key, opos] : orig_pos) {
        const auto it = cf_pos.find(key);
        if (it == cf_pos.end()) {
            throw MismatchedSampleSets("matched_pairs: keys differ between sets");
        }
        pairs.push_back({opos, it->second, key.first, key.second});
    }
    return pairs;
}

std::vector<Index> canonical_positions(const PosteriorSampleSet& set) {
    std::map<std::pair<Index, Index>, Index> by_key;
    for (std::size_t i = 0; i < set.samples.size(); ++i) {
        const auto& s = set.samples[i];
        by_key[{s.member_id, s.checkpoint_epoch}] = static_cast<Index>(i);
    }
    std::vector<Index> order;
    order.reserve(by_key.size());
    for (const auto& [key, pos] : by_key) order.push_back(pos);
    return order;
}

PosteriorSampleSet restrict_swa(const PosteriorSampleSet& set, Index t_swa) {
    if (t_swa < 1 || t_swa > set.regime.t_swa) {
        throw std::invalid_argument("restrict_swa: t_swa out of range");
    }
    PosteriorSampleSet out;
    out.regime = set.regime;
    out.regime.t_swa = t_swa;
    out.removed_index = set.removed_index;
    out.seeds_used = set.seeds_used;

    std::map<Index, std::vector<PosteriorSample>> by_member;
    for (const auto& s : set.samples) by_member[s.member_id].push_back(s);
    for (auto& [member, samples] : by_member) {
        std::sort(samples.begin(), samples.end(), [](const auto& a, const auto& b) {
            return a.checkpoint_epoch < b.checkpoint_epoch;
        });
        for (std::size_t i = samples.size() - static_cast<std::size_t>(t_swa);
             i < samples.size(); ++i) {
            out.samples.push_back(samples[i]);
        }
    }
    out.validate();
    return out;
}

}  // namespace btda
