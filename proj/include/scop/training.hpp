#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <unordered_set>
#include <vector>

#include "scop/context.hpp"
#include "scop/kg.hpp"
#include "scop/model.hpp"
#include "scop/optim.hpp"

namespace scop {

struct LabeledTriple {
    Triple triple;
    int label = 1;
};

struct StepRecord {
    std::uint64_t step = 0;
    double loss = 0;
    double lr = 0;
};

struct TrainOptions {
    Schedule schedule{};
    std::size_t batch_size = 32;
    NegativePolicy policy{};
    bool exclude_self = true;
    AdamConfig adam{};
};

/// Replaces the right element with a uniformly drawn pool member, avoiding
/// known positives for up to `max_resample` draws.
TaskPair sample_pair_negative(const TaskPair& pair, RelationId task_relation, std::span<const EntityId> pool,
                              const std::unordered_set<Triple, TripleHash>& known, Rng& rng,
                              std::size_t max_resample = 10);

/// Positives plus one negative each (from `make_negative`), shuffled.
template <class Negative>
std::vector<LabeledTriple> with_negatives(std::span<const Triple> positives, Rng& rng, Negative&& make_negative) {
    std::vector<LabeledTriple> out;
    out.reserve(2 * positives.size());
    for (const auto& t : positives) {
        out.push_back({t, 1});
        out.push_back({make_negative(t), 0});
    }
    std::shuffle(out.begin(), out.end(), rng);
    return out;
}

/// Forward (train mode) + backprop + one Adam update at lr_at(step).
/// Returns the batch loss before the update.
double train_step(ScopModel<float>& model, const KnowledgeGraph& context, std::span<const LabeledTriple> batch,
                  Head head, AdamState<float>& state, const Schedule& schedule, std::uint64_t step, Rng& rng,
                  bool exclude_self = true);

/// Owns the optimizer state and the random stream for one training run.
class ScopTrainer {
   public:
    ScopTrainer(ScopModel<float>& model, TrainOptions options, std::uint64_t seed);

    /// Triple classification over every graph triple with 1:1 corrupted
    /// negatives. `head` selects the pretraining or fine-tuning classifier.
    std::vector<StepRecord> triple_epoch(const KnowledgeGraph& kg, Head head);

    /// Pair classification over the training split; negatives replace the
    /// right element from the candidate pool.
    std::vector<StepRecord> pair_epoch(const KnowledgeGraph& context, const TaskDataset& dataset);

    std::vector<StepRecord> run_batches(const KnowledgeGraph& context, std::span<const LabeledTriple> examples, Head head);

    std::uint64_t step() const { return step_; }
    const NegativeStats& negative_stats() const { return negative_stats_; }

   private:
    ScopModel<float>& model_;
    TrainOptions options_;
    Rng rng_;
    AdamState<float> state_;
    std::uint64_t step_ = 0;
    NegativeStats negative_stats_;
};

/// Probability of the positive class for one triple, evaluation mode.
double positive_probability(const ScopModel<float>& model, const KnowledgeGraph& context, const Triple& t, Head head,
                            bool exclude_self = true);

/// Fraction of examples where (s_0 >= 0.5) matches the label.
double classification_accuracy(const ScopModel<float>& model, const KnowledgeGraph& context,
                               std::span<const LabeledTriple> examples, Head head, bool exclude_self = true);

}  // namespace scop
