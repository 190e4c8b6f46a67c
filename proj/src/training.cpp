#include "scop/training.hpp"

#include <algorithm>
#include <stdexcept>

namespace scop {

TaskPair sample_pair_negative(const TaskPair& pair, RelationId task_relation, std::span<const EntityId> pool,
                              const std::unordered_set<Triple, TripleHash>& known, Rng& rng,
                              std::size_t max_resample) {
    if (pool.size() < 2) throw std::invalid_argument("pair negatives need a candidate pool of at least 2 entities");
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    TaskPair candidate = pair;
    candidate.label = 0;
    for (std::size_t i = 0; i < std::max<std::size_t>(1, max_resample); ++i) {
        do {
            candidate.right = pool[pick(rng)];
        } while (candidate.right == pair.right);
        if (!known.contains({candidate.left, task_relation, candidate.right})) break;
    }
    return candidate;
}

double train_step(ScopModel<float>& model, const KnowledgeGraph& context, std::span<const LabeledTriple> batch,
                  Head head, AdamState<float>& state, const Schedule& schedule, std::uint64_t step, Rng& rng,
                  bool exclude_self) {
    if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
    std::vector<Tensor> scores;
    std::vector<int> labels;
    scores.reserve(batch.size());
    for (const auto& ex : batch) {
        auto seq = assemble_sequence(context, ex.triple, model.config().caps, exclude_self, rng, Mode::Train);
        scores.push_back(model.score(seq, head, &rng));
        labels.push_back(ex.label);
    }
    auto loss = compute_loss(concat_rows(scores), labels);
    model.parameters().zero_grad();
    backprop(loss);
    adam_step(model.parameters(), state, lr_at(step, schedule));
    return loss.item();
}

ScopTrainer::ScopTrainer(ScopModel<float>& model, TrainOptions options, std::uint64_t seed)
    : model_(model), options_(options), rng_(seed), state_(model.parameters(), options.adam) {
    options_.schedule.validate();
    options_.policy.validate();
    if (options_.batch_size == 0) throw std::invalid_argument("batch size must be positive");
}

std::vector<StepRecord> ScopTrainer::run_batches(const KnowledgeGraph& context, std::span<const LabeledTriple> examples,
                                                 Head head) {
    std::vector<StepRecord> log;
    for (std::size_t start = 0; start < examples.size(); start += options_.batch_size) {
        auto n = std::min(options_.batch_size, examples.size() - start);
        ++step_;
        double loss = train_step(model_, context, examples.subspan(start, n), head, state_, options_.schedule, step_,
                                 rng_, options_.exclude_self);
        log.push_back({step_, loss, lr_at(step_, options_.schedule)});
    }
    return log;
}

std::vector<StepRecord> ScopTrainer::triple_epoch(const KnowledgeGraph& kg, Head head) {
    auto examples = with_negatives(std::span<const Triple>(kg.triples()), rng_, [&](const Triple& t) {
        return sample_negative(kg, t, options_.policy, rng_, &negative_stats_);
    });
    return run_batches(kg, examples, head);
}

std::vector<StepRecord> ScopTrainer::pair_epoch(const KnowledgeGraph& context, const TaskDataset& dataset) {
    auto known = dataset.known_positives();
    std::vector<Triple> positives;
    for (const auto& p : dataset.train) positives.push_back(dataset.as_triple(p));
    auto examples = with_negatives(std::span<const Triple>(positives), rng_, [&](const Triple& t) {
        auto neg = sample_pair_negative({t.head, t.tail, 1}, dataset.task_relation, dataset.candidate_pool, known, rng_,
                                        options_.policy.max_resample);
        return dataset.as_triple(neg);
    });
    return run_batches(context, examples, Head::Finetune);
}

double positive_probability(const ScopModel<float>& model, const KnowledgeGraph& context, const Triple& t, Head head,
                            bool exclude_self) {
    Rng unused(0);
    auto seq = assemble_sequence(context, t, model.config().caps, exclude_self, unused, Mode::Eval);
    return model.score(seq, head, nullptr)[0];
}

double classification_accuracy(const ScopModel<float>& model, const KnowledgeGraph& context,
                               std::span<const LabeledTriple> examples, Head head, bool exclude_self) {
    if (examples.empty()) return 0.0;
    std::size_t correct = 0;
    for (const auto& ex : examples) {
        bool predicted = positive_probability(model, context, ex.triple, head, exclude_self) >= 0.5;
        if (predicted == (ex.label == 1)) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(examples.size());
}

}  // namespace scop
