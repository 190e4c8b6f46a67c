#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "scop/checkpoint.hpp"
#include "scop/kg.hpp"
#include "scop/optim.hpp"
#include "scop/training.hpp"

namespace scop {

enum class BaselineKind { TransE, ComplEx, RotatE };

std::string_view baseline_name(BaselineKind kind);
BaselineKind parse_baseline(std::string_view name);

/// Score-function embedding model. Tables:
///   TransE  entity [E x d]   relation [R x d]
///   ComplEx entity [E x 2d]  relation [R x 2d]   (real half | imaginary half)
///   RotatE  entity [E x 2d]  relation [R x d]    (phases)
class BaselineModel {
   public:
    BaselineModel(BaselineKind kind, std::size_t entities, std::size_t relations, std::size_t dim);

    BaselineModel(BaselineModel&&) noexcept = default;
    BaselineModel& operator=(BaselineModel&&) noexcept = default;

    /// TransE and ComplEx: N(0, std). RotatE: entities N(0, std), phases U[0, 2pi).
    void initialize(Rng& rng, double std);

    BaselineKind kind() const { return kind_; }
    std::size_t dim() const { return dim_; }
    std::size_t entity_count() const { return entities_; }
    std::size_t relation_count() const { return relations_; }
    ParameterSet<float>& parameters() { return params_; }
    const ParameterSet<float>& parameters() const { return params_; }
    const Tensor& entity_table() const { return entity_; }
    const Tensor& relation_table() const { return relation_; }

    /// Direct-formula score in double precision; higher is more plausible.
    double score(const Triple& t) const;
    /// Differentiable scores for a batch -> [B x 1].
    Tensor score_batch(std::span<const Triple> triples) const;

   private:
    BaselineKind kind_;
    std::size_t entities_, relations_, dim_;
    ParameterSet<float> params_;
    Tensor entity_, relation_;
};

/// -||h + r - t||_2
double transe_score(const BaselineModel& m, const Triple& t);
/// Re(sum_i h_i r_i conj(t_i))
double complex_score(const BaselineModel& m, const Triple& t);
/// -||h o r - t||_2 over the complex vector, r_i = exp(i phase_i)
double rotate_score(const BaselineModel& m, const Triple& t);

/// Mean logistic loss: softplus(-s) for positives, softplus(s) for negatives.
Tensor logistic_loss(const Tensor& scores, std::span<const int> labels);

class BaselineTrainer {
   public:
    BaselineTrainer(BaselineModel& model, TrainOptions options, std::uint64_t seed);

    /// -pr: one pass over the graph triples with 1:1 filtered negatives.
    std::vector<StepRecord> graph_epoch(const KnowledgeGraph& kg);
    /// -ft: one pass over the training pairs rendered as (left, task_relation, right).
    std::vector<StepRecord> pair_epoch(const TaskDataset& dataset);

    std::uint64_t step() const { return step_; }

   private:
    std::vector<StepRecord> run_batches(std::span<const LabeledTriple> examples);

    BaselineModel& model_;
    TrainOptions options_;
    Rng rng_;
    AdamState<float> state_;
    std::uint64_t step_ = 0;
    NegativeStats negative_stats_;
};

void save_baseline(const std::filesystem::path& path, const BaselineModel& model,
                   const std::map<std::string, std::string>& extra = {});
BaselineModel baseline_from_checkpoint(const Checkpoint& ckpt);

}  // namespace scop
