#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "scop/kg.hpp"

namespace scop {

/// 1 + (#candidates strictly above) + (#candidates tied). Ties count against
/// the true item so constant scorers cannot post inflated hits.
std::size_t rank_candidates(double true_score, std::span<const double> candidate_scores);

struct EvalReport {
    double mrr = 0;
    double hits1 = 0, hits3 = 0, hits10 = 0;  // percentages
    std::size_t queries = 0;

    std::string to_json() const;
    static EvalReport from_json(const std::string& text);
    /// "MRR, Hit@1, Hit@3, Hit@10" as "0.9208, 91.98, 95.10, 97.32".
    std::string table_row() const;
};

EvalReport compute_metrics(std::span<const std::size_t> ranks);

/// Expected MRR when the true item lands uniformly among `n` ranked items.
double random_ranking_mrr(std::size_t n);

using TripleScorer = std::function<double(const Triple&)>;

/// Filtered tail ranking: each query (h, r, t) is scored against (h, r, c) for
/// every candidate c != t with (h, r, c) not in `known`.
std::vector<std::size_t> rank_tails(std::span<const Triple> queries, std::span<const EntityId> candidates,
                                    const std::unordered_set<Triple, TripleHash>& known, const TripleScorer& score);

/// Ranks one split of a task dataset over its candidate pool, filtered by all
/// known positive pairs.
EvalReport evaluate_pairs(const TaskDataset& dataset, std::span<const TaskPair> pairs, const TripleScorer& score);

struct SweepReport {
    std::vector<double> gammas;    // percentages, ascending
    std::vector<double> accuracy;  // one per gamma, in [0,1]
    double max_score = 0, min_score = 0;

    std::string to_json() const;
    /// max - min accuracy across gammas, in percentage points.
    double spread_points() const;
};

/// Min-max normalization to [0,1]. Throws std::domain_error on constant input.
std::vector<double> normalize_scores(std::span<const double> scores);

/// Predicts positive iff normalized score >= gamma/100.
SweepReport margin_sweep(std::span<const double> scores, std::span<const int> labels, std::vector<double> gammas);

struct DistributionRecord {
    std::size_t index = 0;
    double score = 0;
    int label = 0;
};

/// Normalized scores in file form; the score stored is the value the CSV text
/// parses back to, so a re-import is exact.
std::vector<DistributionRecord> distribution_records(std::span<const double> scores, std::span<const int> labels);
std::vector<DistributionRecord> export_distribution(std::span<const double> scores, std::span<const int> labels,
                                                    const std::filesystem::path& path);
std::string format_distribution(std::span<const DistributionRecord> records);
std::vector<DistributionRecord> read_distribution(const std::filesystem::path& path);

}  // namespace scop
