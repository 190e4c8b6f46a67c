#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace scop {

using Rng = std::mt19937_64;
using EntityId = std::uint32_t;
using RelationId = std::uint32_t;

struct Triple {
    EntityId head = 0;
    RelationId relation = 0;
    EntityId tail = 0;

    friend bool operator==(const Triple&, const Triple&) = default;
    friend auto operator<=>(const Triple&, const Triple&) = default;
};

struct TripleHash {
    std::size_t operator()(const Triple& t) const noexcept {
        std::uint64_t h = 1469598103934665603ull;
        for (std::uint32_t v : {t.head, t.relation, t.tail}) {
            h ^= v;
            h *= 1099511628211ull;
        }
        return static_cast<std::size_t>(h);
    }
};

/// Malformed input file; carries the 1-based line number when known.
class ParseError : public std::runtime_error {
   public:
    ParseError(const std::string& what, std::size_t line)
        : std::runtime_error(what), line_(line) {}
    std::size_t line() const { return line_; }

   private:
    std::size_t line_;
};

/// Bidirectional name <-> dense id map. Ids are assigned in insertion order.
class Vocabulary {
   public:
    std::uint32_t intern(std::string_view name);
    std::optional<std::uint32_t> find(std::string_view name) const;
    const std::string& name(std::uint32_t id) const { return names_.at(id); }
    std::size_t size() const { return names_.size(); }
    const std::vector<std::string>& names() const { return names_; }

   private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, std::uint32_t> ids_;
};

/// Immutable triple store with per-entity and per-relation incidence lists.
class KnowledgeGraph {
   public:
    KnowledgeGraph() = default;

    /// Builds the indices. Duplicate triples are collapsed; the number dropped
    /// is available through duplicate_count().
    KnowledgeGraph(Vocabulary entities, Vocabulary relations, std::vector<Triple> triples);

    std::size_t entity_count() const { return entities_.size(); }
    std::size_t relation_count() const { return relations_.size(); }
    std::size_t size() const { return triples_.size(); }
    std::size_t duplicate_count() const { return duplicates_; }

    const Vocabulary& entities() const { return entities_; }
    const Vocabulary& relations() const { return relations_; }
    const std::vector<Triple>& triples() const { return triples_; }
    const Triple& triple(std::size_t index) const { return triples_.at(index); }

    /// Triple indices (ascending) where e is head or tail.
    const std::vector<std::size_t>& by_entity(EntityId e) const;
    /// Triple indices (ascending) with relation r.
    const std::vector<std::size_t>& by_relation(RelationId r) const;

    bool contains(const Triple& t) const;

    /// C(e) minus `exclude`, ascending triple-index order.
    std::vector<Triple> entity_context(EntityId e,
                                       const std::optional<Triple>& exclude = std::nullopt) const;
    /// C(r) minus `exclude`, ascending triple-index order.
    std::vector<Triple> relation_context(RelationId r,
                                         const std::optional<Triple>& exclude = std::nullopt) const;

    void check(const Triple& t) const;
    void check_entity(EntityId e) const;
    void check_relation(RelationId r) const;

    /// Same vocabularies, with every triple for which `drop` returns true removed.
    KnowledgeGraph without(const std::function<bool(const Triple&)>& drop) const;

   private:
    Vocabulary entities_;
    Vocabulary relations_;
    std::vector<Triple> triples_;
    std::vector<std::vector<std::size_t>> by_entity_;
    std::vector<std::vector<std::size_t>> by_relation_;
    std::unordered_set<Triple, TripleHash> membership_;
    std::size_t duplicates_ = 0;
};

/// Reads `head<TAB>relation<TAB>tail` lines. When vocabularies are given they
/// seed the id assignment; unseen names are appended after them.
KnowledgeGraph load_triples(const std::filesystem::path& path,
                            const Vocabulary* entity_seed = nullptr,
                            const Vocabulary* relation_seed = nullptr);
KnowledgeGraph parse_triples(std::string_view text, const Vocabulary* entity_seed = nullptr,
                             const Vocabulary* relation_seed = nullptr);

void write_triples(const std::filesystem::path& path, const KnowledgeGraph& kg,
                   const std::vector<Triple>& triples);
void write_vocabulary(const std::filesystem::path& path, const Vocabulary& vocab);
Vocabulary load_vocabulary(const std::filesystem::path& path);

struct NegativePolicy {
    double corrupt_head_prob = 0.4;
    double corrupt_tail_prob = 0.4;
    double corrupt_relation_prob = 0.2;
    bool filter_known = true;
    std::size_t max_resample = 10;

    void validate() const;
};

struct NegativeStats {
    std::size_t draws = 0;
    std::size_t exhausted = 0;
};

/// Corrupts exactly one slot of `t`. With filter_known, retries up to
/// max_resample times to avoid known triples; on exhaustion the last
/// candidate is returned and stats->exhausted is incremented.
Triple sample_negative(const KnowledgeGraph& kg, const Triple& t, const NegativePolicy& policy,
                       Rng& rng, NegativeStats* stats = nullptr);

struct TaskPair {
    EntityId left = 0;
    EntityId right = 0;
    int label = 1;

    friend bool operator==(const TaskPair&, const TaskPair&) = default;
};

struct SplitRatios {
    double train = 0.8;
    double dev = 0.1;
    double test = 0.1;
};

struct TaskDataset {
    RelationId task_relation = 0;
    std::vector<TaskPair> train;
    std::vector<TaskPair> dev;
    std::vector<TaskPair> test;
    /// Distinct right-hand entities in first-seen order over train, dev, test.
    std::vector<EntityId> candidate_pool;

    Triple as_triple(const TaskPair& p) const { return {p.left, task_relation, p.right}; }
    /// Every positive (left, right) across all three splits.
    std::unordered_set<Triple, TripleHash> known_positives() const;
};

struct TaskBuild {
    TaskDataset dataset;
    /// Input graph minus the dev and test task-relation triples.
    KnowledgeGraph context;
};

TaskBuild build_task_dataset(const KnowledgeGraph& kg, std::string_view task_relation_name,
                             const SplitRatios& ratios, Rng& rng);

void write_pairs(const std::filesystem::path& path, const KnowledgeGraph& kg,
                 const std::vector<TaskPair>& pairs);
std::vector<TaskPair> load_pairs(const std::filesystem::path& path, const KnowledgeGraph& kg);

/// Writes train/dev/test pair TSVs, the pruned context graph, vocab dumps and
/// a `task.cfg` naming the task relation into `dir`.
void write_task_directory(const std::filesystem::path& dir, const TaskBuild& build);
TaskBuild load_task_directory(const std::filesystem::path& dir);

struct ToyGraphSpec {
    std::size_t entities = 30;
    std::size_t relations = 5;
    std::size_t triples = 100;
    std::size_t latent_dim = 3;
};

/// Small synthetic graph with translational structure: entities get latent
/// points, relations get offsets, and (h, r) links to the nearest point to
/// x_h + v_r. The tightest `triples` such links are kept.
KnowledgeGraph generate_toy_graph(const ToyGraphSpec& spec, std::uint64_t seed);

}  // namespace scop
