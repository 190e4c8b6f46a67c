#include "scop/kg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "scop/io.hpp"

namespace scop {

std::uint32_t Vocabulary::intern(std::string_view name) {
    auto it = ids_.find(std::string(name));
    if (it != ids_.end()) return it->second;
    auto id = static_cast<std::uint32_t>(names_.size());
    names_.emplace_back(name);
    ids_.emplace(names_.back(), id);
    return id;
}

std::optional<std::uint32_t> Vocabulary::find(std::string_view name) const {
    auto it = ids_.find(std::string(name));
    if (it == ids_.end()) return std::nullopt;
    return it->second;
}

KnowledgeGraph::KnowledgeGraph(Vocabulary entities, Vocabulary relations,
                               std::vector<Triple> triples)
    : entities_(std::move(entities)), relations_(std::move(relations)) {
    by_entity_.resize(entities_.size());
    by_relation_.resize(relations_.size());
    triples_.reserve(triples.size());
    membership_.reserve(triples.size());
    for (const auto& t : triples) {
        check(t);
        if (!membership_.insert(t).second) {
            ++duplicates_;
            continue;
        }
        auto index = triples_.size();
        triples_.push_back(t);
        by_entity_[t.head].push_back(index);
        if (t.tail != t.head) by_entity_[t.tail].push_back(index);
        by_relation_[t.relation].push_back(index);
    }
}

void KnowledgeGraph::check_entity(EntityId e) const {
    if (e >= entities_.size())
        throw std::out_of_range("entity id " + std::to_string(e) + " out of range (" +
                                std::to_string(entities_.size()) + " entities)");
}

void KnowledgeGraph::check_relation(RelationId r) const {
    if (r >= relations_.size())
        throw std::out_of_range("relation id " + std::to_string(r) + " out of range (" +
                                std::to_string(relations_.size()) + " relations)");
}

void KnowledgeGraph::check(const Triple& t) const {
    check_entity(t.head);
    check_relation(t.relation);
    check_entity(t.tail);
}

const std::vector<std::size_t>& KnowledgeGraph::by_entity(EntityId e) const {
    check_entity(e);
    return by_entity_[e];
}

const std::vector<std::size_t>& KnowledgeGraph::by_relation(RelationId r) const {
    check_relation(r);
    return by_relation_[r];
}

bool KnowledgeGraph::contains(const Triple& t) const {
    check(t);
    return membership_.contains(t);
}

namespace {

std::vector<Triple> collect(const std::vector<Triple>& triples,
                            const std::vector<std::size_t>& indices,
                            const std::optional<Triple>& exclude) {
    std::vector<Triple> out;
    out.reserve(indices.size());
    for (auto i : indices) {
        if (exclude && triples[i] == *exclude) continue;
        out.push_back(triples[i]);
    }
    return out;
}

}  // namespace

std::vector<Triple> KnowledgeGraph::entity_context(EntityId e,
                                                   const std::optional<Triple>& exclude) const {
    return collect(triples_, by_entity(e), exclude);
}

std::vector<Triple> KnowledgeGraph::relation_context(RelationId r,
                                                     const std::optional<Triple>& exclude) const {
    return collect(triples_, by_relation(r), exclude);
}

KnowledgeGraph KnowledgeGraph::without(const std::function<bool(const Triple&)>& drop) const {
    std::vector<Triple> kept;
    kept.reserve(triples_.size());
    for (const auto& t : triples_)
        if (!drop(t)) kept.push_back(t);
    return KnowledgeGraph(entities_, relations_, std::move(kept));
}

KnowledgeGraph parse_triples(std::string_view text, const Vocabulary* entity_seed,
                             const Vocabulary* relation_seed) {
    Vocabulary entities = entity_seed ? *entity_seed : Vocabulary{};
    Vocabulary relations = relation_seed ? *relation_seed : Vocabulary{};
    std::vector<Triple> triples;

    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() : nl + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

        std::string_view fields[3];
        std::size_t count = 0;
        std::size_t start = 0;
        while (true) {
            auto tab = line.find('\t', start);
            if (count < 3) fields[count] = line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start);
            ++count;
            if (tab == std::string_view::npos) break;
            start = tab + 1;
        }
        if (count != 3 || fields[0].empty() || fields[1].empty() || fields[2].empty())
            throw ParseError("malformed triple at line " + std::to_string(line_no) +
                                 ": expected 3 tab-separated fields, got " + std::to_string(count),
                             line_no);
        triples.push_back({entities.intern(fields[0]), relations.intern(fields[1]),
                           entities.intern(fields[2])});
    }
    if (triples.empty()) throw ParseError("empty triple file", 0);
    return KnowledgeGraph(std::move(entities), std::move(relations), std::move(triples));
}

KnowledgeGraph load_triples(const std::filesystem::path& path, const Vocabulary* entity_seed,
                            const Vocabulary* relation_seed) {
    return parse_triples(read_file(path), entity_seed, relation_seed);
}

void write_triples(const std::filesystem::path& path, const KnowledgeGraph& kg,
                   const std::vector<Triple>& triples) {
    std::string out;
    for (const auto& t : triples) {
        out += kg.entities().name(t.head);
        out += '\t';
        out += kg.relations().name(t.relation);
        out += '\t';
        out += kg.entities().name(t.tail);
        out += '\n';
    }
    write_file_atomic(path, out);
}

void write_vocabulary(const std::filesystem::path& path, const Vocabulary& vocab) {
    std::string out;
    for (std::size_t i = 0; i < vocab.size(); ++i) {
        out += vocab.name(static_cast<std::uint32_t>(i));
        out += '\t';
        out += std::to_string(i);
        out += '\n';
    }
    write_file_atomic(path, out);
}

Vocabulary load_vocabulary(const std::filesystem::path& path) {
    std::istringstream in(read_file(path));
    Vocabulary vocab;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto tab = line.rfind('\t');
        if (tab == std::string::npos) throw ParseError("vocabulary line without tab", line_no);
        auto name = line.substr(0, tab);
        unsigned long id = 0;
        try {
            id = std::stoul(line.substr(tab + 1));
        } catch (const std::exception&) {
            throw ParseError("vocabulary id is not a number at line " + std::to_string(line_no), line_no);
        }
        if (id != vocab.size() || vocab.intern(name) != id)
            throw ParseError("vocabulary ids must be dense and in order at line " + std::to_string(line_no),
                             line_no);
    }
    return vocab;
}

void NegativePolicy::validate() const {
    if (corrupt_head_prob < 0 || corrupt_tail_prob < 0 || corrupt_relation_prob < 0)
        throw std::invalid_argument("negative policy probabilities must be nonnegative");
    double sum = corrupt_head_prob + corrupt_tail_prob + corrupt_relation_prob;
    if (std::abs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("negative policy probabilities must sum to 1");
}

namespace {

std::uint32_t draw_other(std::uint32_t current, std::size_t count, Rng& rng) {
    std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(count - 2));
    auto v = pick(rng);
    return v >= current ? v + 1 : v;
}

}  // namespace

Triple sample_negative(const KnowledgeGraph& kg, const Triple& t, const NegativePolicy& policy,
                       Rng& rng, NegativeStats* stats) {
    kg.check(t);
    policy.validate();
    bool entity_slots = policy.corrupt_head_prob > 0 || policy.corrupt_tail_prob > 0;
    if (entity_slots && kg.entity_count() < 2)
        throw std::invalid_argument("head/tail corruption needs at least 2 entities");
    if (policy.corrupt_relation_prob > 0 && kg.relation_count() < 2)
        throw std::invalid_argument("relation corruption needs at least 2 relations");

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::size_t attempts = policy.filter_known ? std::max<std::size_t>(1, policy.max_resample) : 1;
    Triple candidate = t;
    for (std::size_t i = 0; i < attempts; ++i) {
        candidate = t;
        double u = unit(rng);
        if (u < policy.corrupt_head_prob) {
            candidate.head = draw_other(t.head, kg.entity_count(), rng);
        } else if (u < policy.corrupt_head_prob + policy.corrupt_tail_prob ||
                   policy.corrupt_relation_prob == 0) {
            candidate.tail = draw_other(t.tail, kg.entity_count(), rng);
        } else {
            candidate.relation = draw_other(t.relation, kg.relation_count(), rng);
        }
        if (!policy.filter_known || !kg.contains(candidate)) {
            if (stats) ++stats->draws;
            return candidate;
        }
    }
    if (stats) {
        ++stats->draws;
        ++stats->exhausted;
    }
    return candidate;
}

std::unordered_set<Triple, TripleHash> TaskDataset::known_positives() const {
    std::unordered_set<Triple, TripleHash> out;
    for (const auto* split : {&train, &dev, &test})
        for (const auto& p : *split)
            if (p.label == 1) out.insert(as_triple(p));
    return out;
}

namespace {

std::vector<EntityId> pool_of(const TaskDataset& ds) {
    std::vector<EntityId> pool;
    std::unordered_set<EntityId> seen;
    for (const auto* split : {&ds.train, &ds.dev, &ds.test})
        for (const auto& p : *split)
            if (seen.insert(p.right).second) pool.push_back(p.right);
    return pool;
}

}  // namespace

TaskBuild build_task_dataset(const KnowledgeGraph& kg, std::string_view task_relation_name,
                             const SplitRatios& ratios, Rng& rng) {
    auto rel = kg.relations().find(task_relation_name);
    if (!rel) throw std::invalid_argument("unknown relation: " + std::string(task_relation_name));
    if (ratios.train <= 0 || ratios.dev <= 0 || ratios.test <= 0 ||
        std::abs(ratios.train + ratios.dev + ratios.test - 1.0) > 1e-9)
        throw std::invalid_argument("split ratios must be positive and sum to 1");

    std::vector<TaskPair> pairs;
    for (auto i : kg.by_relation(*rel)) {
        const auto& t = kg.triple(i);
        pairs.push_back({t.head, t.tail, 1});
    }
    if (pairs.size() < 3)
        throw std::invalid_argument("task relation " + std::string(task_relation_name) +
                                    " has fewer than 3 pairs");
    std::shuffle(pairs.begin(), pairs.end(), rng);

    const auto n = static_cast<double>(pairs.size());
    // The epsilon absorbs representation error when ratios are given as count quotients.
    auto n_dev = static_cast<std::size_t>(std::floor(n * ratios.dev + 1e-9));
    auto n_test = static_cast<std::size_t>(std::floor(n * ratios.test + 1e-9));
    auto n_train = pairs.size() - n_dev - n_test;

    TaskBuild build;
    auto& ds = build.dataset;
    ds.task_relation = *rel;
    ds.train.assign(pairs.begin(), pairs.begin() + static_cast<std::ptrdiff_t>(n_train));
    ds.dev.assign(pairs.begin() + static_cast<std::ptrdiff_t>(n_train),
                  pairs.begin() + static_cast<std::ptrdiff_t>(n_train + n_dev));
    ds.test.assign(pairs.begin() + static_cast<std::ptrdiff_t>(n_train + n_dev), pairs.end());
    ds.candidate_pool = pool_of(ds);

    std::unordered_set<Triple, TripleHash> held_out;
    for (const auto* split : {&ds.dev, &ds.test})
        for (const auto& p : *split) held_out.insert(ds.as_triple(p));
    build.context = kg.without([&](const Triple& t) { return held_out.contains(t); });
    return build;
}

void write_pairs(const std::filesystem::path& path, const KnowledgeGraph& kg,
                 const std::vector<TaskPair>& pairs) {
    std::string out;
    for (const auto& p : pairs) {
        out += kg.entities().name(p.left);
        out += '\t';
        out += kg.entities().name(p.right);
        out += '\t';
        out += std::to_string(p.label);
        out += '\n';
    }
    write_file_atomic(path, out);
}

std::vector<TaskPair> load_pairs(const std::filesystem::path& path, const KnowledgeGraph& kg) {
    std::istringstream in(read_file(path));
    std::vector<TaskPair> pairs;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto a = line.find('\t');
        auto b = a == std::string::npos ? a : line.find('\t', a + 1);
        if (b == std::string::npos || line.find('\t', b + 1) != std::string::npos)
            throw ParseError("malformed pair at line " + std::to_string(line_no), line_no);
        auto left = kg.entities().find(std::string_view(line).substr(0, a));
        auto right = kg.entities().find(std::string_view(line).substr(a + 1, b - a - 1));
        auto label = line.substr(b + 1);
        if (!left || !right)
            throw ParseError("unknown entity in pair at line " + std::to_string(line_no), line_no);
        if (label != "0" && label != "1")
            throw ParseError("pair label must be 0 or 1 at line " + std::to_string(line_no), line_no);
        pairs.push_back({*left, *right, label == "1" ? 1 : 0});
    }
    return pairs;
}

void write_task_directory(const std::filesystem::path& dir, const TaskBuild& build) {
    std::filesystem::create_directories(dir);
    const auto& kg = build.context;
    const auto& ds = build.dataset;
    write_pairs(dir / "train.tsv", kg, ds.train);
    write_pairs(dir / "dev.tsv", kg, ds.dev);
    write_pairs(dir / "test.tsv", kg, ds.test);
    write_triples(dir / "context.tsv", kg, kg.triples());
    write_vocabulary(dir / "entities.tsv", kg.entities());
    write_vocabulary(dir / "relations.tsv", kg.relations());
    write_file_atomic(dir / "task.cfg",
                      format_key_values({{"task_relation", kg.relations().name(ds.task_relation)}}));
}

TaskBuild load_task_directory(const std::filesystem::path& dir) {
    auto entities = load_vocabulary(dir / "entities.tsv");
    auto relations = load_vocabulary(dir / "relations.tsv");
    auto cfg = parse_key_values(read_file(dir / "task.cfg"));
    TaskBuild build;
    auto text = read_file(dir / "context.tsv");
    build.context = text.empty() ? KnowledgeGraph(entities, relations, {})
                                 : parse_triples(text, &entities, &relations);
    if (build.context.entity_count() != entities.size() ||
        build.context.relation_count() != relations.size())
        throw ParseError("context graph mentions names missing from the vocabulary dumps", 0);
    auto rel = relations.find(cfg["task_relation"]);
    if (!rel) throw ParseError("task.cfg names an unknown task_relation", 0);
    auto& ds = build.dataset;
    ds.task_relation = *rel;
    ds.train = load_pairs(dir / "train.tsv", build.context);
    ds.dev = load_pairs(dir / "dev.tsv", build.context);
    ds.test = load_pairs(dir / "test.tsv", build.context);
    ds.candidate_pool = pool_of(ds);
    return build;
}

KnowledgeGraph generate_toy_graph(const ToyGraphSpec& spec, std::uint64_t seed) {
    if (spec.entities < 2 || spec.relations < 1)
        throw std::invalid_argument("toy graph needs at least 2 entities and 1 relation");
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<std::vector<double>> points(spec.entities, std::vector<double>(spec.latent_dim));
    for (auto& p : points)
        for (auto& v : p) v = normal(rng);
    std::vector<std::vector<double>> offsets(spec.relations, std::vector<double>(spec.latent_dim));
    for (auto& o : offsets)
        for (auto& v : o) v = normal(rng);

    struct Link {
        double distance;
        Triple triple;
    };
    std::vector<Link> links;
    for (std::size_t h = 0; h < spec.entities; ++h) {
        for (std::size_t r = 0; r < spec.relations; ++r) {
            double best = INFINITY;
            std::size_t best_t = 0;
            for (std::size_t t = 0; t < spec.entities; ++t) {
                if (t == h) continue;
                double d2 = 0;
                for (std::size_t k = 0; k < spec.latent_dim; ++k) {
                    double diff = points[h][k] + offsets[r][k] - points[t][k];
                    d2 += diff * diff;
                }
                if (d2 < best) {
                    best = d2;
                    best_t = t;
                }
            }
            links.push_back({best, {static_cast<EntityId>(h), static_cast<RelationId>(r),
                                    static_cast<EntityId>(best_t)}});
        }
    }
    std::stable_sort(links.begin(), links.end(),
                     [](const Link& a, const Link& b) { return a.distance < b.distance; });
    links.resize(std::min(links.size(), spec.triples));
    std::sort(links.begin(), links.end(),
              [](const Link& a, const Link& b) { return a.triple < b.triple; });

    Vocabulary entities, relations;
    char buf[32];
    for (std::size_t e = 0; e < spec.entities; ++e) {
        std::snprintf(buf, sizeof buf, "e%03zu", e);
        entities.intern(buf);
    }
    for (std::size_t r = 0; r < spec.relations; ++r) {
        std::snprintf(buf, sizeof buf, "r%02zu", r);
        relations.intern(buf);
    }
    std::vector<Triple> triples;
    for (const auto& l : links) triples.push_back(l.triple);
    return KnowledgeGraph(std::move(entities), std::move(relations), std::move(triples));
}

}  // namespace scop
