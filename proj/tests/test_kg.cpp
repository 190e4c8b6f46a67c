#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "scop/io.hpp"
#include "scop/kg.hpp"

using namespace scop;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("scop_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

KnowledgeGraph random_graph(std::size_t entities, std::size_t relations, std::size_t triples, std::uint64_t seed) {
    Rng rng(seed);
    std::string text;
    std::uniform_int_distribution<std::size_t> e(0, entities - 1), r(0, relations - 1);
    for (std::size_t i = 0; i < triples; ++i)
        text += "e" + std::to_string(e(rng)) + "\tr" + std::to_string(r(rng)) + "\te" + std::to_string(e(rng)) + "\n";
    return parse_triples(text);
}

}  // namespace

TEST_CASE("a single line gives two entities, one relation, one triple") {
    auto kg = parse_triples("a\tr\tb\n");
    CHECK(kg.entity_count() == 2);
    CHECK(kg.relation_count() == 1);
    CHECK(kg.size() == 1);
    CHECK(kg.entities().name(0) == "a");
    CHECK(kg.entities().name(1) == "b");
}

TEST_CASE("duplicate lines are collapsed and counted") {
    auto kg = parse_triples("a\tr\tb\nb\tr\tc\na\tr\tb\nc\ts\ta\nd\tr\ta\n");
    CHECK(kg.size() == 4);
    CHECK(kg.duplicate_count() == 1);
    // linear-scan oracle: distinct lines in first-seen order
    std::vector<Triple> expected{{0, 0, 1}, {1, 0, 2}, {2, 1, 0}, {3, 0, 0}};
    CHECK(kg.triples() == expected);
}

TEST_CASE("malformed input reports the line") {
    try {
        parse_triples("a\tr\tb\nbroken line\n");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
    }
    CHECK_THROWS_AS(parse_triples(""), ParseError);
    CHECK_THROWS_AS(parse_triples("a\tb\tc\td\n"), ParseError);
}

TEST_CASE("contains agrees with a linear scan") {
    auto kg = random_graph(40, 4, 200, 3);
    Rng rng(4);
    std::uniform_int_distribution<EntityId> e(0, static_cast<EntityId>(kg.entity_count() - 1));
    std::uniform_int_distribution<RelationId> r(0, static_cast<RelationId>(kg.relation_count() - 1));
    for (int i = 0; i < 1000; ++i) {
        Triple t{e(rng), r(rng), e(rng)};
        bool scan = std::ranges::find(kg.triples(), t) != kg.triples().end();
        CHECK(kg.contains(t) == scan);
    }
    const auto& first = kg.triple(0);
    CHECK(kg.contains(first));
    CHECK_THROWS(kg.contains({static_cast<EntityId>(kg.entity_count()), 0, 0}));
}

TEST_CASE("entity and relation contexts match linear scans") {
    auto kg = random_graph(30, 5, 200, 5);
    for (EntityId e = 0; e < kg.entity_count(); ++e) {
        std::vector<Triple> scan;
        for (const auto& t : kg.triples())
            if (t.head == e || t.tail == e) scan.push_back(t);
        CHECK(kg.entity_context(e) == scan);
    }
    std::vector<std::size_t> all;
    for (RelationId r = 0; r < kg.relation_count(); ++r) {
        std::vector<Triple> scan;
        for (const auto& t : kg.triples())
            if (t.relation == r) scan.push_back(t);
        CHECK(kg.relation_context(r) == scan);
        all.insert(all.end(), kg.by_relation(r).begin(), kg.by_relation(r).end());
    }
    std::ranges::sort(all);
    CHECK(all.size() == kg.size());
    for (std::size_t i = 0; i < all.size(); ++i) CHECK(all[i] == i);
}

TEST_CASE("context examples from small graphs") {
    auto kg = parse_triples("a\tr\tb\nb\tr\tc\nx\tq\ty\n");
    auto b = *kg.entities().find("b");
    CHECK(kg.entity_context(b).size() == 2);
    auto ex = kg.entity_context(b, Triple{0, 0, 1});
    REQUIRE(ex.size() == 1);
    CHECK(ex[0] == Triple{1, 0, 2});
    CHECK_THROWS(kg.entity_context(99));

    auto g2 = parse_triples("a\tr\tb\nc\tr\td\na\ts\tb\n");
    auto rc = g2.relation_context(0);
    REQUIRE(rc.size() == 2);
    CHECK(rc[0] == Triple{0, 0, 1});
    CHECK(rc[1] == Triple{2, 0, 3});
    CHECK(g2.relation_context(0, Triple{0, 0, 1}) == std::vector<Triple>{{2, 0, 3}});

    Vocabulary ents, rels;
    ents.intern("lonely");
    rels.intern("unused");
    auto g3 = parse_triples("a\tr\tb\n", &ents, &rels);
    CHECK(g3.entity_context(0).empty());
    CHECK(g3.relation_context(0).empty());
}

TEST_CASE("negative sampling") {
    auto kg = random_graph(30, 5, 100, 6);
    Rng rng(7);
    SUBCASE("tail-only policy keeps head and relation") {
        NegativePolicy p{0, 1, 0};
        for (const auto& t : kg.triples()) {
            auto n = sample_negative(kg, t, p, rng);
            CHECK(n.head == t.head);
            CHECK(n.relation == t.relation);
            CHECK(n.tail != t.tail);
        }
    }
    SUBCASE("exactly one slot changes") {
        NegativePolicy p;
        for (int i = 0; i < 2000; ++i) {
            const auto& t = kg.triple(static_cast<std::size_t>(i) % kg.size());
            auto n = sample_negative(kg, t, p, rng);
            int changed = (n.head != t.head) + (n.relation != t.relation) + (n.tail != t.tail);
            CHECK(changed == 1);
        }
    }
    SUBCASE("filtered draws avoid known triples") {
        NegativePolicy p;
        NegativeStats stats;
        std::size_t hits = 0;
        for (int i = 0; i < 10000; ++i) {
            const auto& t = kg.triple(static_cast<std::size_t>(i) % kg.size());
            hits += kg.contains(sample_negative(kg, t, p, rng, &stats));
        }
        CHECK(hits == stats.exhausted);
        CHECK(hits == 0);
        CHECK(stats.draws == 10000);
    }
    SUBCASE("two-entity graph has one head replacement") {
        auto tiny = parse_triples("a\tr\tb\n");
        auto n = sample_negative(tiny, {0, 0, 1}, {1, 0, 0, false}, rng);
        CHECK(n == Triple{1, 0, 1});
    }
    SUBCASE("degenerate graphs are rejected") {
        Vocabulary ents;
        ents.intern("only");
        Vocabulary rels;
        rels.intern("r");
        auto one = KnowledgeGraph(ents, rels, {{0, 0, 0}});
        CHECK_THROWS(sample_negative(one, {0, 0, 0}, {1, 0, 0}, rng));
        CHECK_THROWS(sample_negative(one, {0, 0, 0}, {0, 0, 1}, rng));
    }
    SUBCASE("invalid policies are rejected") {
        CHECK_THROWS(NegativePolicy{0.5, 0.5, 0.5}.validate());
        CHECK_THROWS(NegativePolicy{-0.1, 0.6, 0.5}.validate());
    }
}

TEST_CASE("task dataset split sizes, disjointness and context pruning") {
    std::string text;
    for (int i = 0; i < 10; ++i) text += "x" + std::to_string(i) + "\t_hypernym\tt" + std::to_string(i % 3) + "\n";
    text += "x0\tother\tx1\nx2\tother\tx3\n";
    auto kg = parse_triples(text);
    Rng rng(1);
    auto build = build_task_dataset(kg, "_hypernym", {0.8, 0.1, 0.1}, rng);
    const auto& d = build.dataset;
    CHECK(d.train.size() == 8);
    CHECK(d.dev.size() == 1);
    CHECK(d.test.size() == 1);
    CHECK(build.context.size() == kg.size() - 2);
    for (const auto* held : {&d.dev, &d.test})
        for (const auto& p : *held) CHECK_FALSE(build.context.contains(d.as_triple(p)));
    for (const auto& p : d.train) CHECK(build.context.contains(d.as_triple(p)));

    std::set<std::pair<EntityId, EntityId>> seen;
    for (const auto* split : {&d.train, &d.dev, &d.test})
        for (const auto& p : *split) CHECK(seen.insert({p.left, p.right}).second);
    CHECK(seen.size() == 10);
    CHECK(d.candidate_pool.size() == 3);

    CHECK_THROWS(build_task_dataset(kg, "missing", {0.8, 0.1, 0.1}, rng));
    CHECK_THROWS(build_task_dataset(kg, "other", {0.8, 0.1, 0.1}, rng));
    CHECK_THROWS(build_task_dataset(kg, "_hypernym", {0.8, 0.3, 0.1}, rng));
}

TEST_CASE("split counts use floor for dev and test") {
    std::string text;
    for (int i = 0; i < 37; ++i) text += "x" + std::to_string(i) + "\trel\ty" + std::to_string(i) + "\n";
    auto kg = parse_triples(text);
    Rng rng(2);
    auto d = build_task_dataset(kg, "rel", {0.7, 0.15, 0.15}, rng).dataset;
    CHECK(d.dev.size() == 5);   // floor(5.55)
    CHECK(d.test.size() == 5);
    CHECK(d.train.size() == 27);
}

TEST_CASE("task directory round trip keeps ids") {
    auto kg = parse_triples("a\trel\tb\nc\trel\td\ne\trel\tb\nf\trel\td\na\tz\tc\n");
    Rng rng(3);
    auto build = build_task_dataset(kg, "rel", {0.5, 0.25, 0.25}, rng);
    auto dir = temp_dir("taskdir");
    write_task_directory(dir, build);
    for (const char* f : {"train.tsv", "dev.tsv", "test.tsv", "context.tsv", "entities.tsv", "relations.tsv", "task.cfg"})
        CHECK(fs::exists(dir / f));
    auto back = load_task_directory(dir);
    CHECK(back.dataset.train == build.dataset.train);
    CHECK(back.dataset.dev == build.dataset.dev);
    CHECK(back.dataset.test == build.dataset.test);
    CHECK(back.dataset.task_relation == build.dataset.task_relation);
    CHECK(back.dataset.candidate_pool == build.dataset.candidate_pool);
    CHECK(back.context.triples() == build.context.triples());
    CHECK(back.context.entity_count() == kg.entity_count());
}

TEST_CASE("triple files round trip through disk") {
    auto dir = temp_dir("triples");
    auto kg = random_graph(20, 3, 50, 8);
    write_triples(dir / "g.tsv", kg, kg.triples());
    auto back = load_triples(dir / "g.tsv");
    CHECK(back.triples() == kg.triples());
    CHECK_THROWS(load_triples(dir / "missing.tsv"));
}

TEST_CASE("generated toy graph has the requested size and is deterministic") {
    auto a = generate_toy_graph({}, 7);
    auto b = generate_toy_graph({}, 7);
    CHECK(a.entity_count() == 30);
    CHECK(a.relation_count() == 5);
    CHECK(a.size() == 100);
    CHECK(a.triples() == b.triples());
    CHECK(a.duplicate_count() == 0);
}
