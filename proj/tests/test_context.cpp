#include <doctest.h>

#include <algorithm>
#include <set>

#include "scop/context.hpp"
#include "scop/kg.hpp"

using namespace scop;

namespace {

KnowledgeGraph random_graph(std::size_t entities, std::size_t relations, std::size_t triples, std::uint64_t seed) {
    Rng rng(seed);
    std::string text;
    std::uniform_int_distribution<std::size_t> e(0, entities - 1), r(0, relations - 1);
    for (std::size_t i = 0; i < triples; ++i)
        text += "e" + std::to_string(e(rng)) + "\tr" + std::to_string(r(rng)) + "\te" + std::to_string(e(rng)) + "\n";
    return parse_triples(text);
}

}  // namespace

TEST_CASE("caps arithmetic") {
    ContextCaps caps;
    CHECK(caps.per_segment_cap == 84);
    CHECK(caps.total_length == 256);
    CHECK_NOTHROW(caps.validate());
    CHECK_THROWS(ContextCaps{84, 255}.validate());
    CHECK(ContextCaps::with_cap(8).total_length == 28);
    CHECK(caps.marker_position(0) == 1);
    CHECK(caps.marker_position(1) == 86);
    CHECK(caps.marker_position(2) == 171);
}

TEST_CASE("truncation under and over the cap") {
    Rng rng(1);
    std::vector<Triple> three{{0, 0, 1}, {0, 0, 2}, {0, 0, 3}};
    CHECK(truncate_context(three, 84, rng, Mode::Train) == three);

    std::vector<Triple> many;
    for (EntityId i = 0; i < 200; ++i) many.push_back({0, 0, i});
    std::set<Triple> all(many.begin(), many.end());
    for (int draw = 0; draw < 100; ++draw) {
        auto picked = truncate_context(many, 84, rng, Mode::Train);
        REQUIRE(picked.size() == 84);
        std::set<Triple> distinct(picked.begin(), picked.end());
        CHECK(distinct.size() == 84);
        for (const auto& t : picked) CHECK(all.contains(t));
    }
    auto e1 = truncate_context(many, 84, rng, Mode::Eval);
    auto e2 = truncate_context(many, 84, rng, Mode::Eval);
    CHECK(e1 == e2);
    CHECK(e1 == std::vector<Triple>(many.begin(), many.begin() + 84));
}

TEST_CASE("isolated items give four real tokens") {
    Vocabulary ents, rels;
    for (const char* n : {"h", "t", "a", "b"}) ents.intern(n);
    rels.intern("r");
    rels.intern("s");
    KnowledgeGraph kg(ents, rels, {{2, 1, 3}});
    Rng rng(1);
    auto seq = assemble_sequence(kg, {0, 0, 1}, ContextCaps{}, true, rng, Mode::Eval);
    CHECK(seq.size() == 256);
    CHECK(seq.real_count() == 4);
    CHECK(std::count(seq.mask.begin(), seq.mask.end(), 0) == 252);
    CHECK(seq.slots[0].kind == SlotKind::Agg);
    CHECK(seq.slots[1].kind == SlotKind::Hea);
    CHECK(seq.slots[86].kind == SlotKind::Rel);
    CHECK(seq.slots[171].kind == SlotKind::Tai);
}

TEST_CASE("exclusion example on a three-triple graph") {
    auto kg = parse_triples("a\tr\tb\nb\tr\tc\na\ts\tc\n");
    Rng rng(1);
    auto seq = assemble_sequence(kg, {0, 0, 1}, ContextCaps::with_cap(4), true, rng, Mode::Eval);
    CHECK(seq.segment_triples(Segment::Head) == std::vector<Triple>{{0, 1, 2}});
    CHECK(seq.segment_triples(Segment::Relation) == std::vector<Triple>{{1, 0, 2}});
    CHECK(seq.segment_triples(Segment::Tail) == std::vector<Triple>{{1, 0, 2}});
}

TEST_CASE("segment membership, histogram and mask invariants") {
    auto kg = random_graph(25, 4, 200, 2);
    Rng rng(3);
    ContextCaps caps;
    for (std::size_t i = 0; i < kg.size(); i += 7) {
        const auto& t = kg.triple(i);
        auto seq = assemble_sequence(kg, t, caps, true, rng, Mode::Train);
        REQUIRE(seq.size() == caps.total_length);
        std::array<std::size_t, 4> hist{};
        for (std::size_t s = 0; s < seq.size(); ++s) {
            hist[static_cast<std::size_t>(seq.segments[s])]++;
            CHECK((seq.mask[s] == 1) == (seq.slots[s].kind != SlotKind::Pad));
            CHECK(seq.slots[s].triple.has_value() == (seq.slots[s].kind == SlotKind::Context));
        }
        CHECK(hist == std::array<std::size_t, 4>{1, 85, 85, 85});
        for (const auto& c : seq.segment_triples(Segment::Head)) CHECK((c.head == t.head || c.tail == t.head));
        for (const auto& c : seq.segment_triples(Segment::Relation)) CHECK(c.relation == t.relation);
        for (const auto& c : seq.segment_triples(Segment::Tail)) CHECK((c.head == t.tail || c.tail == t.tail));
    }
}

TEST_CASE("exclude-self never leaks the target into its own sequence") {
    auto kg = random_graph(20, 3, 200, 4);
    Rng rng(5);
    for (const auto& t : kg.triples()) {
        for (auto mode : {Mode::Train, Mode::Eval}) {
            auto seq = assemble_sequence(kg, t, ContextCaps::with_cap(84), true, rng, mode);
            for (const auto& slot : seq.slots) CHECK_FALSE((slot.triple && *slot.triple == t));
        }
    }
    // without exclusion the target does appear, so the scan is meaningful
    auto seq = assemble_sequence(kg, kg.triple(0), ContextCaps::with_cap(84), false, rng, Mode::Eval);
    auto head = seq.segment_triples(Segment::Head);
    CHECK(std::ranges::find(head, kg.triple(0)) != head.end());
}

TEST_CASE("pair items assemble through their implied triple") {
    auto kg = parse_triples("x\tisa\tanimal\ny\tisa\tanimal\nx\tnear\ty\n");
    Rng rng(1);
    TaskPair pair{0, 1, 1};
    auto a = assemble_pair_sequence(kg, pair, 0, ContextCaps::with_cap(4), true, rng, Mode::Eval);
    auto b = assemble_sequence(kg, {0, 0, 1}, ContextCaps::with_cap(4), true, rng, Mode::Eval);
    CHECK(a.segment_triples(Segment::Head) == b.segment_triples(Segment::Head));
    CHECK(a.segment_triples(Segment::Tail) == b.segment_triples(Segment::Tail));
    for (const auto& slot : a.slots) CHECK_FALSE((slot.triple && *slot.triple == Triple{0, 0, 1}));
}

TEST_CASE("invalid targets are rejected") {
    auto kg = parse_triples("a\tr\tb\n");
    Rng rng(1);
    CHECK_THROWS(assemble_sequence(kg, {5, 0, 1}, ContextCaps::with_cap(2), true, rng, Mode::Eval));
}
