#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "scop/kg.hpp"

namespace scop {

/// Per-segment context budget and the total sequence length it implies:
/// one aggregation slot plus, per segment, a marker and `per_segment_cap`
/// context slots.
struct ContextCaps {
    std::size_t per_segment_cap = 84;
    std::size_t total_length = 256;

    static ContextCaps with_cap(std::size_t cap) { return {cap, 4 + 3 * cap}; }
    void validate() const;

    std::size_t marker_position(int segment) const { return 1 + static_cast<std::size_t>(segment) * (per_segment_cap + 1); }
};

enum class SlotKind : std::uint8_t { Agg = 0, Hea = 1, Rel = 2, Tai = 3, Pad = 4, Context = 5 };
inline constexpr std::size_t kMarkerKinds = 5;

enum class Segment : std::uint8_t { Agg = 0, Head = 1, Relation = 2, Tail = 3 };
inline constexpr std::size_t kSegments = 4;

struct SlotContent {
    SlotKind kind = SlotKind::Pad;
    std::optional<Triple> triple;
};

struct InputSequence {
    std::vector<SlotContent> slots;
    std::vector<Segment> segments;
    std::vector<std::uint8_t> mask;

    std::size_t size() const { return slots.size(); }
    std::size_t real_count() const;
    /// Context triples of one segment (Head, Relation or Tail), in slot order.
    std::vector<Triple> segment_triples(Segment s) const;
};

enum class Mode { Train, Eval };

/// Caps a context list: everything when it fits; otherwise a uniform sample
/// without replacement (Train, order preserved) or the leading `cap` (Eval).
std::vector<Triple> truncate_context(std::vector<Triple> context, std::size_t cap, Rng& rng, Mode mode);

std::vector<Triple> sample_entity_context(const KnowledgeGraph& kg, EntityId e, std::size_t cap,
                                          const std::optional<Triple>& exclude, Rng& rng, Mode mode);
std::vector<Triple> sample_relation_context(const KnowledgeGraph& kg, RelationId r, std::size_t cap,
                                            const std::optional<Triple>& exclude, Rng& rng, Mode mode);

/// Layout: [AGG][HEA][h ctx ... PAD][REL][r ctx ... PAD][TAI][t ctx ... PAD].
/// With exclude_self the target is removed from all three context sets.
InputSequence assemble_sequence(const KnowledgeGraph& kg, const Triple& target, const ContextCaps& caps,
                                bool exclude_self, Rng& rng, Mode mode);

/// Pair items are assembled through their implied triple (left, relation, right).
InputSequence assemble_pair_sequence(const KnowledgeGraph& kg, const TaskPair& pair, RelationId task_relation,
                                     const ContextCaps& caps, bool exclude_self, Rng& rng, Mode mode);

}  // namespace scop
