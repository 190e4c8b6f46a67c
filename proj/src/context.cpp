#include "scop/context.hpp"

#include <algorithm>
#include <iterator>
#include <stdexcept>
#include <string>

namespace scop {

void ContextCaps::validate() const {
    if (total_length != 4 + 3 * per_segment_cap)
        throw std::invalid_argument("context caps: total_length " + std::to_string(total_length) +
                                    " must equal 4 + 3 * per_segment_cap (" +
                                    std::to_string(4 + 3 * per_segment_cap) + ")");
}

std::size_t InputSequence::real_count() const {
    return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

std::vector<Triple> InputSequence::segment_triples(Segment s) const {
    std::vector<Triple> out;
    for (std::size_t i = 0; i < slots.size(); ++i)
        if (segments[i] == s && slots[i].kind == SlotKind::Context) out.push_back(*slots[i].triple);
    return out;
}

std::vector<Triple> truncate_context(std::vector<Triple> context, std::size_t cap, Rng& rng, Mode mode) {
    if (context.size() <= cap) return context;
    if (mode == Mode::Eval) {
        context.resize(cap);
        return context;
    }
    std::vector<Triple> picked;
    picked.reserve(cap);
    std::sample(context.begin(), context.end(), std::back_inserter(picked), cap, rng);
    return picked;
}

std::vector<Triple> sample_entity_context(const KnowledgeGraph& kg, EntityId e, std::size_t cap,
                                          const std::optional<Triple>& exclude, Rng& rng, Mode mode) {
    return truncate_context(kg.entity_context(e, exclude), cap, rng, mode);
}

std::vector<Triple> sample_relation_context(const KnowledgeGraph& kg, RelationId r, std::size_t cap,
                                            const std::optional<Triple>& exclude, Rng& rng, Mode mode) {
    return truncate_context(kg.relation_context(r, exclude), cap, rng, mode);
}

InputSequence assemble_sequence(const KnowledgeGraph& kg, const Triple& target, const ContextCaps& caps,
                                bool exclude_self, Rng& rng, Mode mode) {
    caps.validate();
    kg.check(target);
    std::optional<Triple> exclude;
    if (exclude_self) exclude = target;

    InputSequence seq;
    seq.slots.reserve(caps.total_length);
    auto push = [&seq](SlotContent slot, Segment segment) {
        seq.mask.push_back(slot.kind == SlotKind::Pad ? 0 : 1);
        seq.slots.push_back(std::move(slot));
        seq.segments.push_back(segment);
    };

    push({SlotKind::Agg, std::nullopt}, Segment::Agg);
    const std::array<std::pair<SlotKind, Segment>, 3> blocks{{{SlotKind::Hea, Segment::Head},
                                                              {SlotKind::Rel, Segment::Relation},
                                                              {SlotKind::Tai, Segment::Tail}}};
    for (const auto& [marker, segment] : blocks) {
        std::vector<Triple> context;
        switch (segment) {
            case Segment::Head:
                context = sample_entity_context(kg, target.head, caps.per_segment_cap, exclude, rng, mode);
                break;
            case Segment::Relation:
                context = sample_relation_context(kg, target.relation, caps.per_segment_cap, exclude, rng, mode);
                break;
            default:
                context = sample_entity_context(kg, target.tail, caps.per_segment_cap, exclude, rng, mode);
                break;
        }
        push({marker, std::nullopt}, segment);
        for (const auto& t : context) push({SlotKind::Context, t}, segment);
        for (std::size_t i = context.size(); i < caps.per_segment_cap; ++i) push({SlotKind::Pad, std::nullopt}, segment);
    }
    return seq;
}

InputSequence assemble_pair_sequence(const KnowledgeGraph& kg, const TaskPair& pair, RelationId task_relation,
                                     const ContextCaps& caps, bool exclude_self, Rng& rng, Mode mode) {
    return assemble_sequence(kg, {pair.left, task_relation, pair.right}, caps, exclude_self, rng, mode);
}

}  // namespace scop
