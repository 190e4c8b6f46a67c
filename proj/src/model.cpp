#include "scop/model.hpp"

#include <cmath>
#include <stdexcept>

namespace scop {

void ModelConfig::validate() const {
    if (d == 0 || layers == 0 || heads == 0 || ffn_multiplier == 0)
        throw std::invalid_argument("model config: d, layers, heads and ffn_multiplier must be >= 1");
    if (d % heads != 0)
        throw std::invalid_argument("model config: d (" + std::to_string(d) + ") must be divisible by heads (" +
                                    std::to_string(heads) + ")");
    if (dropout < 0.0 || dropout >= 1.0) throw std::invalid_argument("model config: dropout must be in [0, 1)");
    caps.validate();
}

std::map<std::string, std::string> ModelConfig::to_key_values() const {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", dropout);
    return {{"d", std::to_string(d)},
            {"layers", std::to_string(layers)},
            {"heads", std::to_string(heads)},
            {"per_segment_cap", std::to_string(caps.per_segment_cap)},
            {"total_length", std::to_string(caps.total_length)},
            {"dropout", buf},
            {"ffn_multiplier", std::to_string(ffn_multiplier)}};
}

ModelConfig ModelConfig::from_key_values(const std::map<std::string, std::string>& kv) {
    auto need = [&kv](const char* key) -> const std::string& {
        auto it = kv.find(key);
        if (it == kv.end()) throw std::invalid_argument(std::string("model config: missing key ") + key);
        return it->second;
    };
    ModelConfig c;
    c.d = std::stoul(need("d"));
    c.layers = std::stoul(need("layers"));
    c.heads = std::stoul(need("heads"));
    c.caps.per_segment_cap = std::stoul(need("per_segment_cap"));
    c.caps.total_length = std::stoul(need("total_length"));
    c.dropout = std::stod(need("dropout"));
    c.ffn_multiplier = std::stoul(need("ffn_multiplier"));
    c.validate();
    return c;
}

template <class T>
BasicTensor<T> ScopModel<T>::add_param(const std::string& name, Shape shape) {
    return params_.add(name, BasicTensor<T>::zeros(std::move(shape)));
}

template <class T>
ScopModel<T>::ScopModel(const ModelConfig& config, std::size_t entities, std::size_t relations)
    : config_(config), entities_(entities), relations_(relations) {
    config_.validate();
    if (entities == 0 || relations == 0) throw std::invalid_argument("model needs at least one entity and relation");
    const std::size_t d = config_.d;
    const std::size_t inner = d * config_.ffn_multiplier;

    entity_emb_ = add_param("embedding.entity", {entities, d});
    relation_emb_ = add_param("embedding.relation", {relations, d});
    marker_emb_ = add_param("embedding.marker", {kMarkerKinds, d});
    segment_emb_ = add_param("embedding.segment", {kSegments, d});
    cmod_w_ = add_param("cmod.weight", {3 * d, d});
    cmod_b_ = add_param("cmod.bias", {d});
    for (std::size_t i = 0; i < config_.layers; ++i) {
        const std::string p = "encoder." + std::to_string(i) + ".";
        Layer l;
        l.wq = add_param(p + "attention.query.weight", {d, d});
        l.bq = add_param(p + "attention.query.bias", {d});
        l.wk = add_param(p + "attention.key.weight", {d, d});
        l.bk = add_param(p + "attention.key.bias", {d});
        l.wv = add_param(p + "attention.value.weight", {d, d});
        l.bv = add_param(p + "attention.value.bias", {d});
        l.wo = add_param(p + "attention.output.weight", {d, d});
        l.bo = add_param(p + "attention.output.bias", {d});
        l.norm1_gain = add_param(p + "attention_norm.gain", {d});
        l.norm1_bias = add_param(p + "attention_norm.bias", {d});
        l.w1 = add_param(p + "ffn.inner.weight", {d, inner});
        l.b1 = add_param(p + "ffn.inner.bias", {inner});
        l.w2 = add_param(p + "ffn.outer.weight", {inner, d});
        l.b2 = add_param(p + "ffn.outer.bias", {d});
        l.norm2_gain = add_param(p + "ffn_norm.gain", {d});
        l.norm2_bias = add_param(p + "ffn_norm.bias", {d});
        for (auto* g : {&l.norm1_gain, &l.norm2_gain}) {
            auto v = g->mutable_values();
            std::fill(v.begin(), v.end(), T(1));
        }
        layers_.push_back(std::move(l));
    }
    w_int_ = add_param("pretrain.w_int", {3 * d, d});
    b_int_ = add_param("pretrain.bias", {d});
    w_cls_ = add_param("pretrain.w_cls", {d, 2});
    w_ft_ = add_param("finetune.w", {d, 2});
}

template <class T>
void ScopModel<T>::initialize(Rng& rng, double std) {
    std::normal_distribution<double> normal(0.0, std);
    for (auto& p : params_) {
        const auto& n = p.name;
        bool is_bias = n.ends_with(".bias") || n == "cmod.bias" || n == "pretrain.bias";
        bool is_gain = n.ends_with(".gain");
        if (is_gain) {
            auto v = p.tensor.mutable_values();
            std::fill(v.begin(), v.end(), T(1));
            continue;
        }
        if (is_bias) {
            auto v = p.tensor.mutable_values();
            std::fill(v.begin(), v.end(), T(0));
            continue;
        }
        for (auto& v : p.tensor.mutable_values()) v = static_cast<T>(normal(rng));
    }
}

template <class T>
BasicTensor<T> ScopModel<T>::cmod_encode(std::span<const Triple> triples) const {
    std::vector<std::uint32_t> heads, rels, tails;
    heads.reserve(triples.size());
    rels.reserve(triples.size());
    tails.reserve(triples.size());
    for (const auto& t : triples) {
        heads.push_back(t.head);
        rels.push_back(t.relation);
        tails.push_back(t.tail);
    }
    auto x = concat_cols<T>({gather_rows(entity_emb_, std::move(heads)), gather_rows(relation_emb_, std::move(rels)),
                             gather_rows(entity_emb_, std::move(tails))});
    return relu(add_row(matmul(x, cmod_w_), cmod_b_));
}

template <class T>
BasicTensor<T> ScopModel<T>::embed_sequence(const InputSequence& seq) const {
    if (seq.size() != config_.caps.total_length)
        throw std::invalid_argument("embed_sequence: sequence length " + std::to_string(seq.size()) +
                                    " differs from configured " + std::to_string(config_.caps.total_length));
    std::vector<Triple> context;
    std::vector<std::uint32_t> rows(seq.size());
    std::vector<std::uint32_t> segments(seq.size());
    for (std::size_t i = 0; i < seq.size(); ++i) {
        const auto& slot = seq.slots[i];
        segments[i] = static_cast<std::uint32_t>(seq.segments[i]);
        if (slot.kind == SlotKind::Context) {
            rows[i] = static_cast<std::uint32_t>(kMarkerKinds + context.size());
            context.push_back(*slot.triple);
        } else {
            rows[i] = static_cast<std::uint32_t>(slot.kind);
        }
    }
    auto table = context.empty() ? marker_emb_ : concat_rows<T>({marker_emb_, cmod_encode(context)});
    return add(gather_rows(table, std::move(rows)), gather_rows(segment_emb_, std::move(segments)));
}

template <class T>
AmodOutput<T> ScopModel<T>::amod_forward(const BasicTensor<T>& embedded, std::span<const std::uint8_t> mask,
                                         Rng* dropout_rng) const {
    const std::size_t d = config_.d;
    const std::size_t length = embedded.rows();
    if (embedded.rank() != 2 || embedded.cols() != d)
        throw ShapeError("amod_forward: expected [L x " + std::to_string(d) + "], got " + shape_string(embedded.shape()));
    if (mask.size() != length) throw ShapeError("amod_forward: mask length differs from sequence length");
    if (std::none_of(mask.begin(), mask.end(), [](std::uint8_t m) { return m != 0; }))
        throw std::invalid_argument("amod_forward: every slot is masked");

    const double p = config_.dropout;
    const std::size_t dh = d / config_.heads;
    const T inv_sqrt = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));

    auto x = dropout(embedded, p, dropout_rng);
    for (const auto& l : layers_) {
        auto q = add_row(matmul(x, l.wq), l.bq);
        auto k = add_row(matmul(x, l.wk), l.bk);
        auto v = add_row(matmul(x, l.wv), l.bv);
        std::vector<BasicTensor<T>> heads;
        for (std::size_t h = 0; h < config_.heads; ++h) {
            auto qh = config_.heads == 1 ? q : slice_cols(q, h * dh, dh);
            auto kh = config_.heads == 1 ? k : slice_cols(k, h * dh, dh);
            auto vh = config_.heads == 1 ? v : slice_cols(v, h * dh, dh);
            auto weights = masked_softmax(scale(matmul(qh, transpose(kh)), inv_sqrt), mask);
            heads.push_back(matmul(dropout(weights, p, dropout_rng), vh));
        }
        auto attended = heads.size() == 1 ? heads[0] : concat_cols(heads);
        auto attn = dropout(add_row(matmul(attended, l.wo), l.bo), p, dropout_rng);
        x = layer_norm(add(x, attn), l.norm1_gain, l.norm1_bias);
        auto ffn = relu(add_row(matmul(x, l.w1), l.b1));
        ffn = dropout(add_row(matmul(ffn, l.w2), l.b2), p, dropout_rng);
        x = layer_norm(add(x, ffn), l.norm2_gain, l.norm2_bias);
    }

    const auto& caps = config_.caps;
    auto row = [&x](std::size_t i) { return gather_rows(x, {static_cast<std::uint32_t>(i)}); };
    return {x, row(0), row(caps.marker_position(0)), row(caps.marker_position(1)), row(caps.marker_position(2))};
}

template <class T>
BasicTensor<T> ScopModel<T>::pretrain_score(const AmodOutput<T>& out) const {
    auto joined = concat_cols<T>({out.h_s, out.r_s, out.t_s});
    return softmax(matmul(add_row(matmul(joined, w_int_), b_int_), w_cls_));
}

template <class T>
BasicTensor<T> ScopModel<T>::finetune_score(const BasicTensor<T>& a) const {
    return softmax(matmul(a, w_ft_));
}

template <class T>
BasicTensor<T> compute_loss(const BasicTensor<T>& scores, std::span<const int> labels) {
    if (labels.empty()) throw std::invalid_argument("compute_loss: empty batch");
    if (scores.rank() != 2 || scores.cols() != 2 || scores.rows() != labels.size())
        throw ShapeError("compute_loss: expected [" + std::to_string(labels.size()) + " x 2] scores, got " +
                         shape_string(scores.shape()));
    std::vector<T> target(labels.size() * 2);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != 0 && labels[i] != 1) throw std::invalid_argument("compute_loss: labels must be 0 or 1");
        target[2 * i] = static_cast<T>(labels[i]);
        target[2 * i + 1] = static_cast<T>(1 - labels[i]);
    }
    auto picked = mul(log_clamped(scores, static_cast<T>(1e-12)), BasicTensor<T>::from(scores.shape(), std::move(target)));
    return scale(sum(picked), static_cast<T>(-1.0 / static_cast<double>(labels.size())));
}

template class ScopModel<float>;
template class ScopModel<double>;
template BasicTensor<float> compute_loss(const BasicTensor<float>&, std::span<const int>);
template BasicTensor<double> compute_loss(const BasicTensor<double>&, std::span<const int>);

}  // namespace scop
