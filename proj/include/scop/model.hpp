#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "scop/context.hpp"
#include "scop/kg.hpp"
#include "scop/optim.hpp"
#include "scop/tensor.hpp"

namespace scop {

struct ModelConfig {
    std::size_t d = 192;
    std::size_t layers = 6;
    std::size_t heads = 3;
    ContextCaps caps{};
    double dropout = 0.1;
    std::size_t ffn_multiplier = 4;

    void validate() const;
    std::map<std::string, std::string> to_key_values() const;
    static ModelConfig from_key_values(const std::map<std::string, std::string>& kv);
};

/// Hidden states of the final encoder layer and the four readout rows.
template <class T>
struct AmodOutput {
    BasicTensor<T> hidden;  // [L x d]
    BasicTensor<T> a;       // [1 x d], AGG position
    BasicTensor<T> h_s;     // [1 x d], HEA position
    BasicTensor<T> r_s;     // [1 x d], REL position
    BasicTensor<T> t_s;     // [1 x d], TAI position
};

enum class Head { Pretrain, Finetune };

template <class T>
class ScopModel {
   public:
    /// Zero weights, unit layer-norm gains. Call initialize() for training.
    ScopModel(const ModelConfig& config, std::size_t entities, std::size_t relations);

    ScopModel(ScopModel&&) noexcept = default;
    ScopModel& operator=(ScopModel&&) noexcept = default;

    /// N(0, std) for embeddings and weight matrices; biases stay zero and
    /// layer-norm gains stay one.
    void initialize(Rng& rng, double std = 0.02);

    const ModelConfig& config() const { return config_; }
    std::size_t entity_count() const { return entities_; }
    std::size_t relation_count() const { return relations_; }
    ParameterSet<T>& parameters() { return params_; }
    const ParameterSet<T>& parameters() const { return params_; }

    /// C-Mod: ReLU([h'; r'; t'] W_c + b_c) for each triple -> [n x d].
    BasicTensor<T> cmod_encode(std::span<const Triple> triples) const;

    /// Marker/PAD embeddings or C-Mod outputs per slot, plus segment vectors.
    BasicTensor<T> embed_sequence(const InputSequence& seq) const;

    /// Post-norm Transformer encoder over `embedded`; masked keys get no
    /// attention weight. `dropout_rng == nullptr` disables dropout.
    AmodOutput<T> amod_forward(const BasicTensor<T>& embedded, std::span<const std::uint8_t> mask,
                               Rng* dropout_rng) const;

    AmodOutput<T> forward(const InputSequence& seq, Rng* dropout_rng) const {
        return amod_forward(embed_sequence(seq), seq.mask, dropout_rng);
    }

    /// softmax(([h_s; r_s; t_s] W_int + b) W_cls) -> [1 x 2].
    BasicTensor<T> pretrain_score(const AmodOutput<T>& out) const;
    /// softmax(a W) -> [1 x 2].
    BasicTensor<T> finetune_score(const BasicTensor<T>& a) const;

    BasicTensor<T> score(const InputSequence& seq, Head head, Rng* dropout_rng) const {
        auto out = forward(seq, dropout_rng);
        return head == Head::Pretrain ? pretrain_score(out) : finetune_score(out.a);
    }

    /// Deep copy with converted storage type.
    template <class U>
    ScopModel<U> cast() const {
        ScopModel<U> other(config_, entities_, relations_);
        for (std::size_t i = 0; i < params_.size(); ++i) {
            auto src = params_[i].tensor.values();
            auto dst = other.parameters()[i].tensor.mutable_values();
            for (std::size_t k = 0; k < src.size(); ++k) dst[k] = static_cast<U>(src[k]);
        }
        return other;
    }

    ScopModel clone() const { return cast<T>(); }

   private:
    struct Layer {
        BasicTensor<T> wq, bq, wk, bk, wv, bv, wo, bo;
        BasicTensor<T> norm1_gain, norm1_bias;
        BasicTensor<T> w1, b1, w2, b2;
        BasicTensor<T> norm2_gain, norm2_bias;
    };

    BasicTensor<T> add_param(const std::string& name, Shape shape);

    ModelConfig config_;
    std::size_t entities_ = 0;
    std::size_t relations_ = 0;
    ParameterSet<T> params_;

    BasicTensor<T> entity_emb_, relation_emb_, marker_emb_, segment_emb_;
    BasicTensor<T> cmod_w_, cmod_b_;
    std::vector<Layer> layers_;
    BasicTensor<T> w_int_, b_int_, w_cls_, w_ft_;
};

/// Mean over the batch of -[y log s_0 + (1 - y) log s_1]; s_0 is the
/// probability of the positive class. Probabilities are clamped to >= 1e-12.
template <class T>
BasicTensor<T> compute_loss(const BasicTensor<T>& scores, std::span<const int> labels);

extern template class ScopModel<float>;
extern template class ScopModel<double>;
extern template BasicTensor<float> compute_loss(const BasicTensor<float>&, std::span<const int>);
extern template BasicTensor<double> compute_loss(const BasicTensor<double>&, std::span<const int>);

}  // namespace scop
