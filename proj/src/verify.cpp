#include "scop/verify.hpp"

#include <cmath>

#include "scop/context.hpp"
#include "scop/kg.hpp"

namespace scop {

ModelConfig gradcheck_config() {
    ModelConfig cfg;
    cfg.d = 8;
    cfg.layers = 1;
    cfg.heads = 1;
    cfg.caps = ContextCaps::with_cap(4);
    cfg.dropout = 0.0;
    return cfg;
}

GradCheckReport scop_gradcheck(std::uint64_t seed, double tolerance, GradCheckOptions options) {
    auto kg = generate_toy_graph({12, 3, 30, 3}, seed);
    ScopModel<float> init(gradcheck_config(), kg.entity_count(), kg.relation_count());
    Rng rng(seed);
    init.initialize(rng, 1.0);
    auto model = init.cast<double>();
    // Check point away from ReLU kinks and layer-norm blow-up: unit-scale
    // embeddings, fan-in scaled matrices, ReLU biases far into the active side.
    for (auto& p : model.parameters()) {
        if (p.name.starts_with("embedding.") || p.tensor.shape().size() != 2) continue;
        const double scale = 0.5 / std::sqrt(static_cast<double>(p.tensor.shape()[0]));
        for (auto& v : p.tensor.mutable_values()) v *= scale;
    }
    for (auto& p : model.parameters())
        if (p.name == "cmod.bias" || p.name.ends_with("ffn.inner.bias"))
            for (auto& v : p.tensor.mutable_values()) v = 3.0;

    std::vector<InputSequence> sequences;
    std::vector<int> labels;
    NegativePolicy policy;
    for (std::size_t i = 0; i < 3; ++i) {
        const Triple& t = kg.triple(i * 7 % kg.size());
        sequences.push_back(assemble_sequence(kg, t, model.config().caps, true, rng, Mode::Eval));
        labels.push_back(1);
        sequences.push_back(
            assemble_sequence(kg, sample_negative(kg, t, policy, rng), model.config().caps, true, rng, Mode::Eval));
        labels.push_back(0);
    }

    auto forward = [&]() {
        std::vector<BasicTensor<double>> pre, fine;
        for (const auto& seq : sequences) {
            auto out = model.forward(seq, nullptr);
            pre.push_back(model.pretrain_score(out));
            fine.push_back(model.finetune_score(out.a));
        }
        return add(compute_loss(concat_rows(pre), labels), compute_loss(concat_rows(fine), labels));
    };
    return grad_check<double>(forward, model.parameters(), tolerance, options);
}

}  // namespace scop
