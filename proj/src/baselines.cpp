#include "scop/baselines.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace scop {

std::string_view baseline_name(BaselineKind kind) {
    switch (kind) {
        case BaselineKind::TransE:
            return "transe";
        case BaselineKind::ComplEx:
            return "complex";
        case BaselineKind::RotatE:
            return "rotate";
    }
    return "unknown";
}

BaselineKind parse_baseline(std::string_view name) {
    if (name == "transe") return BaselineKind::TransE;
    if (name == "complex") return BaselineKind::ComplEx;
    if (name == "rotate") return BaselineKind::RotatE;
    throw std::invalid_argument("unknown baseline model: " + std::string(name));
}

BaselineModel::BaselineModel(BaselineKind kind, std::size_t entities, std::size_t relations, std::size_t dim)
    : kind_(kind), entities_(entities), relations_(relations), dim_(dim) {
    if (entities == 0 || relations == 0 || dim == 0)
        throw std::invalid_argument("baseline model needs entities, relations and dim >= 1");
    const std::size_t ent_width = kind == BaselineKind::TransE ? dim : 2 * dim;
    const std::size_t rel_width = kind == BaselineKind::ComplEx ? 2 * dim : dim;
    entity_ = params_.add("embedding.entity", Tensor::zeros({entities, ent_width}));
    relation_ = params_.add(kind == BaselineKind::RotatE ? "embedding.relation_phase" : "embedding.relation",
                            Tensor::zeros({relations, rel_width}));
}

void BaselineModel::initialize(Rng& rng, double std) {
    std::normal_distribution<double> normal(0.0, std);
    for (auto& v : entity_.mutable_values()) v = static_cast<float>(normal(rng));
    if (kind_ == BaselineKind::RotatE) {
        std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
        for (auto& v : relation_.mutable_values()) v = static_cast<float>(phase(rng));
    } else {
        for (auto& v : relation_.mutable_values()) v = static_cast<float>(normal(rng));
    }
}

namespace {

std::span<const float> row(const Tensor& table, std::size_t r) {
    return table.values().subspan(r * table.cols(), table.cols());
}

void require_kind(const BaselineModel& m, BaselineKind kind) {
    if (m.kind() != kind)
        throw std::invalid_argument("scorer for " + std::string(baseline_name(kind)) + " applied to a " +
                                    std::string(baseline_name(m.kind())) + " model");
}

}  // namespace

double transe_score(const BaselineModel& m, const Triple& t) {
    require_kind(m, BaselineKind::TransE);
    auto h = row(m.entity_table(), t.head);
    auto r = row(m.relation_table(), t.relation);
    auto tl = row(m.entity_table(), t.tail);
    double s = 0;
    for (std::size_t i = 0; i < m.dim(); ++i) {
        double diff = static_cast<double>(h[i]) + r[i] - tl[i];
        s += diff * diff;
    }
    return -std::sqrt(s);
}

double complex_score(const BaselineModel& m, const Triple& t) {
    require_kind(m, BaselineKind::ComplEx);
    const std::size_t d = m.dim();
    auto h = row(m.entity_table(), t.head);
    auto r = row(m.relation_table(), t.relation);
    auto tl = row(m.entity_table(), t.tail);
    double s = 0;
    for (std::size_t i = 0; i < d; ++i) {
        double hr = h[i], hi = h[d + i], rr = r[i], ri = r[d + i], tr = tl[i], ti = tl[d + i];
        // Re((hr + i hi)(rr + i ri)(tr - i ti))
        s += hr * rr * tr + hi * rr * ti + hr * ri * ti - hi * ri * tr;
    }
    return s;
}

double rotate_score(const BaselineModel& m, const Triple& t) {
    require_kind(m, BaselineKind::RotatE);
    const std::size_t d = m.dim();
    auto h = row(m.entity_table(), t.head);
    auto phase = row(m.relation_table(), t.relation);
    auto tl = row(m.entity_table(), t.tail);
    double s = 0;
    for (std::size_t i = 0; i < d; ++i) {
        double c = std::cos(static_cast<double>(phase[i])), sn = std::sin(static_cast<double>(phase[i]));
        double re = h[i] * c - h[d + i] * sn - tl[i];
        double im = h[i] * sn + h[d + i] * c - tl[d + i];
        s += re * re + im * im;
    }
    return -std::sqrt(s);
}

double BaselineModel::score(const Triple& t) const {
    switch (kind_) {
        case BaselineKind::TransE:
            return transe_score(*this, t);
        case BaselineKind::ComplEx:
            return complex_score(*this, t);
        case BaselineKind::RotatE:
            return rotate_score(*this, t);
    }
    return 0;
}

Tensor BaselineModel::score_batch(std::span<const Triple> triples) const {
    std::vector<std::uint32_t> heads, rels, tails;
    for (const auto& t : triples) {
        heads.push_back(t.head);
        rels.push_back(t.relation);
        tails.push_back(t.tail);
    }
    auto h = gather_rows(entity_, std::move(heads));
    auto r = gather_rows(relation_, std::move(rels));
    auto tl = gather_rows(entity_, std::move(tails));
    const std::size_t d = dim_;
    switch (kind_) {
        case BaselineKind::TransE:
            return scale(row_norm(sub(add(h, r), tl)), -1.0f);
        case BaselineKind::ComplEx: {
            auto hr = slice_cols(h, 0, d), hi = slice_cols(h, d, d);
            auto rr = slice_cols(r, 0, d), ri = slice_cols(r, d, d);
            auto tr = slice_cols(tl, 0, d), ti = slice_cols(tl, d, d);
            auto terms = sub(add(add(mul(mul(hr, rr), tr), mul(mul(hi, rr), ti)), mul(mul(hr, ri), ti)),
                             mul(mul(hi, ri), tr));
            return sum_cols(terms);
        }
        case BaselineKind::RotatE: {
            auto hr = slice_cols(h, 0, d), hi = slice_cols(h, d, d);
            auto tr = slice_cols(tl, 0, d), ti = slice_cols(tl, d, d);
            auto c = cosine(r), s = sine(r);
            auto re = sub(sub(mul(hr, c), mul(hi, s)), tr);
            auto im = sub(add(mul(hr, s), mul(hi, c)), ti);
            return scale(row_norm(concat_cols<float>({re, im})), -1.0f);
        }
    }
    throw std::logic_error("unreachable baseline kind");
}

Tensor logistic_loss(const Tensor& scores, std::span<const int> labels) {
    if (labels.empty()) throw std::invalid_argument("logistic_loss: empty batch");
    if (scores.size() != labels.size()) throw ShapeError("logistic_loss: one score per label expected");
    std::vector<float> sign(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) sign[i] = labels[i] == 1 ? -1.0f : 1.0f;
    return mean(softplus(mul(scores, Tensor::from(scores.shape(), std::move(sign)))));
}

BaselineTrainer::BaselineTrainer(BaselineModel& model, TrainOptions options, std::uint64_t seed)
    : model_(model), options_(options), rng_(seed), state_(model.parameters(), options.adam) {
    options_.schedule.validate();
    options_.policy.validate();
    if (options_.batch_size == 0) throw std::invalid_argument("batch size must be positive");
}

std::vector<StepRecord> BaselineTrainer::run_batches(std::span<const LabeledTriple> examples) {
    std::vector<StepRecord> log;
    for (std::size_t start = 0; start < examples.size(); start += options_.batch_size) {
        auto batch = examples.subspan(start, std::min(options_.batch_size, examples.size() - start));
        std::vector<Triple> triples;
        std::vector<int> labels;
        for (const auto& ex : batch) {
            triples.push_back(ex.triple);
            labels.push_back(ex.label);
        }
        auto loss = logistic_loss(model_.score_batch(triples), labels);
        model_.parameters().zero_grad();
        backprop(loss);
        ++step_;
        const double lr = lr_at(step_, options_.schedule);
        adam_step(model_.parameters(), state_, lr);
        log.push_back({step_, loss.item(), lr});
    }
    return log;
}

std::vector<StepRecord> BaselineTrainer::graph_epoch(const KnowledgeGraph& kg) {
    auto examples = with_negatives(std::span<const Triple>(kg.triples()), rng_, [&](const Triple& t) {
        return sample_negative(kg, t, options_.policy, rng_, &negative_stats_);
    });
    return run_batches(examples);
}

std::vector<StepRecord> BaselineTrainer::pair_epoch(const TaskDataset& dataset) {
    auto known = dataset.known_positives();
    std::vector<Triple> positives;
    for (const auto& p : dataset.train) positives.push_back(dataset.as_triple(p));
    auto examples = with_negatives(std::span<const Triple>(positives), rng_, [&](const Triple& t) {
        return dataset.as_triple(sample_pair_negative({t.head, t.tail, 1}, dataset.task_relation,
                                                      dataset.candidate_pool, known, rng_, options_.policy.max_resample));
    });
    return run_batches(examples);
}

void save_baseline(const std::filesystem::path& path, const BaselineModel& model,
                   const std::map<std::string, std::string>& extra) {
    std::map<std::string, std::string> kv{{"model", std::string(baseline_name(model.kind()))},
                                          {"d", std::to_string(model.dim())},
                                          {"entities", std::to_string(model.entity_count())},
                                          {"relations", std::to_string(model.relation_count())}};
    for (const auto& [k, v] : extra) kv[k] = v;
    save_checkpoint(path, std::move(kv), model.parameters());
}

BaselineModel baseline_from_checkpoint(const Checkpoint& ckpt) {
    BaselineKind kind;
    std::size_t dim = 0, entities = 0, relations = 0;
    try {
        kind = parse_baseline(ckpt.get("model"));
        dim = std::stoul(ckpt.get("d"));
        entities = std::stoul(ckpt.get("entities"));
        relations = std::stoul(ckpt.get("relations"));
    } catch (const CheckpointError&) {
        throw;
    } catch (const std::exception& e) {
        throw CheckpointError(CheckpointErrorKind::Malformed, std::string("baseline checkpoint config: ") + e.what());
    }
    BaselineModel model(kind, entities, relations, dim);
    load_parameters(ckpt, model.parameters());
    return model;
}

}  // namespace scop
