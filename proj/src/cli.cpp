#include "scop/cli.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>

#include "scop/baselines.hpp"
#include "scop/checkpoint.hpp"
#include "scop/eval.hpp"
#include "scop/io.hpp"
#include "scop/kg.hpp"
#include "scop/model.hpp"
#include "scop/training.hpp"
#include "scop/verify.hpp"

namespace fs = std::filesystem;

namespace scop::cli {

namespace {

/// Raised for bad user input; reported without a stack of context.
class UsageError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

constexpr const char* kDefaultSeed = "42";

class Settings {
   public:
    explicit Settings(std::map<std::string, std::string> kv) : kv_(std::move(kv)) {}

    bool has(const std::string& key) const { return kv_.contains(key) && !kv_.at(key).empty(); }

    const std::string& text(const std::string& key) const {
        auto it = kv_.find(key);
        if (it == kv_.end() || it->second.empty()) throw UsageError("missing required setting --" + key);
        return it->second;
    }

    std::string text_or(const std::string& key, const std::string& fallback) const {
        return has(key) ? kv_.at(key) : fallback;
    }

    std::uint64_t count(const std::string& key) const {
        const auto& v = text(key);
        try {
            std::size_t used = 0;
            if (!v.empty() && v[0] == '-') throw std::invalid_argument("negative");
            auto n = std::stoull(v, &used);
            if (used != v.size()) throw std::invalid_argument("trailing characters");
            return n;
        } catch (const std::exception&) {
            throw UsageError("--" + key + " expects a non-negative integer, got '" + v + "'");
        }
    }

    double real(const std::string& key) const {
        const auto& v = text(key);
        try {
            std::size_t used = 0;
            double x = std::stod(v, &used);
            if (used != v.size()) throw std::invalid_argument("trailing characters");
            return x;
        } catch (const std::exception&) {
            throw UsageError("--" + key + " expects a number, got '" + v + "'");
        }
    }

    bool flag(const std::string& key) const {
        const auto& v = text(key);
        if (v == "true" || v == "1") return true;
        if (v == "false" || v == "0") return false;
        throw UsageError("--" + key + " expects true or false, got '" + v + "'");
    }

    const std::map<std::string, std::string>& all() const { return kv_; }

   private:
    std::map<std::string, std::string> kv_;
};

std::vector<double> parse_list(const std::string& key, const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            auto t = trim(item);
            out.push_back(std::stod(t, &used));
            if (used != t.size()) throw std::invalid_argument("trailing characters");
        } catch (const std::exception&) {
            throw UsageError("--" + key + " expects comma-separated numbers, got '" + text + "'");
        }
    }
    if (out.empty()) throw UsageError("--" + key + " is empty");
    return out;
}

ModelConfig model_config(const Settings& s) {
    ModelConfig c;
    c.d = s.count("d");
    c.layers = s.count("layers");
    c.heads = s.count("heads");
    c.caps = ContextCaps::with_cap(s.count("cap"));
    c.dropout = s.real("dropout");
    c.ffn_multiplier = s.count("ffn_multiplier");
    try {
        c.validate();
    } catch (const std::exception& e) {
        throw UsageError(e.what());
    }
    return c;
}

TrainOptions train_options(const Settings& s) {
    TrainOptions o;
    o.schedule = {s.real("lr"), s.count("warmup")};
    o.batch_size = s.count("batch");
    o.exclude_self = s.flag("exclude_self");
    try {
        o.schedule.validate();
    } catch (const std::exception& e) {
        throw UsageError(e.what());
    }
    if (o.batch_size == 0) throw UsageError("--batch must be positive");
    return o;
}

std::string format_loss_log(const std::vector<StepRecord>& log) {
    std::string out = "step,loss,lr\n";
    char buf[96];
    for (const auto& r : log) {
        std::snprintf(buf, sizeof buf, "%llu,%.9g,%.9g\n", static_cast<unsigned long long>(r.step), r.loss, r.lr);
        out += buf;
    }
    return out;
}

enum class Task { Triples, Typing, Alignment };

Task parse_task(const std::string& name) {
    if (name == "triples") return Task::Triples;
    if (name == "typing") return Task::Typing;
    if (name == "alignment") return Task::Alignment;
    throw UsageError("--task must be triples, typing or alignment, got '" + name + "'");
}

std::string default_relation(Task t) {
    switch (t) {
        case Task::Typing:
            return "_hypernym";
        case Task::Alignment:
            return "_similar_to";
        case Task::Triples:
            break;
    }
    throw UsageError("--relation is required for this task");
}

/// Graph (and task data when --data is given) the command works on.
struct Workspace {
    KnowledgeGraph graph;
    std::optional<TaskDataset> dataset;
};

Workspace load_workspace(const Settings& s) {
    if (s.has("data")) {
        auto build = load_task_directory(s.text("data"));
        return {std::move(build.context), std::move(build.dataset)};
    }
    if (s.has("kg")) return {load_triples(s.text("kg")), std::nullopt};
    throw UsageError("either --kg or --data is required");
}

const TaskDataset& require_dataset(const Workspace& ws) {
    if (!ws.dataset) throw UsageError("pair tasks need --data pointing at a build-dataset directory");
    return *ws.dataset;
}

void check_vocabulary(const Checkpoint& ckpt, const KnowledgeGraph& g) {
    auto e = std::stoull(ckpt.get("entities")), r = std::stoull(ckpt.get("relations"));
    if (e != g.entity_count() || r != g.relation_count())
        throw UsageError("checkpoint was trained on " + std::to_string(e) + " entities / " + std::to_string(r) +
                         " relations but the graph has " + std::to_string(g.entity_count()) + " / " +
                         std::to_string(g.relation_count()));
}

/// A loaded model of either family behind one scoring interface.
struct AnyModel {
    std::optional<ScopModel<float>> scop;
    std::optional<BaselineModel> baseline;
    Head head = Head::Pretrain;

    TripleScorer scorer(const KnowledgeGraph& context, bool exclude_self) const {
        if (scop) {
            const auto* m = &*scop;
            auto h = head;
            return [m, &context, h, exclude_self](const Triple& t) {
                return positive_probability(*m, context, t, h, exclude_self);
            };
        }
        const auto* b = &*baseline;
        return [b](const Triple& t) { return b->score(t); };
    }
};

AnyModel load_any(const fs::path& path) {
    auto ckpt = read_checkpoint(path);
    AnyModel m;
    if (ckpt.get("model") == "scop") {
        m.scop.emplace(model_from_checkpoint(ckpt));
        auto it = ckpt.config.find("head");
        m.head = it != ckpt.config.end() && it->second == "finetune" ? Head::Finetune : Head::Pretrain;
    } else {
        m.baseline.emplace(baseline_from_checkpoint(ckpt));
    }
    return m;
}

void ensure_out(const Settings& s) {
    fs::path out = s.text("out");
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec || !fs::is_directory(out)) throw UsageError("cannot create output directory " + out.string());
}

void write_run_config(const Settings& s) {
    write_file_atomic(fs::path(s.text("out")) / "run.cfg", format_key_values(s.all()));
}

// ---- subcommands ---------------------------------------------------------

int cmd_build_dataset(const Settings& s, std::ostream& out) {
    ensure_out(s);
    auto task = parse_task(s.text("task"));
    auto relation = s.has("relation") ? s.text("relation") : default_relation(task);
    auto r = parse_list("ratios", s.text("ratios"));
    if (r.size() != 3) throw UsageError("--ratios expects train,dev,test");
    auto kg = load_triples(s.text("kg"));
    Rng rng(s.count("seed"));
    TaskBuild build;
    try {
        build = build_task_dataset(kg, relation, {r[0], r[1], r[2]}, rng);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    write_task_directory(s.text("out"), build);
    write_run_config(s);
    const auto& d = build.dataset;
    out << "relation " << relation << "\n";
    out << "train " << d.train.size() << "\ndev " << d.dev.size() << "\ntest " << d.test.size() << "\n";
    out << d.train.size() << "/" << d.dev.size() << "/" << d.test.size() << "\n";
    out << "context triples " << build.context.size() << "\n";
    return 0;
}

int cmd_pretrain(const Settings& s, std::ostream& out) {
    ensure_out(s);
    const auto epochs = s.count("epochs");
    const auto seed = s.count("seed");
    auto ws = load_workspace(s);
    auto opts = train_options(s);
    const auto kind = s.text("model");
    fs::path dir = s.text("out");
    std::vector<StepRecord> log;
    std::map<std::string, std::string> extra{{"seed", std::to_string(seed)}, {"epochs", std::to_string(epochs)}};

    if (kind == "scop") {
        auto cfg = model_config(s);
        ScopModel<float> model(cfg, ws.graph.entity_count(), ws.graph.relation_count());
        Rng init(seed);
        model.initialize(init, s.real("init_std"));
        ScopTrainer trainer(model, opts, seed + 1);
        for (std::uint64_t e = 0; e < epochs; ++e) {
            auto part = trainer.triple_epoch(ws.graph, Head::Pretrain);
            log.insert(log.end(), part.begin(), part.end());
        }
        extra["head"] = "pretrain";
        save_model(dir / "model.ckpt", model, extra);
    } else {
        BaselineModel model(parse_baseline(kind), ws.graph.entity_count(), ws.graph.relation_count(), s.count("d"));
        Rng init(seed);
        model.initialize(init, s.real("init_std"));
        BaselineTrainer trainer(model, opts, seed + 1);
        for (std::uint64_t e = 0; e < epochs; ++e) {
            auto part = trainer.graph_epoch(ws.graph);
            log.insert(log.end(), part.begin(), part.end());
        }
        save_baseline(dir / "model.ckpt", model, extra);
    }
    write_file_atomic(dir / "loss.csv", format_loss_log(log));
    if (!s.has("data")) {
        write_vocabulary(dir / "entities.tsv", ws.graph.entities());
        write_vocabulary(dir / "relations.tsv", ws.graph.relations());
    }
    write_run_config(s);
    out << "model " << kind << " epochs " << epochs << " steps " << log.size();
    if (!log.empty()) out << " final loss " << log.back().loss;
    out << "\n";
    return 0;
}

int cmd_finetune(const Settings& s, std::ostream& out) {
    ensure_out(s);
    const auto epochs = s.count("epochs");
    const auto seed = s.count("seed");
    auto task = parse_task(s.text("task"));
    auto ws = load_workspace(s);
    auto opts = train_options(s);
    auto ckpt = read_checkpoint(s.text("ckpt"));
    check_vocabulary(ckpt, ws.graph);
    fs::path dir = s.text("out");
    std::vector<StepRecord> log;
    std::map<std::string, std::string> extra{{"seed", std::to_string(seed)},
                                             {"epochs", std::to_string(epochs)},
                                             {"task", s.text("task")}};
    const TaskDataset* dataset = task == Task::Triples ? nullptr : &require_dataset(ws);

    if (ckpt.get("model") == "scop") {
        auto model = model_from_checkpoint(ckpt);
        ScopTrainer trainer(model, opts, seed + 1);
        for (std::uint64_t e = 0; e < epochs; ++e) {
            auto part = dataset ? trainer.pair_epoch(ws.graph, *dataset) : trainer.triple_epoch(ws.graph, Head::Finetune);
            log.insert(log.end(), part.begin(), part.end());
        }
        extra["head"] = "finetune";
        save_model(dir / "model.ckpt", model, extra);
    } else {
        auto model = baseline_from_checkpoint(ckpt);
        BaselineTrainer trainer(model, opts, seed + 1);
        for (std::uint64_t e = 0; e < epochs; ++e) {
            auto part = dataset ? trainer.pair_epoch(*dataset) : trainer.graph_epoch(ws.graph);
            log.insert(log.end(), part.begin(), part.end());
        }
        save_baseline(dir / "model.ckpt", model, extra);
    }
    write_file_atomic(dir / "loss.csv", format_loss_log(log));
    write_run_config(s);
    out << "finetuned " << ckpt.get("model") << " on " << s.text("task") << " for " << epochs << " epochs, "
        << log.size() << " steps\n";
    return 0;
}

std::span<const TaskPair> split_of(const TaskDataset& d, const std::string& name) {
    if (name == "train") return d.train;
    if (name == "dev") return d.dev;
    if (name == "test") return d.test;
    throw UsageError("--split must be train, dev or test, got '" + name + "'");
}

int cmd_evaluate(const Settings& s, std::ostream& out) {
    ensure_out(s);
    auto task = parse_task(s.text("task"));
    auto ws = load_workspace(s);
    auto model = load_any(s.text("ckpt"));
    check_vocabulary(read_checkpoint(s.text("ckpt")), ws.graph);
    auto score = model.scorer(ws.graph, s.flag("exclude_self"));

    EvalReport report;
    if (task == Task::Triples) {
        std::vector<EntityId> all(ws.graph.entity_count());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<EntityId>(i);
        std::unordered_set<Triple, TripleHash> known(ws.graph.triples().begin(), ws.graph.triples().end());
        report = compute_metrics(rank_tails(ws.graph.triples(), all, known, score));
    } else {
        const auto& d = require_dataset(ws);
        report = evaluate_pairs(d, split_of(d, s.text("split")), score);
    }
    write_file_atomic(fs::path(s.text("out")) / "report.json", report.to_json());
    write_run_config(s);
    out << "queries " << report.queries << "\n";
    out << "MRR, Hit@1, Hit@3, Hit@10: " << report.table_row() << "\n";
    return 0;
}

int cmd_analyze(const Settings& s, std::ostream& out) {
    ensure_out(s);
    auto task = parse_task(s.text("task"));
    auto gammas = parse_list("gammas", s.text("gammas"));
    auto ws = load_workspace(s);
    auto model = load_any(s.text("ckpt"));
    check_vocabulary(read_checkpoint(s.text("ckpt")), ws.graph);
    auto score = model.scorer(ws.graph, s.flag("exclude_self"));
    Rng rng(s.count("seed"));

    std::vector<LabeledTriple> examples;
    if (task == Task::Triples) {
        NegativePolicy policy;
        for (const auto& t : ws.graph.triples()) {
            examples.push_back({t, 1});
            examples.push_back({sample_negative(ws.graph, t, policy, rng), 0});
        }
    } else {
        const auto& d = require_dataset(ws);
        auto known = d.known_positives();
        for (const auto& p : split_of(d, s.text("split"))) {
            examples.push_back({d.as_triple(p), 1});
            examples.push_back({d.as_triple(sample_pair_negative(p, d.task_relation, d.candidate_pool, known, rng)), 0});
        }
    }
    if (examples.empty()) throw UsageError("nothing to analyze: the selected split is empty");

    std::vector<double> scores;
    std::vector<int> labels;
    for (const auto& ex : examples) {
        scores.push_back(score(ex.triple));
        labels.push_back(ex.label);
    }
    auto sweep = margin_sweep(scores, labels, gammas);
    fs::path dir = s.text("out");
    write_file_atomic(dir / "sweep.json", sweep.to_json());
    export_distribution(scores, labels, dir / "distribution.csv");
    write_run_config(s);
    for (std::size_t i = 0; i < sweep.gammas.size(); ++i) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "gamma %g accuracy %.4f\n", sweep.gammas[i], sweep.accuracy[i]);
        out << buf;
    }
    out << "spread " << sweep.spread_points() << " points\n";
    return 0;
}

int cmd_gradcheck(const Settings& s, std::ostream& out) {
    const auto start = std::chrono::steady_clock::now();
    auto report = scop_gradcheck(s.count("seed"), s.real("tolerance"));
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::string text;
    char buf[256];
    for (const auto& p : report.parameters) {
        std::snprintf(buf, sizeof buf, "%-40s max_rel_error %.3e (element %zu: analytic %.6e numeric %.6e)\n",
                      p.name.c_str(), p.max_error, p.worst_element, p.analytic, p.numeric);
        text += buf;
    }
    std::snprintf(buf, sizeof buf, "worst %s %.3e tolerance %.1e %s in %.1fs\n", report.worst_parameter.c_str(),
                  report.max_error, report.tolerance, report.passed() ? "PASS" : "FAIL", seconds);
    text += buf;
    out << text;
    if (s.has("out")) {
        ensure_out(s);
        write_file_atomic(fs::path(s.text("out")) / "gradcheck.txt", text);
        write_run_config(s);
    }
    return report.passed() ? 0 : 1;
}

struct FlagSpec {
    const char* name;
    const char* help;
    std::vector<std::string> commands;
};

const std::vector<std::string> kTrainCommands{"pretrain", "finetune"};
const std::vector<std::string> kModelCommands{"pretrain", "finetune", "evaluate", "analyze"};

std::vector<FlagSpec> flag_specs() {
    return {
        {"kg", "triple file (head<TAB>relation<TAB>tail)", {"build-dataset", "pretrain", "finetune", "evaluate", "analyze"}},
        {"data", "task directory written by build-dataset", kModelCommands},
        {"ckpt", "input checkpoint", {"finetune", "evaluate", "analyze"}},
        {"out", "output directory", {"build-dataset", "pretrain", "finetune", "evaluate", "analyze", "gradcheck"}},
        {"seed", "random seed", {"build-dataset", "pretrain", "finetune", "analyze", "gradcheck"}},
        {"epochs", "training epochs", kTrainCommands},
        {"task", "triples, typing or alignment", {"build-dataset", "finetune", "evaluate", "analyze"}},
        {"relation", "task relation name", {"build-dataset"}},
        {"ratios", "train,dev,test split ratios", {"build-dataset"}},
        {"gammas", "comma-separated margins in percent", {"analyze"}},
        {"split", "train, dev or test", {"evaluate", "analyze"}},
        {"model", "scop, transe, complex or rotate", {"pretrain"}},
        {"preset", "default or toy", kModelCommands},
        {"d", "hidden dimension", {"pretrain"}},
        {"layers", "encoder layers", {"pretrain"}},
        {"heads", "attention heads", {"pretrain"}},
        {"cap", "context slots per segment", {"pretrain"}},
        {"dropout", "dropout probability", {"pretrain"}},
        {"ffn_multiplier", "feed-forward width multiplier", {"pretrain"}},
        {"init_std", "initialization standard deviation", {"pretrain"}},
        {"lr", "peak learning rate", kTrainCommands},
        {"warmup", "linear warmup steps", kTrainCommands},
        {"batch", "batch size", kTrainCommands},
        {"exclude_self", "remove the target from its own context (true/false)", kModelCommands},
        {"tolerance", "maximum relative gradient error", {"gradcheck"}},
    };
}

std::map<std::string, std::string> command_defaults(const std::string& command) {
    std::map<std::string, std::string> d{{"seed", kDefaultSeed}};
    if (command == "build-dataset") {
        d["task"] = "typing";
        d["ratios"] = "0.8,0.1,0.1";
    } else if (command == "gradcheck") {
        d["tolerance"] = "1e-3";
    } else {
        d["task"] = "triples";
        d["split"] = "test";
        d["gammas"] = "20,40,60,80";
        d["model"] = "scop";
        d["exclude_self"] = "true";
    }
    return d;
}

}  // namespace

std::map<std::string, std::string> preset(const std::string& name) {
    if (name == "default")
        return {{"d", "192"},     {"layers", "6"},    {"heads", "3"},        {"cap", "84"},
                {"dropout", "0.1"}, {"lr", "2e-5"},   {"batch", "32"},       {"warmup", "1000"},
                {"ffn_multiplier", "4"}, {"init_std", "0.02"}};
    if (name == "toy")
        return {{"d", "32"},      {"layers", "2"},    {"heads", "2"},        {"cap", "8"},
                {"dropout", "0"}, {"lr", "3e-4"},     {"batch", "8"},        {"warmup", "50"},
                {"ffn_multiplier", "4"}, {"init_std", "0.15"}, {"epochs", "200"}};
    throw UsageError("unknown preset '" + name + "' (expected default or toy)");
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"SCoP knowledge-graph representation toolkit", "scop"};
    app.require_subcommand(1);
    const auto specs = flag_specs();
    std::map<std::string, std::map<std::string, std::string>> given;
    std::map<std::string, std::string> config_file;
    std::map<std::string, CLI::App*> subs;
    const std::vector<std::pair<std::string, std::string>> commands{
        {"build-dataset", "split a task relation into train/dev/test pairs and prune the context graph"},
        {"pretrain", "train SCoP or a baseline on triple classification"},
        {"finetune", "continue training a checkpoint on a task"},
        {"evaluate", "rank held-out items and write MRR / Hit@k"},
        {"analyze", "margin sweep and score distribution export"},
        {"gradcheck", "finite-difference check of every SCoP parameter gradient"},
    };
    for (const auto& [name, description] : commands) {
        auto* sub = app.add_subcommand(name, description);
        subs[name] = sub;
        sub->add_option("--config", config_file[name], "key = value settings file; flags override it");
        for (const auto& spec : specs)
            if (std::ranges::find(spec.commands, name) != spec.commands.end())
                sub->add_option(std::string("--") + spec.name, given[name][spec.name], spec.help);
    }
    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    std::string command;
    for (const auto& [name, sub] : subs)
        if (sub->parsed()) command = name;

    try {
        auto kv = command_defaults(command);
        std::map<std::string, std::string> file_kv;
        if (!config_file[command].empty()) file_kv = parse_key_values(read_file(config_file[command]));
        std::map<std::string, std::string> flags;
        for (const auto& [key, value] : given[command])
            if (subs[command]->count("--" + key) > 0) flags[key] = value;
        for (const auto& [key, value] : file_kv)
            if (std::ranges::none_of(specs, [&](const FlagSpec& f) { return key == f.name; }))
                throw UsageError("unknown setting '" + key + "' in " + config_file[command]);

        auto preset_name = flags.contains("preset")     ? flags["preset"]
                           : file_kv.contains("preset") ? file_kv["preset"]
                                                        : std::string("default");
        if (command != "build-dataset" && command != "gradcheck")
            for (const auto& [key, value] : preset(preset_name)) kv[key] = value;
        for (const auto& [key, value] : file_kv) kv[key] = value;
        for (const auto& [key, value] : flags) kv[key] = value;
        if (command != "build-dataset" && command != "gradcheck") kv["preset"] = preset_name;
        kv["command"] = command;
        Settings s(kv);

        for (const char* key : {"kg", "data", "ckpt"})
            if (s.has(key) && !fs::exists(s.text(key))) throw UsageError(std::string("--") + key + ": no such path " + s.text(key));
        if (command != "gradcheck" && !s.has("out")) throw UsageError("missing required setting --out");

        if (command == "build-dataset") return cmd_build_dataset(s, out);
        if (command == "pretrain") return cmd_pretrain(s, out);
        if (command == "finetune") return cmd_finetune(s, out);
        if (command == "evaluate") return cmd_evaluate(s, out);
        if (command == "analyze") return cmd_analyze(s, out);
        return cmd_gradcheck(s, out);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace scop::cli
