#include "scop/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "scop/io.hpp"

namespace scop {

std::size_t rank_candidates(double true_score, std::span<const double> candidate_scores) {
    std::size_t rank = 1;
    for (double c : candidate_scores)
        if (c >= true_score) ++rank;
    return rank;
}

EvalReport compute_metrics(std::span<const std::size_t> ranks) {
    if (ranks.empty()) throw std::invalid_argument("compute_metrics: no ranks");
    EvalReport r;
    std::size_t at1 = 0, at3 = 0, at10 = 0;
    double reciprocal = 0;
    for (std::size_t rank : ranks) {
        if (rank == 0) throw std::invalid_argument("compute_metrics: ranks start at 1");
        reciprocal += 1.0 / static_cast<double>(rank);
        at1 += rank <= 1;
        at3 += rank <= 3;
        at10 += rank <= 10;
    }
    const double n = static_cast<double>(ranks.size());
    r.mrr = reciprocal / n;
    r.hits1 = 100.0 * static_cast<double>(at1) / n;
    r.hits3 = 100.0 * static_cast<double>(at3) / n;
    r.hits10 = 100.0 * static_cast<double>(at10) / n;
    r.queries = ranks.size();
    return r;
}

std::string EvalReport::to_json() const {
    nlohmann::ordered_json j;
    j["mrr"] = mrr;
    j["hits"] = {{"1", hits1}, {"3", hits3}, {"10", hits10}};
    j["queries"] = queries;
    return j.dump(2) + "\n";
}

EvalReport EvalReport::from_json(const std::string& text) {
    auto j = nlohmann::json::parse(text);
    EvalReport r;
    r.mrr = j.at("mrr").get<double>();
    r.hits1 = j.at("hits").at("1").get<double>();
    r.hits3 = j.at("hits").at("3").get<double>();
    r.hits10 = j.at("hits").at("10").get<double>();
    r.queries = j.at("queries").get<std::size_t>();
    return r;
}

std::string EvalReport::table_row() const {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%.4f, %.2f, %.2f, %.2f", mrr, hits1, hits3, hits10);
    return buf;
}

double random_ranking_mrr(std::size_t n) {
    if (n == 0) throw std::invalid_argument("random_ranking_mrr: empty ranking");
    double harmonic = 0;
    for (std::size_t k = 1; k <= n; ++k) harmonic += 1.0 / static_cast<double>(k);
    return harmonic / static_cast<double>(n);
}

std::vector<std::size_t> rank_tails(std::span<const Triple> queries, std::span<const EntityId> candidates,
                                    const std::unordered_set<Triple, TripleHash>& known, const TripleScorer& score) {
    std::vector<std::size_t> ranks;
    ranks.reserve(queries.size());
    std::vector<double> others;
    for (const auto& q : queries) {
        others.clear();
        for (EntityId c : candidates) {
            if (c == q.tail) continue;
            Triple alt{q.head, q.relation, c};
            if (known.contains(alt)) continue;
            others.push_back(score(alt));
        }
        ranks.push_back(rank_candidates(score(q), others));
    }
    return ranks;
}

EvalReport evaluate_pairs(const TaskDataset& dataset, std::span<const TaskPair> pairs, const TripleScorer& score) {
    std::vector<Triple> queries;
    queries.reserve(pairs.size());
    for (const auto& p : pairs) queries.push_back(dataset.as_triple(p));
    auto ranks = rank_tails(queries, dataset.candidate_pool, dataset.known_positives(), score);
    return compute_metrics(ranks);
}

std::vector<double> normalize_scores(std::span<const double> scores) {
    if (scores.empty()) throw std::invalid_argument("normalize_scores: no scores");
    auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
    if (!(*hi > *lo)) throw std::domain_error("normalize_scores: constant scores cannot be normalized");
    const double min = *lo, range = *hi - *lo;
    std::vector<double> out;
    out.reserve(scores.size());
    for (double s : scores) out.push_back(std::clamp((s - min) / range, 0.0, 1.0));
    return out;
}

SweepReport margin_sweep(std::span<const double> scores, std::span<const int> labels, std::vector<double> gammas) {
    if (scores.size() != labels.size()) throw std::invalid_argument("margin_sweep: one label per score expected");
    bool has_pos = std::ranges::count(labels, 1) > 0, has_neg = std::ranges::count(labels, 0) > 0;
    if (!has_pos || !has_neg) throw std::invalid_argument("margin_sweep: needs positive and negative labels");
    for (int l : labels)
        if (l != 0 && l != 1) throw std::invalid_argument("margin_sweep: labels must be 0 or 1");
    auto norm = normalize_scores(scores);
    std::ranges::sort(gammas);
    SweepReport report;
    auto [lo, hi] = std::ranges::minmax(scores);
    report.min_score = lo;
    report.max_score = hi;
    for (double g : gammas) {
        if (g < 0 || g > 100) throw std::invalid_argument("margin_sweep: gamma must be a percentage");
        std::size_t correct = 0;
        for (std::size_t i = 0; i < norm.size(); ++i) correct += (norm[i] >= g / 100.0) == (labels[i] == 1);
        report.gammas.push_back(g);
        report.accuracy.push_back(static_cast<double>(correct) / static_cast<double>(norm.size()));
    }
    return report;
}

std::string SweepReport::to_json() const {
    nlohmann::ordered_json j;
    j["gammas"] = gammas;
    j["accuracy"] = accuracy;
    j["max_score"] = max_score;
    j["min_score"] = min_score;
    return j.dump(2) + "\n";
}

double SweepReport::spread_points() const {
    if (accuracy.empty()) return 0;
    auto [lo, hi] = std::ranges::minmax(accuracy);
    return 100.0 * (hi - lo);
}

namespace {

std::string fixed6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

double parse_double(std::string_view s, std::size_t line) {
    double v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) throw ParseError("bad number '" + std::string(s) + "'", line);
    return v;
}

}  // namespace

std::vector<DistributionRecord> distribution_records(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw std::invalid_argument("distribution: one label per score expected");
    auto norm = normalize_scores(scores);
    std::vector<DistributionRecord> out;
    out.reserve(norm.size());
    for (std::size_t i = 0; i < norm.size(); ++i) {
        auto text = fixed6(norm[i]);
        out.push_back({i, parse_double(text, i + 2), labels[i]});
    }
    return out;
}

std::string format_distribution(std::span<const DistributionRecord> records) {
    std::string out = "index,score,label\n";
    for (const auto& r : records) out += std::to_string(r.index) + "," + fixed6(r.score) + "," + std::to_string(r.label) + "\n";
    return out;
}

std::vector<DistributionRecord> export_distribution(std::span<const double> scores, std::span<const int> labels,
                                                    const std::filesystem::path& path) {
    auto records = distribution_records(scores, labels);
    write_file_atomic(path, format_distribution(records));
    return records;
}

std::vector<DistributionRecord> read_distribution(const std::filesystem::path& path) {
    std::istringstream in(read_file(path));
    std::string line;
    if (!std::getline(in, line) || trim(line) != "index,score,label")
        throw ParseError("missing 'index,score,label' header", 1);
    std::vector<DistributionRecord> out;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        auto c1 = line.find(','), c2 = line.find(',', c1 == std::string::npos ? c1 : c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos) throw ParseError("expected 3 fields", lineno);
        DistributionRecord r;
        r.index = static_cast<std::size_t>(parse_double(line.substr(0, c1), lineno));
        r.score = parse_double(line.substr(c1 + 1, c2 - c1 - 1), lineno);
        r.label = static_cast<int>(parse_double(trim(line.substr(c2 + 1)), lineno));
        out.push_back(r);
    }
    return out;
}

}  // namespace scop
