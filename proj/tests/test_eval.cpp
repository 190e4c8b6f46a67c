#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <stdexcept>

#include "scop/eval.hpp"

using namespace scop;

namespace {

// Sort-based oracle: position of the true item after a stable descending sort
// where the true item is placed after every candidate with an equal score.
std::size_t sorted_rank(double true_score, const std::vector<double>& candidates) {
    std::vector<std::pair<double, int>> all;
    for (double c : candidates) all.push_back({c, 0});
    all.push_back({true_score, 1});
    std::stable_sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (std::size_t i = 0; i < all.size(); ++i)
        if (all[i].second == 1) return i + 1;
    return 0;
}

}  // namespace

TEST_CASE("ranking examples") {
    CHECK(rank_candidates(5, std::vector<double>{5, 1}) == 2);
    CHECK(rank_candidates(5, std::vector<double>{5, 5, 1}) == 3);
    CHECK(rank_candidates(9, std::vector<double>{5, 5, 1}) == 1);
    CHECK(rank_candidates(0, std::vector<double>{5, 5, 1}) == 4);
    CHECK(rank_candidates(1, std::vector<double>{}) == 1);
}

TEST_CASE("ranking agrees with a sort oracle on lists with ties") {
    std::mt19937_64 rng(5);
    for (std::size_t n : {200u, 1000u}) {
        std::uniform_int_distribution<int> small(0, 9);
        std::uniform_int_distribution<std::size_t> len(0, 30);
        for (std::size_t k = 0; k < n; ++k) {
            std::vector<double> c(len(rng));
            for (auto& v : c) v = small(rng);
            double truth = small(rng);
            REQUIRE(rank_candidates(truth, c) == sorted_rank(truth, c));
        }
    }
}

TEST_CASE("metrics from ranks") {
    std::vector<std::size_t> ranks{1, 2, 10};
    auto r = compute_metrics(ranks);
    CHECK(r.mrr == doctest::Approx((1 + 0.5 + 0.1) / 3));
    CHECK(r.hits1 == doctest::Approx(100.0 / 3));
    CHECK(r.hits3 == doctest::Approx(200.0 / 3));
    CHECK(r.hits10 == doctest::Approx(100.0));
    CHECK(r.queries == 3);
    CHECK_THROWS(compute_metrics(std::vector<std::size_t>{}));
}

TEST_CASE("table row formatting and json round trip") {
    EvalReport r;
    r.mrr = 0.92084;
    r.hits1 = 91.978;
    r.hits3 = 95.1;
    r.hits10 = 97.324;
    r.queries = 12;
    CHECK(r.table_row() == "0.9208, 91.98, 95.10, 97.32");
    auto back = EvalReport::from_json(r.to_json());
    CHECK(back.mrr == r.mrr);
    CHECK(back.hits3 == r.hits3);
    CHECK(back.queries == 12);
    CHECK(r.to_json().find("\"hits\"") != std::string::npos);
}

TEST_CASE("hits are monotone and bounded") {
    std::mt19937_64 rng(9);
    std::uniform_int_distribution<std::size_t> d(1, 40);
    for (int k = 0; k < 50; ++k) {
        std::vector<std::size_t> ranks(30);
        for (auto& x : ranks) x = d(rng);
        auto r = compute_metrics(ranks);
        CHECK(r.hits1 <= r.hits3);
        CHECK(r.hits3 <= r.hits10);
        CHECK(r.hits10 <= 100.0);
        CHECK(r.mrr > 0);
        CHECK(r.mrr <= 1);
    }
}

TEST_CASE("random ranking mrr") {
    CHECK(random_ranking_mrr(1) == doctest::Approx(1.0));
    CHECK(random_ranking_mrr(2) == doctest::Approx(0.75));
    CHECK(random_ranking_mrr(4) == doctest::Approx((1 + 0.5 + 1.0 / 3 + 0.25) / 4));
}

TEST_CASE("filtered tail ranking skips known positives") {
    std::vector<Triple> queries{{0, 0, 1}};
    std::vector<EntityId> candidates{0, 1, 2, 3};
    // scores: tail 3 > tail 2 > tail 1 > tail 0
    auto scorer = [](const Triple& t) { return static_cast<double>(t.tail); };
    std::unordered_set<Triple, TripleHash> none;
    CHECK(rank_tails(queries, candidates, none, scorer)[0] == 3);
    std::unordered_set<Triple, TripleHash> known{{0, 0, 3}, {0, 0, 1}};
    CHECK(rank_tails(queries, candidates, known, scorer)[0] == 2);
}

TEST_CASE("margin sweep") {
    SUBCASE("separated scores are classified perfectly") {
        std::vector<double> scores{0.0, 0.1, 0.2, 0.8, 0.9, 1.0};
        std::vector<int> labels{0, 0, 0, 1, 1, 1};
        auto s = margin_sweep(scores, labels, {60, 40, 50});
        CHECK(s.gammas == std::vector<double>{40, 50, 60});
        for (double a : s.accuracy) CHECK(a == 1.0);
        CHECK(s.spread_points() == 0.0);
    }
    SUBCASE("random scores stay near chance") {
        std::mt19937_64 rng(2);
        std::uniform_real_distribution<double> u(0, 1);
        std::bernoulli_distribution coin(0.5);
        std::vector<double> scores(2000);
        std::vector<int> labels(2000);
        for (std::size_t i = 0; i < scores.size(); ++i) {
            scores[i] = u(rng);
            labels[i] = coin(rng) ? 1 : 0;
        }
        auto s = margin_sweep(scores, labels, {50});
        CHECK(s.accuracy[0] >= 0.35);
        CHECK(s.accuracy[0] <= 0.65);
    }
    SUBCASE("flipping labels and scores mirrors the sweep") {
        std::vector<double> scores{0.0, 0.3, 0.35, 0.7, 0.9, 1.0, 0.55};
        std::vector<int> labels{0, 1, 0, 1, 0, 1, 1};
        std::vector<double> flipped;
        std::vector<int> flipped_labels;
        for (double s : scores) flipped.push_back(1.0 - s);
        for (int l : labels) flipped_labels.push_back(1 - l);
        auto a = margin_sweep(scores, labels, {25});
        auto b = margin_sweep(flipped, flipped_labels, {75});
        // only ties at the threshold could differ; none of these land on it
        CHECK(a.accuracy[0] == doctest::Approx(b.accuracy[0]));
    }
    SUBCASE("constant scores cannot be normalized") {
        std::vector<double> scores{0.4, 0.4};
        std::vector<int> labels{0, 1};
        CHECK_THROWS_AS(normalize_scores(scores), std::domain_error);
        CHECK_THROWS_AS(margin_sweep(scores, labels, {50}), std::domain_error);
    }
    SUBCASE("json lists every gamma") {
        std::vector<double> scores{0, 1};
        std::vector<int> labels{0, 1};
        auto json = margin_sweep(scores, labels, {20, 80}).to_json();
        CHECK(json.find("accuracy") != std::string::npos);
    }
}

TEST_CASE("distribution export round trip") {
    std::vector<double> scores{-3.25, 0.125, 7.0, 1.0 / 3};
    std::vector<int> labels{0, 1, 1, 0};
    auto path = std::filesystem::temp_directory_path() / "scop_test_distribution.csv";
    auto written = export_distribution(scores, labels, path);
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "index,score,label");
    auto back = read_distribution(path);
    REQUIRE(back.size() == written.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        CHECK(back[i].index == i);
        CHECK(back[i].score == written[i].score);
        CHECK(back[i].label == labels[i]);
        CHECK(back[i].score >= 0.0);
        CHECK(back[i].score <= 1.0);
    }
    CHECK(back[0].score == 0.0);
    CHECK(back[2].score == 1.0);
}
