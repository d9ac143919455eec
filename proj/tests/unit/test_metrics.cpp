#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "densenote/metrics.hpp"
#include "helpers.hpp"

using namespace densenote;
using namespace densenote::metrics;
using testutil::tiny_tower;

namespace {

// O(n * K) reference implementation over explicit per-query scans.
RecallReport naive_recall(const Rankings& rankings, const Truth& truth,
                          const std::vector<int>& ks) {
    RecallReport rep;
    rep.n_queries = static_cast<std::int64_t>(truth.size());
    for (int k : ks) rep.successes[k] = 0;
    for (const auto& [qid, gt] : truth) {
        const auto& ranked = rankings.at(qid);
        for (int k : ks) {
            const auto end = ranked.begin() +
                             std::min<std::ptrdiff_t>(k, static_cast<std::ptrdiff_t>(ranked.size()));
            if (std::find(ranked.begin(), end, gt) != end)
                rep.successes[k] += 1;
        }
    }
    for (int k : ks)
        rep.recall[k] = static_cast<double>(rep.successes[k]) / rep.n_queries;
    return rep;
}

// O(n^2) pairwise AUC with half credit for ties.
double naive_auc(const std::vector<int>& labels, const std::vector<double>& scores) {
    double num = 0.0;
    std::int64_t pairs = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != 1) continue;
        for (std::size_t j = 0; j < labels.size(); ++j) {
            if (labels[j] != 0) continue;
            pairs += 1;
            if (scores[i] > scores[j]) num += 1.0;
            else if (scores[i] == scores[j]) num += 0.5;
        }
    }
    return num / static_cast<double>(pairs);
}

}  // namespace

TEST_CASE("recall_at_k: perfect ranker and rank boundaries") {
    Rankings rankings;
    Truth truth;
    for (std::int64_t q = 1; q <= 5; ++q) {
        truth[q] = 100 + q;
        rankings[q] = {100 + q, 7, 8, 9};
    }
    const auto rep = recall_at_k(rankings, truth, {1, 3});
    CHECK(rep.recall.at(1) == 1.0);
    CHECK(rep.recall.at(3) == 1.0);

    // Ground truth exactly at rank 51.
    Rankings r2;
    Truth t2{{1, 999}};
    std::vector<std::int64_t> ranked;
    for (int i = 0; i < 100; ++i) ranked.push_back(i);
    ranked[50] = 999;
    r2[1] = ranked;
    const auto rep2 = recall_at_k(r2, t2, {50, 100});
    CHECK(rep2.recall.at(50) == 0.0);
    CHECK(rep2.recall.at(100) == 1.0);

    CHECK_THROWS_AS(recall_at_k({}, t2, {10}), MissingRanking);
}

TEST_CASE("recall_at_k matches the naive scan on random instances") {
    Rng rng(3);
    for (int inst = 0; inst < 40; ++inst) {
        Rankings rankings;
        Truth truth;
        const int n_q = 25;
        for (std::int64_t q = 1; q <= n_q; ++q) {
            std::vector<std::int64_t> docs;
            for (std::int64_t d = 0; d < 40; ++d) docs.push_back(d);
            rng.shuffle(docs);
            truth[q] = static_cast<std::int64_t>(rng.below(40));
            rankings[q] = docs;
        }
        const std::vector<int> ks{1, 5, 10, 25};
        const auto a = recall_at_k(rankings, truth, ks);
        const auto b = naive_recall(rankings, truth, ks);
        for (int k : ks) CHECK(a.recall.at(k) == b.recall.at(k));
    }
}

TEST_CASE("recall is monotone in K") {
    Rng rng(5);
    Rankings rankings;
    Truth truth;
    for (std::int64_t q = 1; q <= 50; ++q) {
        std::vector<std::int64_t> docs;
        for (std::int64_t d = 0; d < 60; ++d) docs.push_back(d);
        rng.shuffle(docs);
        truth[q] = static_cast<std::int64_t>(rng.below(60));
        rankings[q] = docs;
    }
    const std::vector<int> ks{1, 2, 5, 10, 20, 40, 60};
    const auto rep = recall_at_k(rankings, truth, ks);
    for (std::size_t i = 1; i < ks.size(); ++i)
        CHECK(rep.recall.at(ks[i]) >= rep.recall.at(ks[i - 1]));
}

TEST_CASE("auc: separations, ties, and degenerate labels") {
    CHECK(auc({1, 1, 0, 0}, {0.9, 0.8, 0.2, 0.1}) == doctest::Approx(1.0));
    CHECK(auc({1, 0, 1, 0}, {0.5, 0.5, 0.5, 0.5}) == doctest::Approx(0.5));
    CHECK_THROWS_AS(auc({1, 1}, {0.5, 0.7}), DegenerateLabels);
    CHECK_THROWS_AS(auc({0, 0}, {0.5, 0.7}), DegenerateLabels);
}

TEST_CASE("auc matches the quadratic oracle to 1e-12") {
    Rng rng(7);
    for (int inst = 0; inst < 60; ++inst) {
        const std::size_t n = 30 + rng.below(40);
        std::vector<int> labels(n);
        std::vector<double> scores(n);
        int pos = 0;
        for (std::size_t i = 0; i < n; ++i) {
            labels[i] = rng.uniform() < 0.4 ? 1 : 0;
            pos += labels[i];
            // Quantized scores force tie handling.
            scores[i] = std::floor(rng.uniform() * 12.0) / 12.0 +
                        (labels[i] ? 0.05 * rng.uniform() : 0.0);
        }
        if (pos == 0 || pos == static_cast<int>(n)) continue;
        CHECK(std::abs(auc(labels, scores) - naive_auc(labels, scores)) < 1e-12);
    }
}

TEST_CASE("auc is invariant under strictly increasing transforms") {
    Rng rng(11);
    std::vector<int> labels;
    std::vector<double> scores;
    for (int i = 0; i < 80; ++i) {
        labels.push_back(rng.uniform() < 0.5 ? 1 : 0);
        scores.push_back(rng.normal());
    }
    labels[0] = 1;
    labels[1] = 0;
    const double base = auc(labels, scores);
    auto apply = [&](auto f) {
        std::vector<double> t(scores.size());
        for (std::size_t i = 0; i < scores.size(); ++i) t[i] = f(scores[i]);
        return auc(labels, t);
    };
    CHECK(std::abs(apply([](double s) { return 3.0 * s + 7.0; }) - base) < 1e-12);
    CHECK(std::abs(apply([](double s) { return std::exp(s); }) - base) < 1e-12);
    CHECK(std::abs(apply([](double s) { return std::atan(s); }) - base) < 1e-12);
}

namespace {

struct EntropyWorld {
    std::vector<corpus::Document> docs;
    std::vector<corpus::Query> queries;
    std::vector<corpus::TrainingTriplet> triplets;
    train::TextStore texts;
    Tokenizer tok{101};

    explicit EntropyWorld(int n, std::uint64_t seed) {
        Rng rng(seed);
        for (int i = 0; i < 2 * n; ++i) {
            corpus::Document d;
            d.id = i + 1;
            d.title = "t" + std::to_string(rng.below(60));
            d.topic = "topic";
            d.content = "c" + std::to_string(rng.below(60)) + " c" +
                        std::to_string(rng.below(60));
            docs.push_back(std::move(d));
        }
        for (int i = 0; i < n; ++i) {
            queries.push_back({i + 1, "q" + std::to_string(rng.below(60))});
            triplets.push_back({i + 1, 2 * i + 1, 2 * i + 2,
                                corpus::TripletSource::RelOneHop});
        }
        texts = train::TextStore::build(docs, {&queries});
    }
};

}  // namespace

TEST_CASE("contrastive_entropy: untrained towers sit near log(pool)") {
    EntropyWorld world(24, 13);
    auto doc = make_tower(tiny_tower(1, 16, 2, 8));
    auto query = make_tower(tiny_tower(1, 16, 2, 8));
    init_params(doc, 17);
    init_params(query, 18);

    const double h = contrastive_entropy(doc, query, world.tok, world.triplets,
                                         world.texts, 10.0, 8, 24);
    // With a huge temperature the softmax is uniform: entropy ~ log(24).
    CHECK(h == doctest::Approx(std::log(24.0)).epsilon(0.10));
    CHECK(h > 0.0);
}

TEST_CASE("contrastive_entropy is permutation invariant in the batch") {
    EntropyWorld world(16, 19);
    auto doc = make_tower(tiny_tower(1, 16, 2, 8));
    auto query = make_tower(tiny_tower(1, 16, 2, 8));
    init_params(doc, 23);
    init_params(query, 29);

    const double a = contrastive_entropy(doc, query, world.tok, world.triplets,
                                         world.texts, 0.1, 8, 16);
    auto shuffled = world.triplets;
    Rng rng(31);
    rng.shuffle(shuffled);
    const double b = contrastive_entropy(doc, query, world.tok, shuffled,
                                         world.texts, 0.1, 8, 16);
    CHECK(a == doctest::Approx(b).epsilon(1e-12));
}
