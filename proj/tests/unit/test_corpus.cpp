#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <set>

#include "densenote/corpus.hpp"

using namespace densenote;
using namespace densenote::corpus;

namespace {

CorpusStats stats_of(std::initializer_list<Document> docs) {
    return CorpusStats::build(std::vector<Document>(docs));
}

SynthConfig small_synth(std::uint64_t seed = 5) {
    SynthConfig cfg;
    cfg.seed = seed;
    cfg.n_docs = 150;
    cfg.n_queries = 60;
    cfg.n_eval_queries = 20;
    cfg.vocab_size = 300;
    return cfg;
}

}  // namespace

TEST_CASE("score_terms: unseen term gets the maximum score") {
    const auto st = stats_of({{1, "a b", "t", "a c"}, {2, "a", "t", "a d"}});
    const auto scores = score_terms({1, "zzz"}, st);
    CHECK(scores.at("zzz") == doctest::Approx(1.0));
}

TEST_CASE("score_terms: IDF ordering and range") {
    // "a" appears in every document, "b" in one.
    const auto st = stats_of({{1, "a b", "t", "a"}, {2, "a", "t", "a"},
                              {3, "a", "t", "a"}});
    const auto scores = score_terms({1, "a a b"}, st);
    CHECK(scores.size() == 2);  // distinct terms
    CHECK(scores.at("b") > scores.at("a"));
    for (const auto& [t, s] : scores) {
        CHECK(s >= 0.0);
        CHECK(s <= 1.0);
    }
    CHECK_THROWS_AS(score_terms({9, "  "}, st), EmptyQuery);
}

TEST_CASE("score_terms: deterministic for a fixed corpus") {
    const auto data = synth_corpus(small_synth());
    const auto s1 = score_terms(data.train_queries[0], data.stats);
    const auto s2 = score_terms(data.train_queries[0], data.stats);
    CHECK(s1 == s2);
}

TEST_CASE("match_association: hand-traced click checks") {
    TermScores s1{{"x", 0.9}, {"y", 0.8}};
    TermScores s2{{"x", 0.95}, {"y", 0.85}};
    const auto r = match_association(s1, s2, 0.5, 0.5);
    CHECK(r.click_a_q1_from_q2);
    CHECK(r.click_a_q2_from_q1);

    // Missing term scores zero under the strictest reading.
    TermScores s2_missing{{"x", 0.95}};
    const auto r2 = match_association(s1, s2_missing, 0.5, 0.5);
    CHECK_FALSE(r2.click_a_q1_from_q2);
}

TEST_CASE("match_association: self association and symmetry") {
    TermScores s{{"a", 0.9}, {"b", 0.8}, {"c", 0.7}, {"d", 0.6}};
    const auto r = match_association(s, s, 0.5, 0.5);
    CHECK(r.rel_a);

    TermScores other{{"a", 0.9}, {"b", 0.8}, {"c", 0.7}, {"e", 0.6}};
    const auto ab = match_association(s, other, 0.5, 0.55);
    const auto ba = match_association(other, s, 0.5, 0.55);
    CHECK(ab.rel_a == ba.rel_a);
}

TEST_CASE("match_association: raising thresholds never enables an association") {
    Rng rng(17);
    const char* names[] = {"t0", "t1", "t2", "t3", "t4", "t5"};
    for (int trial = 0; trial < 200; ++trial) {
        TermScores s1, s2;
        for (const char* n : names) {
            if (rng.uniform() < 0.8) s1[n] = rng.uniform();
            if (rng.uniform() < 0.8) s2[n] = rng.uniform();
        }
        if (s1.empty() || s2.empty()) continue;
        const double lo = rng.uniform() * 0.5;
        const double hi = lo + rng.uniform() * 0.5;
        const auto r_lo = match_association(s1, s2, lo, lo);
        const auto r_hi = match_association(s1, s2, hi, hi);
        if (r_hi.click_a_q1_from_q2) CHECK(r_lo.click_a_q1_from_q2);
        if (r_hi.click_a_q2_from_q1) CHECK(r_lo.click_a_q2_from_q1);
        if (r_hi.rel_a) CHECK(r_lo.rel_a);
    }
}

TEST_CASE("build_onehop: negative ranks stay inside (K, T]") {
    RelevanceRecord rec;
    rec.query_id = 1;
    for (int r = 0; r < 100; ++r) rec.ranked.push_back({100 + r, 1.0 - 0.01 * r});
    const int k = 10, t = 50;
    const auto triplets = build_onehop({}, {rec}, k, t, 9);
    REQUIRE(!triplets.empty());
    for (const auto& tr : triplets) {
        CHECK(tr.pos_doc_id == rec.ranked.front().doc_id);
        CHECK(tr.source == TripletSource::RelOneHop);
        // Recover the 1-based rank of the negative from the stored list.
        std::size_t rank = 0;
        for (std::size_t i = 0; i < rec.ranked.size(); ++i)
            if (rec.ranked[i].doc_id == tr.neg_doc_id) rank = i + 1;
        CHECK(rank > static_cast<std::size_t>(k));
        CHECK(rank <= static_cast<std::size_t>(t));
    }
}

TEST_CASE("build_onehop: clicked-everything queries are skipped with a counter") {
    ClickRecord cr;
    cr.query_id = 2;
    cr.exposed = {7};
    cr.clicked = {7};
    OneHopStats stats;
    const auto triplets = build_onehop({cr}, {}, 10, 50, 4, &stats);
    CHECK(triplets.empty());
    CHECK(stats.skipped_no_negative == 1);
}

TEST_CASE("build_onehop: deterministic under seed") {
    ClickRecord cr;
    cr.query_id = 3;
    cr.exposed = {1, 2, 3, 4, 5};
    cr.clicked = {1, 3};
    RelevanceRecord rec;
    rec.query_id = 3;
    for (int r = 0; r < 60; ++r) rec.ranked.push_back({200 + r, 1.0 - 0.01 * r});
    const auto a = build_onehop({cr}, {rec}, 5, 40, 123);
    const auto b = build_onehop({cr}, {rec}, 5, 40, 123);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].query_id == b[i].query_id);
        CHECK(a[i].pos_doc_id == b[i].pos_doc_id);
        CHECK(a[i].neg_doc_id == b[i].neg_doc_id);
    }
    CHECK_THROWS_AS(build_onehop({}, {}, 50, 50, 1), ConfigError);
}

TEST_CASE("expand_multihop: relevance association mirrors bidirectionally") {
    std::vector<TrainingTriplet> base{{2, 20, 21, TripletSource::RelOneHop}};
    Association a{1, 2, {}};
    a.result.rel_a = true;
    const auto out = expand_multihop(base, {a});
    REQUIRE(out.size() == 2);
    CHECK(out[1].query_id == 1);
    CHECK(out[1].pos_doc_id == 20);
    CHECK(out[1].neg_doc_id == 21);
    CHECK(out[1].source == TripletSource::RelMultiHop);
}

TEST_CASE("expand_multihop: no associations is the identity") {
    std::vector<TrainingTriplet> base{{1, 10, 11, TripletSource::ClickOneHop},
                                      {2, 20, 21, TripletSource::RelOneHop}};
    const auto out = expand_multihop(base, {});
    REQUIRE(out.size() == base.size());
    for (std::size_t i = 0; i < base.size(); ++i)
        CHECK(out[i].query_id == base[i].query_id);
}

TEST_CASE("expand_multihop: one-directional click expansion") {
    std::vector<TrainingTriplet> base{{1, 10, 11, TripletSource::ClickOneHop},
                                      {2, 20, 21, TripletSource::ClickOneHop}};
    Association a{1, 2, {}};
    a.result.click_a_q1_from_q2 = true;  // q1 inherits q2's click docs only
    const auto out = expand_multihop(base, {a});
    REQUIRE(out.size() == 3);
    CHECK(out[2].query_id == 1);
    CHECK(out[2].pos_doc_id == 20);
    CHECK(out[2].source == TripletSource::ClickMultiHop);
}

TEST_CASE("expand_multihop: idempotent") {
    std::vector<TrainingTriplet> base{{1, 10, 11, TripletSource::ClickOneHop},
                                      {2, 20, 21, TripletSource::ClickOneHop},
                                      {2, 22, 23, TripletSource::RelOneHop}};
    std::vector<Association> assocs(1);
    assocs[0] = {1, 2, {}};
    assocs[0].result.click_a_q1_from_q2 = true;
    assocs[0].result.rel_a = true;
    const auto once = expand_multihop(base, assocs);
    const auto twice = expand_multihop(once, assocs);
    REQUIRE(once.size() == twice.size());
    for (std::size_t i = 0; i < once.size(); ++i) {
        CHECK(once[i].query_id == twice[i].query_id);
        CHECK(once[i].pos_doc_id == twice[i].pos_doc_id);
        CHECK(once[i].neg_doc_id == twice[i].neg_doc_id);
    }
}

TEST_CASE("synth_corpus: validations and disjoint held-out ids") {
    CHECK_THROWS_AS(synth_corpus(SynthConfig{1, 10, 5, 2, 100}), ConfigError);

    const auto data = synth_corpus(small_synth());
    CHECK(data.docs.size() == 150);
    std::set<std::int64_t> train_ids, eval_ids;
    for (const auto& q : data.train_queries) train_ids.insert(q.id);
    for (const auto& q : data.eval_queries) eval_ids.insert(q.id);
    CHECK(train_ids.size() == data.train_queries.size());
    std::vector<std::int64_t> inter;
    std::set_intersection(train_ids.begin(), train_ids.end(), eval_ids.begin(),
                          eval_ids.end(), std::back_inserter(inter));
    CHECK(inter.empty());

    std::set<std::int64_t> doc_ids;
    for (const auto& d : data.docs) {
        CHECK(!d.title.empty());
        CHECK(!d.topic.empty());
        CHECK(!d.content.empty());
        doc_ids.insert(d.id);
    }
    CHECK(doc_ids.size() == data.docs.size());
}

TEST_CASE("synth_corpus: ground-truth doc tops its query's oracle ranking") {
    const auto data = synth_corpus(small_synth(11));
    int top = 0, total = 0;
    for (const auto& q : data.train_queries) {
        const auto gt = data.truth.at(q.id);
        const double gt_score = data.oracle(q.text, data.doc_by_id(gt));
        bool beaten = false;
        for (const auto& d : data.docs) {
            if (d.id != gt && data.oracle(q.text, d) > gt_score) {
                beaten = true;
                break;
            }
        }
        top += beaten ? 0 : 1;
        total += 1;
    }
    CHECK(static_cast<double>(top) / total >= 0.95);
}

TEST_CASE("synth_corpus: byte-identical artifacts under a fixed seed") {
    const auto a = synth_corpus(small_synth(21));
    const auto b = synth_corpus(small_synth(21));
    const char* pa = "/tmp/densenote_corpus_a.jsonl";
    const char* pb = "/tmp/densenote_corpus_b.jsonl";
    save_documents(a.docs, pa);
    save_documents(b.docs, pb);
    CHECK(read_file(pa) == read_file(pb));
    save_relevance(a.relevance, pa);
    save_relevance(b.relevance, pb);
    CHECK(read_file(pa) == read_file(pb));
    std::remove(pa);
    std::remove(pb);
}

TEST_CASE("jsonl round trips") {
    const auto data = synth_corpus(small_synth(31));
    const char* path = "/tmp/densenote_roundtrip.jsonl";

    save_documents(data.docs, path);
    const auto docs = load_documents(path);
    REQUIRE(docs.size() == data.docs.size());
    CHECK(docs[3].title == data.docs[3].title);

    save_queries(data.train_queries, path);
    CHECK(load_queries(path)[2].text == data.train_queries[2].text);

    OneHopStats stats;
    auto triplets = build_onehop(data.clicks, data.relevance, 10, 50, 77, &stats);
    REQUIRE(!triplets.empty());
    save_triplets(triplets, path);
    const auto loaded = load_triplets(path);
    REQUIRE(loaded.size() == triplets.size());
    CHECK(loaded[0].source == triplets[0].source);
    CHECK(loaded[0].neg_doc_id == triplets[0].neg_doc_id);

    save_truth(data.truth, path);
    CHECK(load_truth(path).size() == data.truth.size());
    save_clicks(data.clicks, path);
    CHECK(load_clicks(path).size() == data.clicks.size());
    std::remove(path);
}

TEST_CASE("one-hop negatives re-check against the stored relevance lists") {
    const auto data = synth_corpus(small_synth(41));
    const auto triplets = build_onehop(data.clicks, data.relevance, 10, 50, 13);
    std::unordered_map<std::int64_t, const RelevanceRecord*> rel;
    for (const auto& r : data.relevance) rel[r.query_id] = &r;
    for (const auto& t : triplets) {
        CHECK(t.pos_doc_id != t.neg_doc_id);
        if (t.source != TripletSource::RelOneHop) continue;
        const auto& ranked = rel.at(t.query_id)->ranked;
        std::size_t rank = 0;
        for (std::size_t i = 0; i < ranked.size(); ++i)
            if (ranked[i].doc_id == t.neg_doc_id) rank = i + 1;
        CHECK(rank > 10);
        CHECK(rank <= 50);
    }
}
