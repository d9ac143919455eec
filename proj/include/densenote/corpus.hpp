#pragma once

// Synthetic corpus generation with a relevance oracle, plus training-triplet
// construction: one-hop click/relevance triplets and multi-hop expansion
// driven by query-association matching.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "densenote/common.hpp"
#include "densenote/tokenizer.hpp"

namespace densenote::corpus {

struct Document {
    std::int64_t id = 0;
    std::string title;
    std::string topic;
    std::string content;
};

struct Query {
    std::int64_t id = 0;
    std::string text;
};

enum class TripletSource { ClickOneHop, ClickMultiHop, RelOneHop, RelMultiHop };

const char* to_string(TripletSource s);
TripletSource triplet_source_from_string(const std::string& s);

struct TrainingTriplet {
    std::int64_t query_id = 0;
    std::int64_t pos_doc_id = 0;
    std::int64_t neg_doc_id = 0;
    TripletSource source = TripletSource::ClickOneHop;
};

// Term -> importance score in [0, 1].
using TermScores = std::map<std::string, double>;

struct AssociationResult {
    bool click_a_q1_from_q2 = false;
    bool click_a_q2_from_q1 = false;
    bool rel_a = false;
};

struct Association {
    std::int64_t q1 = 0;
    std::int64_t q2 = 0;
    AssociationResult result;
};

// ---------------------------------------------------------------------------
// Term scoring. The production query planner is replaced by a pluggable
// scorer; the default scores each term by IDF normalized into [0, 1] against
// the rarest attainable term (df = 0).
// ---------------------------------------------------------------------------

struct CorpusStats {
    std::int64_t n_docs = 0;
    std::unordered_map<std::string, std::int64_t> doc_freq;

    double idf(const std::string& term) const;
    static CorpusStats build(const std::vector<Document>& docs);
};

TermScores score_terms(const Query& query, const CorpusStats& stats);

// Top-n scoring terms, ties broken by lexicographic term order. Returns all
// terms when fewer than n are available.
std::vector<std::string> top_terms(const TermScores& scores, std::size_t n);

AssociationResult match_association(const TermScores& s1, const TermScores& s2,
                                    double th_click, double th_rel);

// ---------------------------------------------------------------------------
// Click log and relevance candidates (the synthetic stand-ins for production
// behavior logs and the cross-encoder ranking model).
// ---------------------------------------------------------------------------

struct ClickRecord {
    std::int64_t query_id = 0;
    std::vector<std::int64_t> exposed;   // documents shown for the query
    std::vector<std::int64_t> clicked;   // subset of exposed
};

struct ScoredDoc {
    std::int64_t doc_id = 0;
    double score = 0.0;
};

struct RelevanceRecord {
    std::int64_t query_id = 0;
    std::vector<ScoredDoc> ranked;  // descending score, ties by ascending id
};

struct OneHopStats {
    std::int64_t skipped_no_negative = 0;  // clicked queries with no unclicked exposure
    std::int64_t skipped_short_list = 0;   // relevance lists shorter than T
};

std::vector<TrainingTriplet> build_onehop(
    const std::vector<ClickRecord>& clicks,
    const std::vector<RelevanceRecord>& relevance,
    int k_filter, int t_filter, std::uint64_t seed,
    OneHopStats* stats = nullptr);

// Copies one-hop documents across associated queries. Only one-hop triplets
// propagate, which makes the expansion idempotent.
std::vector<TrainingTriplet> expand_multihop(
    const std::vector<TrainingTriplet>& triplets,
    const std::vector<Association>& associations);

// ---------------------------------------------------------------------------
// Synthetic corpus.
// ---------------------------------------------------------------------------

struct SynthConfig {
    std::uint64_t seed = 1;
    int n_docs = 2000;
    int n_queries = 1000;      // training queries
    int n_eval_queries = 300;  // held out, disjoint ids
    int vocab_size = 800;      // generator word inventory (pre-hash)
    int n_topics = 0;          // 0 = derived from n_docs
    int content_min = 12;
    int content_max = 28;
    int exposed_per_query = 12;
    int relevance_depth = 100;  // ranks stored per query
};

struct SynthData {
    std::vector<Document> docs;
    std::vector<Query> train_queries;
    std::vector<Query> eval_queries;
    std::unordered_map<std::int64_t, std::int64_t> truth;  // query id -> source doc
    std::vector<ClickRecord> clicks;
    std::vector<RelevanceRecord> relevance;

    // Oracle internals kept for scoring arbitrary (query, doc) pairs.
    std::vector<std::string> vocabulary;
    std::vector<std::vector<double>> doc_topic_mix;  // per doc, normalized
    std::unordered_map<std::string, std::vector<double>> word_topic_affinity;
    CorpusStats stats;

    const Document& doc_by_id(std::int64_t id) const;
    const Query* query_by_id(std::int64_t id) const;  // train or eval

    // Relevance oracle in [0, 1]: IDF-weighted lexical coverage blended with
    // topic-affinity cosine.
    double oracle(const std::string& query_text, const Document& d) const;

    // Full ranking of all documents for a query text, descending oracle score,
    // ties by ascending doc id.
    std::vector<ScoredDoc> oracle_ranking(const std::string& query_text) const;

private:
    mutable std::unordered_map<std::int64_t, std::size_t> doc_pos_;
    mutable std::unordered_map<std::int64_t, std::size_t> query_pos_;
    void build_lookup() const;
    friend SynthData synth_corpus(const SynthConfig&);
};

SynthData synth_corpus(const SynthConfig& cfg);

// ---------------------------------------------------------------------------
// JSON Lines persistence (snake_case keys).
// ---------------------------------------------------------------------------

void save_documents(const std::vector<Document>&, const std::string& path);
std::vector<Document> load_documents(const std::string& path);
void save_queries(const std::vector<Query>&, const std::string& path);
std::vector<Query> load_queries(const std::string& path);
void save_triplets(const std::vector<TrainingTriplet>&, const std::string& path);
std::vector<TrainingTriplet> load_triplets(const std::string& path);
void save_truth(const std::unordered_map<std::int64_t, std::int64_t>&,
                const std::string& path);
std::unordered_map<std::int64_t, std::int64_t> load_truth(const std::string& path);
void save_clicks(const std::vector<ClickRecord>&, const std::string& path);
std::vector<ClickRecord> load_clicks(const std::string& path);
void save_relevance(const std::vector<RelevanceRecord>&, const std::string& path);
std::vector<RelevanceRecord> load_relevance(const std::string& path);

}  // namespace densenote::corpus
