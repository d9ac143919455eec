#include "densenote/corpus.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace densenote::corpus {

using nlohmann::json;

const char* to_string(TripletSource s) {
    switch (s) {
        case TripletSource::ClickOneHop: return "click_1hop";
        case TripletSource::ClickMultiHop: return "click_multihop";
        case TripletSource::RelOneHop: return "rel_1hop";
        case TripletSource::RelMultiHop: return "rel_multihop";
    }
    return "unknown";
}

TripletSource triplet_source_from_string(const std::string& s) {
    if (s == "click_1hop") return TripletSource::ClickOneHop;
    if (s == "click_multihop") return TripletSource::ClickMultiHop;
    if (s == "rel_1hop") return TripletSource::RelOneHop;
    if (s == "rel_multihop") return TripletSource::RelMultiHop;
    throw IoError("unknown triplet source: " + s);
}

// ---------------------------------------------------------------------------
// Term scoring.
// ---------------------------------------------------------------------------

double CorpusStats::idf(const std::string& term) const {
    const auto it = doc_freq.find(term);
    const std::int64_t df = it == doc_freq.end() ? 0 : it->second;
    return std::log(static_cast<double>(n_docs + 1) / static_cast<double>(df + 1));
}

CorpusStats CorpusStats::build(const std::vector<Document>& docs) {
    CorpusStats st;
    st.n_docs = static_cast<std::int64_t>(docs.size());
    for (const auto& d : docs) {
        std::set<std::string> seen;
        for (const std::string* field : {&d.title, &d.topic, &d.content}) {
            for (auto& t : Tokenizer::split_terms(*field)) seen.insert(std::move(t));
        }
        for (const auto& t : seen) st.doc_freq[t] += 1;
    }
    return st;
}

TermScores score_terms(const Query& query, const CorpusStats& stats) {
    const auto terms = Tokenizer::split_terms(query.text);
    if (terms.empty()) throw EmptyQuery("query " + std::to_string(query.id) + " has no terms");
    // Normalize against the rarest attainable term (df = 0) so that scores
    // are comparable across queries and an unseen term maps to 1.
    const double idf_max = std::log(static_cast<double>(stats.n_docs + 1));
    TermScores out;
    for (const auto& t : terms) {
        const double s = idf_max > 0.0 ? stats.idf(t) / idf_max : 0.0;
        out[t] = std::clamp(s, 0.0, 1.0);
    }
    return out;
}

std::vector<std::string> top_terms(const TermScores& scores, std::size_t n) {
    std::vector<std::pair<std::string, double>> items(scores.begin(), scores.end());
    std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (items.size() > n) items.resize(n);
    std::vector<std::string> out;
    out.reserve(items.size());
    for (auto& it : items) out.push_back(std::move(it.first));
    return out;
}

namespace {
// AllAbove from the matching algorithm: every term must score strictly above
// the threshold in the other query's score map; missing terms score 0.
bool all_above(const std::vector<std::string>& terms, const TermScores& scores,
               double threshold) {
    for (const auto& t : terms) {
        const auto it = scores.find(t);
        const double s = it == scores.end() ? 0.0 : it->second;
        if (!(s > threshold)) return false;
    }
    return true;
}
}  // namespace

AssociationResult match_association(const TermScores& s1, const TermScores& s2,
                                    double th_click, double th_rel) {
    AssociationResult r;
    r.click_a_q1_from_q2 = all_above(top_terms(s1, 2), s2, th_click);
    r.click_a_q2_from_q1 = all_above(top_terms(s2, 2), s1, th_click);
    r.rel_a = all_above(top_terms(s1, 4), s2, th_rel) &&
              all_above(top_terms(s2, 4), s1, th_rel);
    return r;
}

// ---------------------------------------------------------------------------
// One-hop triplets.
// ---------------------------------------------------------------------------

std::vector<TrainingTriplet> build_onehop(const std::vector<ClickRecord>& clicks,
                                          const std::vector<RelevanceRecord>& relevance,
                                          int k_filter, int t_filter,
                                          std::uint64_t seed, OneHopStats* stats) {
    if (k_filter < 0 || k_filter >= t_filter)
        throw ConfigError("build_onehop requires 0 <= K < T");
    OneHopStats local;
    std::vector<TrainingTriplet> out;
    Rng rng(derive_seed(seed, 0xC11C5ULL));

    for (const auto& rec : clicks) {
        if (rec.clicked.empty()) continue;
        std::set<std::int64_t> clicked(rec.clicked.begin(), rec.clicked.end());
        std::vector<std::int64_t> unclicked;
        for (auto d : rec.exposed)
            if (!clicked.count(d)) unclicked.push_back(d);
        if (unclicked.empty()) {
            local.skipped_no_negative += 1;
            continue;
        }
        for (auto pos : rec.clicked) {
            const auto neg = unclicked[rng.below(unclicked.size())];
            out.push_back({rec.query_id, pos, neg, TripletSource::ClickOneHop});
        }
    }

    Rng rel_rng(derive_seed(seed, 0x4E1ULL));
    for (const auto& rec : relevance) {
        if (static_cast<int>(rec.ranked.size()) < t_filter) {
            local.skipped_short_list += 1;
            continue;
        }
        const auto pos = rec.ranked.front().doc_id;
        // Hard negative drawn from ranks (K, T], i.e. past the top-K filter.
        const auto pick = static_cast<std::size_t>(
            rel_rng.uniform_int(k_filter, t_filter - 1));
        const auto neg = rec.ranked[pick].doc_id;
        if (neg == pos) continue;  // only possible on degenerate inputs
        out.push_back({rec.query_id, pos, neg, TripletSource::RelOneHop});
    }

    if (stats) *stats = local;
    return out;
}

// ---------------------------------------------------------------------------
// Multi-hop expansion.
// ---------------------------------------------------------------------------

namespace {
struct TripletKey {
    std::int64_t q, p, n;
    bool operator<(const TripletKey& o) const {
        if (q != o.q) return q < o.q;
        if (p != o.p) return p < o.p;
        return n < o.n;
    }
};
}  // namespace

std::vector<TrainingTriplet> expand_multihop(
    const std::vector<TrainingTriplet>& triplets,
    const std::vector<Association>& associations) {
    std::unordered_map<std::int64_t, std::vector<const TrainingTriplet*>> click_1hop;
    std::unordered_map<std::int64_t, std::vector<const TrainingTriplet*>> rel_1hop;
    std::set<TripletKey> seen;
    std::vector<TrainingTriplet> out;
    out.reserve(triplets.size());

    for (const auto& t : triplets) {
        if (seen.insert({t.query_id, t.pos_doc_id, t.neg_doc_id}).second)
            out.push_back(t);
        // Only one-hop data propagates, which keeps expansion idempotent.
        if (t.source == TripletSource::ClickOneHop)
            click_1hop[t.query_id].push_back(&t);
        else if (t.source == TripletSource::RelOneHop)
            rel_1hop[t.query_id].push_back(&t);
    }

    auto copy_from = [&](std::int64_t dst, std::int64_t src, bool click) {
        const auto& index = click ? click_1hop : rel_1hop;
        const auto it = index.find(src);
        if (it == index.end()) return;
        for (const auto* t : it->second) {
            if (!seen.insert({dst, t->pos_doc_id, t->neg_doc_id}).second) continue;
            out.push_back({dst, t->pos_doc_id, t->neg_doc_id,
                           click ? TripletSource::ClickMultiHop
                                 : TripletSource::RelMultiHop});
        }
    };

    for (const auto& a : associations) {
        if (a.result.click_a_q1_from_q2) copy_from(a.q1, a.q2, /*click=*/true);
        if (a.result.click_a_q2_from_q1) copy_from(a.q2, a.q1, /*click=*/true);
        if (a.result.rel_a) {
            copy_from(a.q1, a.q2, /*click=*/false);
            copy_from(a.q2, a.q1, /*click=*/false);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Synthetic corpus generation.
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> make_vocabulary(int size, Rng& rng) {
    static const char* kConsonants[] = {"b", "d", "f", "g", "k", "l", "m",
                                        "n", "p", "r", "s", "t", "v", "z"};
    static const char* kVowels[] = {"a", "e", "i", "o", "u"};
    std::set<std::string> seen;
    std::vector<std::string> words;
    words.reserve(static_cast<std::size_t>(size));
    while (static_cast<int>(words.size()) < size) {
        const int syllables = 2 + static_cast<int>(rng.below(2));
        std::string w;
        for (int s = 0; s < syllables; ++s) {
            w += kConsonants[rng.below(14)];
            w += kVowels[rng.below(5)];
        }
        if (seen.insert(w).second) words.push_back(std::move(w));
    }
    return words;
}

}  // namespace

const Document& SynthData::doc_by_id(std::int64_t id) const {
    build_lookup();
    const auto it = doc_pos_.find(id);
    if (it == doc_pos_.end()) throw Error("unknown document id " + std::to_string(id));
    return docs[it->second];
}

const Query* SynthData::query_by_id(std::int64_t id) const {
    build_lookup();
    const auto it = query_pos_.find(id);
    if (it == query_pos_.end()) return nullptr;
    const std::size_t p = it->second;
    return p < train_queries.size() ? &train_queries[p]
                                    : &eval_queries[p - train_queries.size()];
}

void SynthData::build_lookup() const {
    if (doc_pos_.size() == docs.size() &&
        query_pos_.size() == train_queries.size() + eval_queries.size())
        return;
    doc_pos_.clear();
    query_pos_.clear();
    for (std::size_t i = 0; i < docs.size(); ++i) doc_pos_[docs[i].id] = i;
    for (std::size_t i = 0; i < train_queries.size(); ++i)
        query_pos_[train_queries[i].id] = i;
    for (std::size_t i = 0; i < eval_queries.size(); ++i)
        query_pos_[eval_queries[i].id] = train_queries.size() + i;
}

double SynthData::oracle(const std::string& query_text, const Document& d) const {
    const auto q_terms = Tokenizer::split_terms(query_text);
    if (q_terms.empty()) return 0.0;

    std::set<std::string> doc_terms;
    for (const std::string* field : {&d.title, &d.topic, &d.content})
        for (auto& t : Tokenizer::split_terms(*field)) doc_terms.insert(std::move(t));

    double covered = 0.0, total = 0.0;
    std::vector<double> q_aff;
    for (const auto& t : q_terms) {
        const double w = stats.idf(t);
        total += w;
        if (doc_terms.count(t)) covered += w;
        const auto it = word_topic_affinity.find(t);
        if (it != word_topic_affinity.end()) {
            if (q_aff.empty()) q_aff.assign(it->second.size(), 0.0);
            for (std::size_t k = 0; k < it->second.size(); ++k)
                q_aff[k] += it->second[k];
        }
    }
    const double lexical = total > 0.0 ? covered / total : 0.0;

    double topical = 0.0;
    build_lookup();
    const auto it = doc_pos_.find(d.id);
    if (!q_aff.empty() && it != doc_pos_.end()) {
        const auto& mix = doc_topic_mix[it->second];
        const double na = norm2(q_aff.data(), q_aff.size());
        const double nb = norm2(mix.data(), mix.size());
        if (na > 0.0 && nb > 0.0)
            topical = dot(q_aff.data(), mix.data(), mix.size()) / std::sqrt(na * nb);
    }
    return 0.65 * lexical + 0.35 * std::max(0.0, topical);
}

std::vector<ScoredDoc> SynthData::oracle_ranking(const std::string& query_text) const {
    std::vector<ScoredDoc> out(docs.size());
    parallel_for(docs.size(), [&](std::size_t i) {
        out[i] = {docs[i].id, oracle(query_text, docs[i])};
    });
    std::sort(out.begin(), out.end(), [](const ScoredDoc& a, const ScoredDoc& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.doc_id < b.doc_id;
    });
    return out;
}

SynthData synth_corpus(const SynthConfig& cfg) {
    if (cfg.n_docs < 100) throw ConfigError("synth_corpus: need n_docs >= 100");
    if (cfg.vocab_size < 50) throw ConfigError("synth_corpus: need vocab_size >= 50");
    if (cfg.n_queries < 1 || cfg.n_eval_queries < 0)
        throw ConfigError("synth_corpus: bad query counts");

    SynthData data;
    Rng vocab_rng(derive_seed(cfg.seed, 1));
    data.vocabulary = make_vocabulary(cfg.vocab_size, vocab_rng);

    const int n_topics = cfg.n_topics > 0
                             ? cfg.n_topics
                             : std::clamp(cfg.n_docs / 80, 8, 40);
    if (cfg.vocab_size < n_topics + 50)
        throw ConfigError("synth_corpus: vocabulary too small for topic count");

    // The first n_topics words act as topic labels; the rest form topic cores.
    Rng topic_rng(derive_seed(cfg.seed, 2));
    const int core_size = 36;
    std::vector<std::vector<int>> topic_core(static_cast<std::size_t>(n_topics));
    for (int k = 0; k < n_topics; ++k) {
        std::set<int> core;
        while (static_cast<int>(core.size()) < core_size) {
            core.insert(n_topics +
                        static_cast<int>(topic_rng.below(
                            static_cast<std::uint64_t>(cfg.vocab_size - n_topics))));
        }
        topic_core[static_cast<std::size_t>(k)].assign(core.begin(), core.end());
    }

    for (int k = 0; k < n_topics; ++k) {
        auto& lab = data.word_topic_affinity[data.vocabulary[static_cast<std::size_t>(k)]];
        lab.assign(static_cast<std::size_t>(n_topics), 0.0);
        lab[static_cast<std::size_t>(k)] = 1.0;
        for (int w : topic_core[static_cast<std::size_t>(k)]) {
            auto& aff = data.word_topic_affinity[data.vocabulary[static_cast<std::size_t>(w)]];
            if (aff.empty()) aff.assign(static_cast<std::size_t>(n_topics), 0.0);
            aff[static_cast<std::size_t>(k)] = 1.0;
        }
    }

    auto sample_topic_word = [&](int topic, Rng& rng) -> const std::string& {
        const auto& core = topic_core[static_cast<std::size_t>(topic)];
        if (rng.uniform() < 0.85) {
            return data.vocabulary[static_cast<std::size_t>(core[rng.below(core.size())])];
        }
        return data.vocabulary[rng.below(data.vocabulary.size())];
    };

    // Documents.
    Rng doc_rng(derive_seed(cfg.seed, 3));
    data.docs.reserve(static_cast<std::size_t>(cfg.n_docs));
    data.doc_topic_mix.reserve(static_cast<std::size_t>(cfg.n_docs));
    for (int i = 0; i < cfg.n_docs; ++i) {
        Document d;
        d.id = i + 1;
        const int primary = static_cast<int>(doc_rng.below(static_cast<std::uint64_t>(n_topics)));
        int secondary = -1;
        if (doc_rng.uniform() < 0.3) {
            secondary = static_cast<int>(doc_rng.below(static_cast<std::uint64_t>(n_topics)));
            if (secondary == primary) secondary = -1;
        }
        std::vector<double> mix(static_cast<std::size_t>(n_topics), 0.0);
        mix[static_cast<std::size_t>(primary)] = secondary >= 0 ? 0.8 : 1.0;
        if (secondary >= 0) mix[static_cast<std::size_t>(secondary)] = 0.2;
        data.doc_topic_mix.push_back(mix);

        const int title_len = 4 + static_cast<int>(doc_rng.below(3));
        std::ostringstream title;
        for (int t = 0; t < title_len; ++t) {
            if (t) title << ' ';
            title << sample_topic_word(primary, doc_rng);
        }
        d.title = title.str();

        std::ostringstream topic;
        topic << data.vocabulary[static_cast<std::size_t>(primary)];
        if (secondary >= 0) topic << ' ' << data.vocabulary[static_cast<std::size_t>(secondary)];
        d.topic = topic.str();

        const int content_len =
            cfg.content_min +
            static_cast<int>(doc_rng.below(
                static_cast<std::uint64_t>(std::max(1, cfg.content_max - cfg.content_min + 1))));
        std::ostringstream content;
        for (int t = 0; t < content_len; ++t) {
            if (t) content << ' ';
            const int topic_pick =
                (secondary >= 0 && doc_rng.uniform() < 0.2) ? secondary : primary;
            content << sample_topic_word(topic_pick, doc_rng);
        }
        d.content = content.str();
        data.docs.push_back(std::move(d));
    }

    data.stats = CorpusStats::build(data.docs);

    // Queries: each is sampled from one document's salient terms, biased
    // toward rare terms so the source document is the oracle's favorite.
    auto make_query = [&](std::int64_t qid, Rng& rng) -> std::pair<Query, std::int64_t> {
        const std::size_t di = rng.below(data.docs.size());
        const Document& d = data.docs[di];
        std::vector<std::string> pool;
        for (const std::string* field : {&d.title, &d.content}) {
            for (auto& t : Tokenizer::split_terms(*field)) pool.push_back(std::move(t));
        }
        std::sort(pool.begin(), pool.end());
        pool.erase(std::unique(pool.begin(), pool.end()), pool.end());
        std::vector<double> weights;
        weights.reserve(pool.size());
        for (const auto& t : pool) {
            const double w = data.stats.idf(t);
            weights.push_back(w * w * w + 1e-6);
        }
        const int q_len = std::min<int>(3 + static_cast<int>(rng.below(3)),
                                        static_cast<int>(pool.size()));
        std::ostringstream text;
        for (int t = 0; t < q_len; ++t) {
            const std::size_t pick = rng.weighted(weights);
            if (t) text << ' ';
            text << pool[pick];
            weights[pick] = 0.0;
        }
        return {{qid, text.str()}, d.id};
    };

    Rng train_q_rng(derive_seed(cfg.seed, 4));
    for (int i = 0; i < cfg.n_queries; ++i) {
        auto [q, doc_id] = make_query(i + 1, train_q_rng);
        data.truth[q.id] = doc_id;
        data.train_queries.push_back(std::move(q));
    }
    Rng eval_q_rng(derive_seed(cfg.seed, 5));
    for (int i = 0; i < cfg.n_eval_queries; ++i) {
        auto [q, doc_id] = make_query(cfg.n_queries + i + 1, eval_q_rng);
        data.truth[q.id] = doc_id;
        data.eval_queries.push_back(std::move(q));
    }

    // Click log and relevance candidates from the oracle.
    Rng click_rng(derive_seed(cfg.seed, 6));
    data.clicks.reserve(data.train_queries.size());
    data.relevance.reserve(data.train_queries.size());
    for (const auto& q : data.train_queries) {
        auto ranking = data.oracle_ranking(q.text);

        RelevanceRecord rel;
        rel.query_id = q.id;
        const std::size_t depth =
            std::min<std::size_t>(ranking.size(),
                                  static_cast<std::size_t>(cfg.relevance_depth));
        rel.ranked.assign(ranking.begin(), ranking.begin() + static_cast<std::ptrdiff_t>(depth));
        data.relevance.push_back(std::move(rel));

        ClickRecord cr;
        cr.query_id = q.id;
        const std::size_t n_top =
            std::min<std::size_t>(ranking.size(),
                                  static_cast<std::size_t>(cfg.exposed_per_query));
        for (std::size_t i = 0; i < n_top; ++i) cr.exposed.push_back(ranking[i].doc_id);
        for (int extra = 0; extra < 3; ++extra) {
            const auto pick = ranking[click_rng.below(ranking.size())].doc_id;
            if (std::find(cr.exposed.begin(), cr.exposed.end(), pick) == cr.exposed.end())
                cr.exposed.push_back(pick);
        }
        // At most three clicks per query keeps the triplet volume desk sized.
        for (std::size_t i = 0; i < cr.exposed.size() && cr.clicked.size() < 3; ++i) {
            const double s = i < n_top ? ranking[i].score
                                       : data.oracle(q.text, data.doc_by_id(cr.exposed[i]));
            const double p = std::clamp(0.1 + 0.8 * s * s, 0.0, 0.9);
            if (click_rng.uniform() < p) cr.clicked.push_back(cr.exposed[i]);
        }
        data.clicks.push_back(std::move(cr));
    }

    data.build_lookup();
    return data;
}

// ---------------------------------------------------------------------------
// JSON Lines persistence.
// ---------------------------------------------------------------------------

namespace {
void write_jsonl(const std::string& path, const std::vector<json>& rows) {
    std::ostringstream out;
    for (const auto& r : rows) out << r.dump() << '\n';
    write_file(path, out.str());
}

std::vector<json> read_jsonl(const std::string& path) {
    std::istringstream in(read_file(path));
    std::vector<json> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        rows.push_back(json::parse(line));
    }
    return rows;
}
}  // namespace

void save_documents(const std::vector<Document>& docs, const std::string& path) {
    std::vector<json> rows;
    rows.reserve(docs.size());
    for (const auto& d : docs)
        rows.push_back({{"id", d.id}, {"title", d.title}, {"topic", d.topic},
                        {"content", d.content}});
    write_jsonl(path, rows);
}

std::vector<Document> load_documents(const std::string& path) {
    std::vector<Document> out;
    for (const auto& r : read_jsonl(path))
        out.push_back({r.at("id").get<std::int64_t>(), r.at("title").get<std::string>(),
                       r.at("topic").get<std::string>(), r.at("content").get<std::string>()});
    return out;
}

void save_queries(const std::vector<Query>& qs, const std::string& path) {
    std::vector<json> rows;
    rows.reserve(qs.size());
    for (const auto& q : qs) rows.push_back({{"id", q.id}, {"text", q.text}});
    write_jsonl(path, rows);
}

std::vector<Query> load_queries(const std::string& path) {
    std::vector<Query> out;
    for (const auto& r : read_jsonl(path))
        out.push_back({r.at("id").get<std::int64_t>(), r.at("text").get<std::string>()});
    return out;
}

void save_triplets(const std::vector<TrainingTriplet>& ts, const std::string& path) {
    std::vector<json> rows;
    rows.reserve(ts.size());
    for (const auto& t : ts)
        rows.push_back({{"query_id", t.query_id}, {"pos_doc_id", t.pos_doc_id},
                        {"neg_doc_id", t.neg_doc_id}, {"source", to_string(t.source)}});
    write_jsonl(path, rows);
}

std::vector<TrainingTriplet> load_triplets(const std::string& path) {
    std::vector<TrainingTriplet> out;
    for (const auto& r : read_jsonl(path))
        out.push_back({r.at("query_id").get<std::int64_t>(),
                       r.at("pos_doc_id").get<std::int64_t>(),
                       r.at("neg_doc_id").get<std::int64_t>(),
                       triplet_source_from_string(r.at("source").get<std::string>())});
    return out;
}

void save_truth(const std::unordered_map<std::int64_t, std::int64_t>& truth,
                const std::string& path) {
    std::vector<std::pair<std::int64_t, std::int64_t>> items(truth.begin(), truth.end());
    std::sort(items.begin(), items.end());
    std::vector<json> rows;
    rows.reserve(items.size());
    for (const auto& [q, d] : items) rows.push_back({{"query_id", q}, {"doc_id", d}});
    write_jsonl(path, rows);
}

std::unordered_map<std::int64_t, std::int64_t> load_truth(const std::string& path) {
    std::unordered_map<std::int64_t, std::int64_t> out;
    for (const auto& r : read_jsonl(path))
        out[r.at("query_id").get<std::int64_t>()] = r.at("doc_id").get<std::int64_t>();
    return out;
}

void save_clicks(const std::vector<ClickRecord>& recs, const std::string& path) {
    std::vector<json> rows;
    rows.reserve(recs.size());
    for (const auto& c : recs)
        rows.push_back({{"query_id", c.query_id}, {"exposed", c.exposed},
                        {"clicked", c.clicked}});
    write_jsonl(path, rows);
}

std::vector<ClickRecord> load_clicks(const std::string& path) {
    std::vector<ClickRecord> out;
    for (const auto& r : read_jsonl(path)) {
        ClickRecord c;
        c.query_id = r.at("query_id").get<std::int64_t>();
        c.exposed = r.at("exposed").get<std::vector<std::int64_t>>();
        c.clicked = r.at("clicked").get<std::vector<std::int64_t>>();
        out.push_back(std::move(c));
    }
    return out;
}

void save_relevance(const std::vector<RelevanceRecord>& recs, const std::string& path) {
    std::vector<json> rows;
    rows.reserve(recs.size());
    for (const auto& rec : recs) {
        json ranked = json::array();
        for (const auto& sd : rec.ranked)
            ranked.push_back({{"doc_id", sd.doc_id}, {"score", sd.score}});
        rows.push_back({{"query_id", rec.query_id}, {"ranked", std::move(ranked)}});
    }
    write_jsonl(path, rows);
}

std::vector<RelevanceRecord> load_relevance(const std::string& path) {
    std::vector<RelevanceRecord> out;
    for (const auto& r : read_jsonl(path)) {
        RelevanceRecord rec;
        rec.query_id = r.at("query_id").get<std::int64_t>();
        for (const auto& sd : r.at("ranked"))
            rec.ranked.push_back({sd.at("doc_id").get<std::int64_t>(),
                                  sd.at("score").get<double>()});
        out.push_back(std::move(rec));
    }
    return out;
}

}  // namespace densenote::corpus
