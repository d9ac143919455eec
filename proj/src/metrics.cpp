#include "densenote/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace densenote::metrics {

RecallReport recall_at_k(const Rankings& rankings, const Truth& truth,
                         const std::vector<int>& ks) {
    RecallReport rep;
    rep.n_queries = static_cast<std::int64_t>(truth.size());
    if (rep.n_queries == 0) throw ConfigError("recall_at_k: no queries");
    for (int k : ks) rep.successes[k] = 0;

    for (const auto& [qid, gt] : truth) {
        const auto it = rankings.find(qid);
        if (it == rankings.end())
            throw MissingRanking("no ranking for query " + std::to_string(qid));
        const auto& ranked = it->second;
        // Rank of the ground truth (1-based); 0 means absent.
        std::size_t rank = 0;
        for (std::size_t i = 0; i < ranked.size(); ++i) {
            if (ranked[i] == gt) {
                rank = i + 1;
                break;
            }
        }
        for (int k : ks) {
            if (rank != 0 && rank <= static_cast<std::size_t>(k))
                rep.successes[k] += 1;
        }
    }
    for (int k : ks)
        rep.recall[k] = static_cast<double>(rep.successes[k]) /
                        static_cast<double>(rep.n_queries);
    return rep;
}

double auc(const std::vector<int>& labels, const std::vector<double>& scores) {
    if (labels.size() != scores.size()) throw ShapeError("auc: length mismatch");
    const std::size_t n = labels.size();
    std::size_t n_pos = 0;
    for (int y : labels) {
        if (y != 0 && y != 1) throw DomainError("auc: labels must be 0/1");
        n_pos += static_cast<std::size_t>(y);
    }
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0)
        throw DegenerateLabels("auc: both classes must be present");

    // Rank-sum with average ranks over tie groups.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double avg_rank = 0.5 * static_cast<double>(i + 1 + j + 1);
        for (std::size_t t = i; t <= j; ++t)
            if (labels[order[t]] == 1) rank_sum_pos += avg_rank;
        i = j + 1;
    }
    const double u = rank_sum_pos -
                     static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1.0) / 2.0;
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double contrastive_entropy(const TowerParams& doc_tower,
                           const TowerParams& query_tower, const Tokenizer& tok,
                           const std::vector<corpus::TrainingTriplet>& validation,
                           const train::TextStore& texts, double tau, int m,
                           int pool_size) {
    if (validation.empty()) throw ConfigError("contrastive_entropy: no triplets");
    if (!(tau > 0.0)) throw ConfigError("contrastive_entropy: tau must be > 0");
    const std::size_t n = validation.size();
    const std::size_t pool =
        std::min<std::size_t>(static_cast<std::size_t>(pool_size), n);

    double total = 0.0;
    std::size_t counted = 0;
    for (std::size_t base = 0; base + pool <= n; base += pool) {
        // One pool per evaluation batch: queries against the batch positives.
        train::EmbeddingSet q, d;
        q.resize(pool, doc_tower.cfg.dim);
        d.resize(pool, doc_tower.cfg.dim);
        std::vector<std::size_t> idx(pool);
        std::iota(idx.begin(), idx.end(), base);
        parallel_for(pool, [&](std::size_t i) {
            const auto& t = validation[idx[i]];
            const auto qe = embed_query(query_tower, tok, texts.query(t.query_id).text,
                                        QueryRenderMode::TeacherEos);
            std::copy(qe.vec.begin(), qe.vec.end(), q.row(i));
            const auto de = embed_document(doc_tower, tok, texts.doc(t.pos_doc_id));
            std::copy(de.emb.vec.begin(), de.emb.vec.end(), d.row(i));
        });

        for (std::size_t i = 0; i < pool; ++i) {
            double mx = -1e300;
            std::vector<double> sims(pool);
            for (std::size_t j = 0; j < pool; ++j) {
                sims[j] = cosine_prefix(q.row(i), d.row(j),
                                        static_cast<std::size_t>(m)) / tau;
                mx = std::max(mx, sims[j]);
            }
            double denom = 0.0;
            for (double s : sims) denom += std::exp(s - mx);
            total += std::log(denom) + mx - sims[i];
            counted += 1;
        }
    }
    if (counted == 0) throw ConfigError("contrastive_entropy: pool larger than data");
    return total / static_cast<double>(counted);
}

}  // namespace densenote::metrics
