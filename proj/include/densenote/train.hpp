#pragma once

// Stage-I joint training: per-worker encoding, all-gather, the MRL-weighted
// bidirectional InfoNCE over the three document embedding types, the hard
// negative margin loss, and the AdamW loop over both towers.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "densenote/corpus.hpp"
#include "densenote/tower.hpp"

namespace densenote::train {

struct TrainConfig {
    double tau = 0.05;
    double margin = 0.2;
    double alpha = 0.5;
    std::vector<int> mrl_dims = {16, 32, 64, 128};
    std::map<int, double> w_m;       // per-dim InfoNCE weight, default 1
    std::map<int, double> w_m_hard;  // per-dim margin weight, default 1
    int k_workers = 2;
    int b_per_worker = 24;
    double lr = 1e-3;
    int epochs = 8;
    double warmup_ratio = 0.1;
    double weight_decay = 1e-3;
    double clip_norm = 1.0;
    double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
    std::uint64_t seed = 1;
    bool parallel_workers = false;  // encode logical workers on real threads
    TowerConfig doc_tower{2, 4, 64, 128, 10000, 128, false};
    TowerConfig query_tower{2, 4, 64, 128, 10000, 128, false};

    int global_batch() const { return k_workers * b_per_worker; }
    double weight(int m) const;
    double weight_hard(int m) const;
    void validate() const;
};

// Row-major rows x dim embedding matrix.
struct EmbeddingSet {
    std::size_t rows = 0, dim = 0;
    std::vector<double> data;

    void resize(std::size_t r, std::size_t d) {
        rows = r;
        dim = d;
        data.assign(r * d, 0.0);
    }
    double* row(std::size_t i) { return data.data() + i * dim; }
    const double* row(std::size_t i) const { return data.data() + i * dim; }
};

// One batch of embeddings, aligned by triplet index: q pairs with the
// positive sets (dt, dc, de) and the hard-negative sets (dtn, dcn, den).
struct EmbeddingBatch {
    EmbeddingSet q, dt, dc, de, dtn, dcn, den;
    std::size_t size() const { return q.rows; }
};

using WorkerBatch = EmbeddingBatch;
using GatheredBatch = EmbeddingBatch;

// Concatenation in worker order. Throws BatchShapeError on ragged input.
GatheredBatch all_gather(const std::vector<WorkerBatch>& workers);

// ---------------------------------------------------------------------------
// Texts and batch encoding.
// ---------------------------------------------------------------------------

struct TextStore {
    std::unordered_map<std::int64_t, const corpus::Document*> docs;
    std::unordered_map<std::int64_t, const corpus::Query*> queries;

    static TextStore build(const std::vector<corpus::Document>& docs,
                           const std::vector<const std::vector<corpus::Query>*>& query_sets);
    const corpus::Document& doc(std::int64_t id) const;
    const corpus::Query& query(std::int64_t id) const;
};

// Encodes a slice of triplets on each logical worker (filling B-per-worker
// rows) and gathers. With parallel set, workers run on real threads; the
// result is identical either way.
GatheredBatch encode_and_gather(const TowerParams& doc_tower,
                                const TowerParams& query_tower,
                                const Tokenizer& tok, const TextStore& texts,
                                const std::vector<corpus::TrainingTriplet>& triplets,
                                int k_workers, bool parallel);

// ---------------------------------------------------------------------------
// Losses (pure functions of the gathered batch).
// ---------------------------------------------------------------------------

enum class DocType { Title, Content, Emb };

struct PairLoss {
    double q2d = 0.0;
    double d2q = 0.0;
};

// Bidirectional InfoNCE at prefix m. The q->d pool contains the gathered
// positives and the gathered hard negatives of the same type; the d->q pool
// is the gathered queries.
PairLoss infonce_pair(const GatheredBatch& gb, DocType type, int m, double tau);

// 0.5 * sum_m w_m * (q2d + d2q)
double aggregate_type(const std::vector<PairLoss>& per_m,
                      const std::vector<double>& w);

inline double contrastive_total(double lt, double lc, double le) {
    return lt + lc + le;
}

// Mean hinge on cosine prefixes: max(0, margin - s(q,d+) + s(q,d-)).
double margin_hard(const GatheredBatch& gb, DocType type, int m, double margin);

struct LossBreakdown {
    double total = 0.0;
    double l_con = 0.0;
    double l_hard = 0.0;
};

// Full Stage-I loss. When grads is non-null it receives dLoss/dEmbedding for
// every row (same shape as gb). Throws NumericsError naming the first
// non-finite term.
LossBreakdown total_loss(const GatheredBatch& gb, const TrainConfig& cfg,
                         GatheredBatch* grads = nullptr);

// ---------------------------------------------------------------------------
// Optimizer and training loop.
// ---------------------------------------------------------------------------

struct AdamState {
    std::vector<double> m, v;
    explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

// Linear warmup to peak then linear decay to zero.
double lr_at(double peak, int step, int total_steps, double warmup_ratio);

void adamw_update(TowerParams& params, const std::vector<double>& grad,
                  AdamState& state, int t, double lr, const TrainConfig& cfg);

struct CurvePoint {
    int step = 0;
    double loss = 0.0, l_con = 0.0, l_hard = 0.0;
};

struct Stage1Result {
    TowerParams doc_tower;
    TowerParams query_tower;
    std::vector<CurvePoint> curve;
};

// Gradient of the loss for one already-gathered batch, accumulated into the
// flat grad vectors of both towers (used by training and by the
// finite-difference oracles).
LossBreakdown batch_loss_and_grads(const TowerParams& doc_tower,
                                   const TowerParams& query_tower,
                                   const Tokenizer& tok, const TextStore& texts,
                                   const std::vector<corpus::TrainingTriplet>& batch,
                                   const TrainConfig& cfg,
                                   std::vector<double>* doc_grad,
                                   std::vector<double>* query_grad);

Stage1Result train_stage1(const std::vector<corpus::TrainingTriplet>& triplets,
                          const TextStore& texts, const TrainConfig& cfg,
                          const Tokenizer& tok);

void save_curve(const std::vector<CurvePoint>& curve, const std::string& path);

}  // namespace densenote::train
