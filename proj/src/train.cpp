#include "densenote/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <thread>

namespace densenote::train {

double TrainConfig::weight(int m) const {
    const auto it = w_m.find(m);
    return it == w_m.end() ? 1.0 : it->second;
}

double TrainConfig::weight_hard(int m) const {
    const auto it = w_m_hard.find(m);
    return it == w_m_hard.end() ? 1.0 : it->second;
}

void TrainConfig::validate() const {
    if (!(tau > 0.0)) throw ConfigError("train: tau must be > 0");
    if (margin < 0.0) throw ConfigError("train: margin must be >= 0");
    if (alpha < 0.0) throw ConfigError("train: alpha must be >= 0");
    if (mrl_dims.empty()) throw ConfigError("train: empty MRL dim set");
    for (int m : mrl_dims)
        if (m < 1 || m > static_cast<int>(doc_tower.dim))
            throw ConfigError("train: MRL dim out of range");
    for (const auto& [m, w] : w_m)
        if (w < 0.0) throw ConfigError("train: negative w^m");
    for (const auto& [m, w] : w_m_hard)
        if (w < 0.0) throw ConfigError("train: negative w^m_hard");
    if (k_workers < 1 || b_per_worker < 1)
        throw ConfigError("train: bad worker geometry");
    if (epochs < 0) throw ConfigError("train: bad epoch count");
    if (doc_tower.dim != query_tower.dim)
        throw ConfigError("train: towers must share the embedding dim");
    doc_tower.validate();
    query_tower.validate();
}

// ---------------------------------------------------------------------------
// Gather.
// ---------------------------------------------------------------------------

namespace {
void append_set(EmbeddingSet& dst, const EmbeddingSet& src) {
    dst.data.insert(dst.data.end(), src.data.begin(), src.data.end());
    dst.rows += src.rows;
}
}  // namespace

GatheredBatch all_gather(const std::vector<WorkerBatch>& workers) {
    if (workers.empty()) throw BatchShapeError("all_gather: no worker batches");
    const std::size_t b = workers.front().size();
    const std::size_t dim = workers.front().q.dim;
    GatheredBatch out;
    for (EmbeddingSet GatheredBatch::*set :
         {&GatheredBatch::q, &GatheredBatch::dt, &GatheredBatch::dc,
          &GatheredBatch::de, &GatheredBatch::dtn, &GatheredBatch::dcn,
          &GatheredBatch::den}) {
        (out.*set).rows = 0;
        (out.*set).dim = dim;
    }
    for (const auto& w : workers) {
        for (EmbeddingSet GatheredBatch::*set :
             {&GatheredBatch::q, &GatheredBatch::dt, &GatheredBatch::dc,
              &GatheredBatch::de, &GatheredBatch::dtn, &GatheredBatch::dcn,
              &GatheredBatch::den}) {
            if ((w.*set).rows != b || (w.*set).dim != dim)
                throw BatchShapeError("all_gather: ragged worker batches");
            append_set(out.*set, w.*set);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Texts.
// ---------------------------------------------------------------------------

TextStore TextStore::build(
    const std::vector<corpus::Document>& docs,
    const std::vector<const std::vector<corpus::Query>*>& query_sets) {
    TextStore ts;
    for (const auto& d : docs) ts.docs[d.id] = &d;
    for (const auto* qs : query_sets)
        for (const auto& q : *qs) ts.queries[q.id] = &q;
    return ts;
}

const corpus::Document& TextStore::doc(std::int64_t id) const {
    const auto it = docs.find(id);
    if (it == docs.end()) throw Error("unresolved doc id " + std::to_string(id));
    return *it->second;
}

const corpus::Query& TextStore::query(std::int64_t id) const {
    const auto it = queries.find(id);
    if (it == queries.end()) throw Error("unresolved query id " + std::to_string(id));
    return *it->second;
}

// ---------------------------------------------------------------------------
// Encoding.
// ---------------------------------------------------------------------------

namespace {

WorkerBatch encode_worker(const TowerParams& doc_tower, const TowerParams& query_tower,
                          const Tokenizer& tok, const TextStore& texts,
                          const corpus::TrainingTriplet* triplets, std::size_t b) {
    const std::size_t dim = doc_tower.cfg.dim;
    WorkerBatch wb;
    for (EmbeddingSet WorkerBatch::*set :
         {&WorkerBatch::q, &WorkerBatch::dt, &WorkerBatch::dc, &WorkerBatch::de,
          &WorkerBatch::dtn, &WorkerBatch::dcn, &WorkerBatch::den})
        (wb.*set).resize(b, dim);

    for (std::size_t i = 0; i < b; ++i) {
        const auto& t = triplets[i];
        const auto q = embed_query(query_tower, tok, texts.query(t.query_id).text,
                                   QueryRenderMode::TeacherEos);
        std::copy(q.vec.begin(), q.vec.end(), wb.q.row(i));
        const auto pos = embed_document(doc_tower, tok, texts.doc(t.pos_doc_id));
        std::copy(pos.title.vec.begin(), pos.title.vec.end(), wb.dt.row(i));
        std::copy(pos.content.vec.begin(), pos.content.vec.end(), wb.dc.row(i));
        std::copy(pos.emb.vec.begin(), pos.emb.vec.end(), wb.de.row(i));
        const auto neg = embed_document(doc_tower, tok, texts.doc(t.neg_doc_id));
        std::copy(neg.title.vec.begin(), neg.title.vec.end(), wb.dtn.row(i));
        std::copy(neg.content.vec.begin(), neg.content.vec.end(), wb.dcn.row(i));
        std::copy(neg.emb.vec.begin(), neg.emb.vec.end(), wb.den.row(i));
    }
    return wb;
}

}  // namespace

GatheredBatch encode_and_gather(const TowerParams& doc_tower,
                                const TowerParams& query_tower,
                                const Tokenizer& tok, const TextStore& texts,
                                const std::vector<corpus::TrainingTriplet>& triplets,
                                int k_workers, bool parallel) {
    if (k_workers < 1) throw BatchShapeError("encode_and_gather: k_workers < 1");
    if (triplets.size() % static_cast<std::size_t>(k_workers) != 0)
        throw BatchShapeError("encode_and_gather: batch not divisible by workers");
    const std::size_t b = triplets.size() / static_cast<std::size_t>(k_workers);
    std::vector<WorkerBatch> workers(static_cast<std::size_t>(k_workers));

    auto run = [&](std::size_t w) {
        workers[w] = encode_worker(doc_tower, query_tower, tok, texts,
                                   triplets.data() + w * b, b);
    };
    if (parallel) {
        std::vector<std::thread> pool;
        pool.reserve(workers.size());
        for (std::size_t w = 0; w < workers.size(); ++w) pool.emplace_back(run, w);
        for (auto& th : pool) th.join();
    } else {
        for (std::size_t w = 0; w < workers.size(); ++w) run(w);
    }
    return all_gather(workers);
}

// ---------------------------------------------------------------------------
// Losses.
// ---------------------------------------------------------------------------

namespace {

// d(cos_m(a, b))/da and /db accumulated with weight dcos.
void cosine_backward(const double* a, const double* b, int m, double dcos,
                     double* da, double* db) {
    const std::size_t mm = static_cast<std::size_t>(m);
    const double na2 = norm2(a, mm);
    const double nb2 = norm2(b, mm);
    const double d = dot(a, b, mm);
    const double inv = 1.0 / std::sqrt(na2 * nb2);
    const double s = d * inv;
    const double ca = dcos * inv, cb = dcos * inv;
    const double sa = dcos * s / na2, sb = dcos * s / nb2;
    for (std::size_t i = 0; i < mm; ++i) {
        da[i] += ca * b[i] - sa * a[i];
        db[i] += cb * a[i] - sb * b[i];
    }
}

// Softmax cross-entropy where anchor i's target is row i of pool_target and
// the denominator runs over pool_target (+ pool_extra). Loss is the mean over
// anchors; gradient accumulation is scaled by gscale.
double softmax_ce(const EmbeddingSet& anchors, const EmbeddingSet& pool_target,
                  const EmbeddingSet* pool_extra, int m, double tau,
                  double gscale, EmbeddingSet* d_anchors,
                  EmbeddingSet* d_pool_target, EmbeddingSet* d_pool_extra) {
    const std::size_t n = anchors.rows;
    const std::size_t p1 = pool_target.rows;
    const std::size_t p2 = pool_extra ? pool_extra->rows : 0;
    const std::size_t p = p1 + p2;
    const std::size_t mm = static_cast<std::size_t>(m);
    if (p1 != n) throw BatchShapeError("softmax_ce: target pool misaligned");

    std::vector<double> sims(p);
    double loss = 0.0;
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double* ai = anchors.row(i);
        double mx = -1e300;
        for (std::size_t j = 0; j < p; ++j) {
            const double* bj =
                j < p1 ? pool_target.row(j) : pool_extra->row(j - p1);
            sims[j] = cosine_prefix(ai, bj, mm) / tau;
            mx = std::max(mx, sims[j]);
        }
        double denom = 0.0;
        for (std::size_t j = 0; j < p; ++j) denom += std::exp(sims[j] - mx);
        const double log_denom = std::log(denom) + mx;
        loss += (log_denom - sims[i]) * inv_n;

        if (!d_anchors) continue;
        for (std::size_t j = 0; j < p; ++j) {
            const double prob = std::exp(sims[j] - log_denom);
            const double dsim = gscale * inv_n / tau * (prob - (j == i ? 1.0 : 0.0));
            if (dsim == 0.0) continue;
            const bool in_target = j < p1;
            const double* bj = in_target ? pool_target.row(j) : pool_extra->row(j - p1);
            double* dbj = in_target ? d_pool_target->row(j)
                                    : d_pool_extra->row(j - p1);
            cosine_backward(ai, bj, m, dsim, d_anchors->row(i), dbj);
        }
    }
    return loss;
}

const EmbeddingSet& pos_set(const GatheredBatch& gb, DocType t) {
    switch (t) {
        case DocType::Title: return gb.dt;
        case DocType::Content: return gb.dc;
        case DocType::Emb: return gb.de;
    }
    throw Error("bad doc type");
}

const EmbeddingSet& neg_set(const GatheredBatch& gb, DocType t) {
    switch (t) {
        case DocType::Title: return gb.dtn;
        case DocType::Content: return gb.dcn;
        case DocType::Emb: return gb.den;
    }
    throw Error("bad doc type");
}

EmbeddingSet* pos_set_mut(GatheredBatch* gb, DocType t) {
    if (!gb) return nullptr;
    switch (t) {
        case DocType::Title: return &gb->dt;
        case DocType::Content: return &gb->dc;
        case DocType::Emb: return &gb->de;
    }
    return nullptr;
}

EmbeddingSet* neg_set_mut(GatheredBatch* gb, DocType t) {
    if (!gb) return nullptr;
    switch (t) {
        case DocType::Title: return &gb->dtn;
        case DocType::Content: return &gb->dcn;
        case DocType::Emb: return &gb->den;
    }
    return nullptr;
}

const char* type_name(DocType t) {
    switch (t) {
        case DocType::Title: return "t";
        case DocType::Content: return "c";
        case DocType::Emb: return "e";
    }
    return "?";
}

double margin_hard_impl(const GatheredBatch& gb, DocType type, int m,
                        double margin, double gscale, GatheredBatch* grads) {
    const auto& pos = pos_set(gb, type);
    const auto& neg = neg_set(gb, type);
    const std::size_t n = gb.size();
    const double inv_n = 1.0 / static_cast<double>(n);
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double s_pos = cosine_prefix(gb.q.row(i), pos.row(i),
                                           static_cast<std::size_t>(m));
        const double s_neg = cosine_prefix(gb.q.row(i), neg.row(i),
                                           static_cast<std::size_t>(m));
        // Grouped so that bit-identical sims give exactly `margin`.
        const double z = margin - (s_pos - s_neg);
        if (z > 0.0) {
            loss += z * inv_n;
            if (grads) {
                cosine_backward(gb.q.row(i), pos.row(i), m, -gscale * inv_n,
                                grads->q.row(i), pos_set_mut(grads, type)->row(i));
                cosine_backward(gb.q.row(i), neg.row(i), m, gscale * inv_n,
                                grads->q.row(i), neg_set_mut(grads, type)->row(i));
            }
        }
    }
    return loss;
}

}  // namespace

PairLoss infonce_pair(const GatheredBatch& gb, DocType type, int m, double tau) {
    if (!(tau > 0.0)) throw ConfigError("infonce_pair: tau must be > 0");
    PairLoss out;
    out.q2d = softmax_ce(gb.q, pos_set(gb, type), &neg_set(gb, type), m, tau, 0.0,
                         nullptr, nullptr, nullptr);
    out.d2q = softmax_ce(pos_set(gb, type), gb.q, nullptr, m, tau, 0.0, nullptr,
                         nullptr, nullptr);
    return out;
}

double aggregate_type(const std::vector<PairLoss>& per_m,
                      const std::vector<double>& w) {
    if (per_m.size() != w.size())
        throw ShapeError("aggregate_type: weight count mismatch");
    double out = 0.0;
    for (std::size_t i = 0; i < per_m.size(); ++i)
        out += 0.5 * w[i] * (per_m[i].q2d + per_m[i].d2q);
    return out;
}

double margin_hard(const GatheredBatch& gb, DocType type, int m, double margin) {
    return margin_hard_impl(gb, type, m, margin, 0.0, nullptr);
}

LossBreakdown total_loss(const GatheredBatch& gb, const TrainConfig& cfg,
                         GatheredBatch* grads) {
    if (gb.size() == 0) throw BatchShapeError("total_loss: empty batch");
    if (grads) {
        for (EmbeddingSet GatheredBatch::*set :
             {&GatheredBatch::q, &GatheredBatch::dt, &GatheredBatch::dc,
              &GatheredBatch::de, &GatheredBatch::dtn, &GatheredBatch::dcn,
              &GatheredBatch::den})
            (grads->*set).resize((gb.*set).rows, (gb.*set).dim);
    }

    auto check = [&](double v, DocType type, int m, const char* term) {
        if (!std::isfinite(v)) {
            std::ostringstream ss;
            ss << "non-finite " << term << " (type=" << type_name(type)
               << ", m=" << m << ")";
            throw NumericsError(ss.str());
        }
        return v;
    };

    LossBreakdown out;
    for (DocType type : {DocType::Title, DocType::Content, DocType::Emb}) {
        for (int m : cfg.mrl_dims) {
            const double w = cfg.weight(m);
            const double q2d =
                softmax_ce(gb.q, pos_set(gb, type), &neg_set(gb, type), m,
                           cfg.tau, 0.5 * w, grads ? &grads->q : nullptr,
                           pos_set_mut(grads, type), neg_set_mut(grads, type));
            // The d->q direction: anchors are the positive documents, the
            // pool is the gathered queries.
            EmbeddingSet* d_pos = pos_set_mut(grads, type);
            const double d2q =
                softmax_ce(pos_set(gb, type), gb.q, nullptr, m, cfg.tau, 0.5 * w,
                           d_pos, grads ? &grads->q : nullptr, nullptr);
            out.l_con += 0.5 * w * (check(q2d, type, m, "InfoNCE q2d") +
                                    check(d2q, type, m, "InfoNCE d2q"));

            const double wh = cfg.weight_hard(m);
            const double hard = margin_hard_impl(gb, type, m, cfg.margin,
                                                 cfg.alpha * wh, grads);
            out.l_hard += wh * check(hard, type, m, "margin");
        }
    }
    out.total = out.l_con + cfg.alpha * out.l_hard;
    if (!std::isfinite(out.total)) throw NumericsError("non-finite total loss");
    return out;
}

// ---------------------------------------------------------------------------
// Optimizer.
// ---------------------------------------------------------------------------

double lr_at(double peak, int step, int total_steps, double warmup_ratio) {
    if (total_steps <= 0) return peak;
    const int warm = std::max(1, static_cast<int>(total_steps * warmup_ratio));
    if (step < warm)
        return peak * static_cast<double>(step + 1) / static_cast<double>(warm);
    const int rest = std::max(1, total_steps - warm);
    return peak * static_cast<double>(total_steps - step) / static_cast<double>(rest);
}

void adamw_update(TowerParams& params, const std::vector<double>& grad,
                  AdamState& state, int t, double lr, const TrainConfig& cfg) {
    if (grad.size() != params.data.size() || state.m.size() != grad.size())
        throw ShapeError("adamw_update: size mismatch");
    const double b1t = 1.0 - std::pow(cfg.beta1, t);
    const double b2t = 1.0 - std::pow(cfg.beta2, t);
    for (std::size_t i = 0; i < grad.size(); ++i) {
        const double g = grad[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        const double mhat = state.m[i] / b1t;
        const double vhat = state.v[i] / b2t;
        params.data[i] -=
            lr * (mhat / (std::sqrt(vhat) + cfg.adam_eps) +
                  cfg.weight_decay * params.data[i]);
    }
}

// ---------------------------------------------------------------------------
// Batch gradient.
// ---------------------------------------------------------------------------

namespace {

// Projection backward plus tower backward for one rendered sequence.
void backprop_sequence(const TowerParams& tower, const RenderedPrompt& prompt,
                       const std::vector<const double*>& emb_grads,
                       std::vector<double>& grad_out) {
    Activations acts;
    const auto hidden = tower_forward(tower, prompt.tokens, &acts);
    const std::size_t h = tower.cfg.hidden;
    const std::size_t dim = tower.cfg.dim;
    std::vector<double> d_hidden(hidden.size(), 0.0);
    const double* proj = tower.ptr(tower.proj);
    double* d_proj = grad_out.data() + tower.proj;
    for (std::size_t r = 0; r < prompt.positions.size(); ++r) {
        const std::size_t pos = prompt.positions[r];
        const double* g = emb_grads[r];
        const double* hrow = hidden.data() + pos * h;
        double* dh = d_hidden.data() + pos * h;
        for (std::size_t d = 0; d < dim; ++d) {
            if (g[d] == 0.0) continue;
            axpy(g[d], proj + d * h, dh, h);
            axpy(g[d], hrow, d_proj + d * h, h);
        }
    }
    tower_backward(tower, prompt.tokens, acts, d_hidden, grad_out);
}

}  // namespace

LossBreakdown batch_loss_and_grads(const TowerParams& doc_tower,
                                   const TowerParams& query_tower,
                                   const Tokenizer& tok, const TextStore& texts,
                                   const std::vector<corpus::TrainingTriplet>& batch,
                                   const TrainConfig& cfg,
                                   std::vector<double>* doc_grad,
                                   std::vector<double>* query_grad) {
    GatheredBatch gb = encode_and_gather(doc_tower, query_tower, tok, texts, batch,
                                         cfg.k_workers, cfg.parallel_workers);
    GatheredBatch egrads;
    const LossBreakdown loss = total_loss(gb, cfg, (doc_grad || query_grad) ? &egrads : nullptr);
    if (!doc_grad && !query_grad) return loss;

    const std::size_t n = batch.size();
    // Fixed stripe count keeps the reduction tree identical for any thread
    // count; stripes are folded in order, waves bound the live buffers.
    const int wave = std::max(1, std::min(kGradStripes, max_threads()));
    struct StripeBuf {
        std::vector<double> doc, query;
    };
    for (int s0 = 0; s0 < kGradStripes; s0 += wave) {
        const int s1 = std::min(kGradStripes, s0 + wave);
        std::vector<StripeBuf> bufs(static_cast<std::size_t>(s1 - s0));
        parallel_for(static_cast<std::size_t>(s1 - s0), [&](std::size_t w) {
            const int stripe = s0 + static_cast<int>(w);
            const std::size_t begin = n * static_cast<std::size_t>(stripe) / kGradStripes;
            const std::size_t end =
                n * (static_cast<std::size_t>(stripe) + 1) / kGradStripes;
            if (begin >= end) return;
            auto& buf = bufs[w];
            buf.doc.assign(doc_tower.size(), 0.0);
            buf.query.assign(query_tower.size(), 0.0);
            for (std::size_t i = begin; i < end; ++i) {
                const auto& t = batch[i];
                const auto qp = render_query(texts.query(t.query_id), tok,
                                             QueryRenderMode::TeacherEos);
                backprop_sequence(query_tower, qp, {egrads.q.row(i)}, buf.query);
                const auto pp = render_document_prompt(texts.doc(t.pos_doc_id), tok,
                                                       doc_tower.cfg.max_seq);
                backprop_sequence(doc_tower, pp,
                                  {egrads.dt.row(i), egrads.dc.row(i), egrads.de.row(i)},
                                  buf.doc);
                const auto np = render_document_prompt(texts.doc(t.neg_doc_id), tok,
                                                       doc_tower.cfg.max_seq);
                backprop_sequence(doc_tower, np,
                                  {egrads.dtn.row(i), egrads.dcn.row(i), egrads.den.row(i)},
                                  buf.doc);
            }
        });
        for (auto& buf : bufs) {
            if (buf.doc.empty()) continue;
            if (doc_grad) axpy(1.0, buf.doc.data(), doc_grad->data(), buf.doc.size());
            if (query_grad)
                axpy(1.0, buf.query.data(), query_grad->data(), buf.query.size());
        }
    }
    return loss;
}

// ---------------------------------------------------------------------------
// Training loop.
// ---------------------------------------------------------------------------

Stage1Result train_stage1(const std::vector<corpus::TrainingTriplet>& triplets,
                          const TextStore& texts, const TrainConfig& cfg,
                          const Tokenizer& tok) {
    cfg.validate();
    const std::size_t g = static_cast<std::size_t>(cfg.global_batch());
    if (triplets.size() < g)
        throw ConfigError("train_stage1: fewer triplets than one global batch");

    Stage1Result res;
    res.doc_tower = make_tower(cfg.doc_tower);
    res.query_tower = make_tower(cfg.query_tower);
    init_params(res.doc_tower, derive_seed(cfg.seed, 11));
    init_params(res.query_tower, derive_seed(cfg.seed, 12));

    const int steps_per_epoch = static_cast<int>(triplets.size() / g);
    const int total_steps = cfg.epochs * steps_per_epoch;
    AdamState doc_state(res.doc_tower.size());
    AdamState query_state(res.query_tower.size());
    std::vector<double> doc_grad(res.doc_tower.size());
    std::vector<double> query_grad(res.query_tower.size());

    std::vector<std::size_t> order(triplets.size());
    std::iota(order.begin(), order.end(), 0);

    int step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng shuffle_rng(derive_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(epoch)));
        shuffle_rng.shuffle(order);
        for (int bi = 0; bi < steps_per_epoch; ++bi) {
            std::vector<corpus::TrainingTriplet> batch(g);
            for (std::size_t i = 0; i < g; ++i)
                batch[i] = triplets[order[static_cast<std::size_t>(bi) * g + i]];

            std::fill(doc_grad.begin(), doc_grad.end(), 0.0);
            std::fill(query_grad.begin(), query_grad.end(), 0.0);
            LossBreakdown loss;
            try {
                loss = batch_loss_and_grads(res.doc_tower, res.query_tower, tok,
                                            texts, batch, cfg, &doc_grad,
                                            &query_grad);
            } catch (const NumericsError& e) {
                throw NumericsError("step " + std::to_string(step) + ": " + e.what());
            }

            if (cfg.clip_norm > 0.0) {
                const double gn = std::sqrt(norm2(doc_grad.data(), doc_grad.size()) +
                                            norm2(query_grad.data(), query_grad.size()));
                if (gn > cfg.clip_norm) {
                    const double scale = cfg.clip_norm / gn;
                    for (auto& v : doc_grad) v *= scale;
                    for (auto& v : query_grad) v *= scale;
                }
            }

            const double lr = lr_at(cfg.lr, step, total_steps, cfg.warmup_ratio);
            adamw_update(res.doc_tower, doc_grad, doc_state, step + 1, lr, cfg);
            adamw_update(res.query_tower, query_grad, query_state, step + 1, lr, cfg);

            res.curve.push_back({step, loss.total, loss.l_con, loss.l_hard});
            ++step;
        }
    }
    return res;
}

void save_curve(const std::vector<CurvePoint>& curve, const std::string& path) {
    std::ostringstream out;
    out << "step,loss,L_con,L_hard\n";
    out.precision(17);
    for (const auto& c : curve)
        out << c.step << ',' << c.loss << ',' << c.l_con << ',' << c.l_hard << '\n';
    write_file(path, out.str());
}

}  // namespace densenote::train
