#include "densenote/distill.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace densenote::qkd {

void DistillConfig::validate() const {
    if (lambda < 0.0) throw ConfigError("distill: lambda must be >= 0");
    if (batch < 1) throw ConfigError("distill: batch must be >= 1");
    if (epochs < 0) throw ConfigError("distill: bad epoch count");
    student.validate();
}

double qkd_loss(const std::vector<double>& q_teacher,
                const std::vector<double>& q_student, double lambda) {
    if (q_teacher.size() != q_student.size())
        throw ShapeError("qkd_loss: dimension mismatch");
    const std::size_t n = q_teacher.size();
    double mse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = q_teacher[i] - q_student[i];
        mse += d * d;
    }
    return mse - lambda * cosine_prefix(q_teacher.data(), q_student.data(), n);
}

double qkd_loss_grad(const double* q_teacher, const double* q_student,
                     std::size_t n, double lambda, double* d_student) {
    double mse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = q_student[i] - q_teacher[i];
        mse += d * d;
        d_student[i] += 2.0 * d;
    }
    const double na2 = norm2(q_teacher, n);
    const double nb2 = norm2(q_student, n);
    if (!(na2 > 0.0) || !(nb2 > 0.0))
        throw DegenerateEmbedding("qkd_loss on zero-norm embedding");
    const double dp = dot(q_teacher, q_student, n);
    const double inv = 1.0 / std::sqrt(na2 * nb2);
    const double cos = dp * inv;
    for (std::size_t i = 0; i < n; ++i)
        d_student[i] -= lambda * (q_teacher[i] * inv - cos * q_student[i] / nb2);
    return mse - lambda * cos;
}

std::vector<corpus::Query> make_paraphrases(const std::vector<corpus::Query>& qs,
                                            std::uint64_t seed,
                                            std::int64_t id_base) {
    Rng rng(derive_seed(seed, 0xBAB81EULL));
    std::vector<corpus::Query> out;
    out.reserve(qs.size());
    std::int64_t next_id = id_base;
    for (const auto& q : qs) {
        auto terms = Tokenizer::split_terms(q.text);
        if (terms.empty()) continue;
        const int mode = static_cast<int>(rng.below(3));
        if (mode == 0 && terms.size() >= 3) {
            terms.erase(terms.begin() +
                        static_cast<std::ptrdiff_t>(rng.below(terms.size())));
        } else if (mode == 1 && terms.size() >= 2) {
            const std::size_t i = rng.below(terms.size());
            std::size_t j = rng.below(terms.size());
            if (i == j) j = (j + 1) % terms.size();
            std::swap(terms[i], terms[j]);
        } else {
            terms.push_back(terms[rng.below(terms.size())]);
        }
        std::ostringstream text;
        for (std::size_t i = 0; i < terms.size(); ++i) {
            if (i) text << ' ';
            text << terms[i];
        }
        out.push_back({next_id++, text.str()});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Distillation.
// ---------------------------------------------------------------------------

namespace {

void student_backprop(const TowerParams& student, const RenderedPrompt& prompt,
                      const double* emb_grad, std::vector<double>& grad_out) {
    Activations acts;
    const auto hidden = tower_forward(student, prompt.tokens, &acts);
    const std::size_t h = student.cfg.hidden;
    const std::size_t dim = student.cfg.dim;
    const std::size_t pos = prompt.positions.front();
    std::vector<double> d_hidden(hidden.size(), 0.0);
    const double* proj = student.ptr(student.proj);
    double* d_proj = grad_out.data() + student.proj;
    const double* hrow = hidden.data() + pos * h;
    double* dh = d_hidden.data() + pos * h;
    for (std::size_t d = 0; d < dim; ++d) {
        if (emb_grad[d] == 0.0) continue;
        axpy(emb_grad[d], proj + d * h, dh, h);
        axpy(emb_grad[d], hrow, d_proj + d * h, h);
    }
    tower_backward(student, prompt.tokens, acts, d_hidden, grad_out);
}

}  // namespace

double qkd_batch_loss_and_grad(const std::vector<corpus::Query>& queries,
                               const std::vector<std::vector<double>>& teacher_embs,
                               const TowerParams& student,
                               const DistillConfig& cfg,
                               const Tokenizer& student_tok,
                               std::vector<double>* student_grad) {
    if (queries.size() != teacher_embs.size())
        throw ShapeError("qkd batch: teacher embedding count mismatch");
    const std::size_t n = queries.size();
    if (n == 0) throw BatchShapeError("qkd batch: empty");
    const double inv_n = 1.0 / static_cast<double>(n);
    const std::size_t dim = student.cfg.dim;

    std::vector<double> losses(n, 0.0);
    const int wave = std::max(1, std::min(kGradStripes, max_threads()));
    std::vector<std::vector<double>> bufs;
    for (int s0 = 0; s0 < kGradStripes; s0 += wave) {
        const int s1 = std::min(kGradStripes, s0 + wave);
        bufs.assign(static_cast<std::size_t>(s1 - s0), {});
        parallel_for(static_cast<std::size_t>(s1 - s0), [&](std::size_t w) {
            const int stripe = s0 + static_cast<int>(w);
            const std::size_t begin = n * static_cast<std::size_t>(stripe) / kGradStripes;
            const std::size_t end =
                n * (static_cast<std::size_t>(stripe) + 1) / kGradStripes;
            if (begin >= end) return;
            if (student_grad) bufs[w].assign(student.size(), 0.0);
            std::vector<double> emb_grad(dim);
            for (std::size_t i = begin; i < end; ++i) {
                const auto prompt = render_query(queries[i], student_tok,
                                                 cfg.student_mode);
                const auto hidden = tower_forward(student, prompt.tokens);
                const auto recs = extract_embed(
                    hidden, student.cfg.hidden, prompt, student.ptr(student.proj),
                    dim,
                    mrl_dims_for(static_cast<int>(dim),
                                 std::min(16, static_cast<int>(dim))));
                std::fill(emb_grad.begin(), emb_grad.end(), 0.0);
                losses[i] = qkd_loss_grad(teacher_embs[i].data(),
                                          recs[0].vec.data(), dim, cfg.lambda,
                                          emb_grad.data());
                if (student_grad) {
                    for (auto& g : emb_grad) g *= inv_n;
                    student_backprop(student, prompt, emb_grad.data(), bufs[w]);
                }
            }
        });
        if (student_grad) {
            for (const auto& buf : bufs) {
                if (!buf.empty())
                    axpy(1.0, buf.data(), student_grad->data(), buf.size());
            }
        }
    }
    double total = 0.0;
    for (double l : losses) total += l;
    const double mean = total * inv_n;
    if (!std::isfinite(mean)) throw NumericsError("non-finite distillation loss");
    return mean;
}

DistillResult distill(const std::vector<corpus::Query>& queries,
                      const TowerParams& teacher, const TowerParams& student_init,
                      const DistillConfig& cfg, const Tokenizer& teacher_tok,
                      const Tokenizer& student_tok) {
    cfg.validate();
    std::vector<corpus::Query> all = queries;
    if (cfg.add_paraphrases) {
        std::int64_t max_id = 0;
        for (const auto& q : queries) max_id = std::max(max_id, q.id);
        auto extra = make_paraphrases(queries, cfg.seed, max_id + 1);
        all.insert(all.end(), extra.begin(), extra.end());
    }
    if (all.empty()) throw ConfigError("distill: no queries");

    // Teacher embeddings computed once; the teacher is never touched again.
    std::vector<std::vector<double>> teacher_embs(all.size());
    parallel_for(all.size(), [&](std::size_t i) {
        teacher_embs[i] = embed_query(teacher, teacher_tok, all[i].text,
                                      QueryRenderMode::TeacherEos)
                              .vec;
    });

    DistillResult res;
    res.student = student_init;
    train::TrainConfig opt;  // reuse the AdamW hyperparameter bundle
    opt.beta1 = cfg.beta1;
    opt.beta2 = cfg.beta2;
    opt.adam_eps = cfg.adam_eps;
    opt.weight_decay = cfg.weight_decay;

    train::AdamState state(res.student.size());
    std::vector<double> grad(res.student.size());
    std::vector<std::size_t> order(all.size());
    std::iota(order.begin(), order.end(), 0);

    const std::size_t b = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch),
                                                all.size());
    const int steps_per_epoch = static_cast<int>(all.size() / b);
    const int total_steps = cfg.epochs * steps_per_epoch;

    int step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng shuffle_rng(derive_seed(cfg.seed, 2000 + static_cast<std::uint64_t>(epoch)));
        shuffle_rng.shuffle(order);
        for (int bi = 0; bi < steps_per_epoch; ++bi) {
            std::vector<corpus::Query> batch(b);
            std::vector<std::vector<double>> tembs(b);
            for (std::size_t i = 0; i < b; ++i) {
                const std::size_t idx = order[static_cast<std::size_t>(bi) * b + i];
                batch[i] = all[idx];
                tembs[i] = teacher_embs[idx];
            }
            std::fill(grad.begin(), grad.end(), 0.0);
            double loss;
            try {
                loss = qkd_batch_loss_and_grad(batch, tembs, res.student, cfg,
                                               student_tok, &grad);
            } catch (const NumericsError& e) {
                throw NumericsError("distill step " + std::to_string(step) + ": " +
                                    e.what());
            }
            if (cfg.clip_norm > 0.0) {
                const double gn = norm(grad.data(), grad.size());
                if (gn > cfg.clip_norm) {
                    const double scale = cfg.clip_norm / gn;
                    for (auto& v : grad) v *= scale;
                }
            }
            const double lr = train::lr_at(cfg.lr, step, total_steps, cfg.warmup_ratio);
            train::adamw_update(res.student, grad, state, step + 1, lr, opt);
            res.curve.emplace_back(step, loss);
            ++step;
        }
    }
    return res;
}

// ---------------------------------------------------------------------------
// Bound check.
// ---------------------------------------------------------------------------

namespace {
double softplus(double x) {
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}
// Point-wise loss (1-y) s + softplus(-s).
double pointwise_loss(double s, int y) {
    return (1.0 - static_cast<double>(y)) * s + softplus(-s);
}
}  // namespace

BoundReport check_bound(const std::vector<corpus::TrainingTriplet>& sample,
                        const train::TextStore& texts,
                        const TowerParams& teacher_query,
                        const TowerParams& student,
                        const TowerParams& doc_tower,
                        const Tokenizer& teacher_tok,
                        const Tokenizer& student_tok,
                        QueryRenderMode student_mode) {
    if (sample.empty()) throw ConfigError("check_bound: empty sample");

    BoundReport rep;
    rep.n = static_cast<std::int64_t>(2 * sample.size());
    double sum_teacher = 0.0, sum_student = 0.0, sum_dq = 0.0, k_norm = 0.0;

    std::unordered_map<std::int64_t, std::pair<std::vector<double>, std::vector<double>>> q_cache;
    std::unordered_map<std::int64_t, std::vector<double>> d_cache;

    auto query_pair = [&](std::int64_t qid)
        -> const std::pair<std::vector<double>, std::vector<double>>& {
        auto it = q_cache.find(qid);
        if (it == q_cache.end()) {
            const auto& text = texts.query(qid).text;
            auto tq = embed_query(teacher_query, teacher_tok, text,
                                  QueryRenderMode::TeacherEos).vec;
            auto sq = embed_query(student, student_tok, text, student_mode).vec;
            it = q_cache.emplace(qid, std::make_pair(std::move(tq), std::move(sq))).first;
        }
        return it->second;
    };
    auto doc_emb = [&](std::int64_t did) -> const std::vector<double>& {
        auto it = d_cache.find(did);
        if (it == d_cache.end()) {
            it = d_cache.emplace(did,
                                 embed_document(doc_tower, teacher_tok,
                                                texts.doc(did)).emb.vec).first;
        }
        return it->second;
    };

    for (const auto& t : sample) {
        const auto& [tq, sq] = query_pair(t.query_id);
        k_norm = std::max(k_norm, norm(tq.data(), tq.size()));
        k_norm = std::max(k_norm, norm(sq.data(), sq.size()));
        std::vector<double> diff(tq.size());
        for (std::size_t i = 0; i < tq.size(); ++i) diff[i] = sq[i] - tq[i];
        const double dq = norm(diff.data(), diff.size());

        for (const auto& [did, y] :
             {std::pair<std::int64_t, int>{t.pos_doc_id, 1},
              std::pair<std::int64_t, int>{t.neg_doc_id, 0}}) {
            const auto& d = doc_emb(did);
            k_norm = std::max(k_norm, norm(d.data(), d.size()));
            sum_teacher += pointwise_loss(dot(tq.data(), d.data(), d.size()), y);
            sum_student += pointwise_loss(dot(sq.data(), d.data(), d.size()), y);
            sum_dq += dq;  // one term per (query, doc, label) pair
        }
    }

    const double inv_n = 1.0 / static_cast<double>(rep.n);
    rep.k_norm = k_norm;
    rep.lhs = (sum_student - sum_teacher) * inv_n;
    rep.rhs = 2.0 * k_norm * inv_n * sum_dq;
    rep.holds = rep.lhs <= rep.rhs + 1e-9;
    return rep;
}

void save_bound_report(const BoundReport& rep, const std::string& path) {
    nlohmann::json j{{"k_norm", rep.k_norm}, {"n", rep.n},    {"lhs", rep.lhs},
                     {"rhs", rep.rhs},       {"holds", rep.holds}};
    write_file(path, j.dump(2) + "\n");
}

}  // namespace densenote::qkd
