#include "densenote/tower.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace densenote {

namespace {
constexpr double kLnEps = 1e-5;
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }
inline double gelu_grad(double x) {
    return 0.5 * (1.0 + std::erf(x * kInvSqrt2)) +
           x * std::exp(-0.5 * x * x) * kInvSqrt2Pi;
}

// y = g (.) xhat + b per row; xhat and rstd cached for the backward pass.
void layer_norm(const double* x, std::size_t rows, std::size_t h,
                const double* g, const double* b, double* y, double* xhat,
                double* rstd) {
    for (std::size_t t = 0; t < rows; ++t) {
        const double* xt = x + t * h;
        double mu = 0.0;
        for (std::size_t i = 0; i < h; ++i) mu += xt[i];
        mu /= static_cast<double>(h);
        double var = 0.0;
        for (std::size_t i = 0; i < h; ++i) {
            const double d = xt[i] - mu;
            var += d * d;
        }
        var /= static_cast<double>(h);
        const double r = 1.0 / std::sqrt(var + kLnEps);
        rstd[t] = r;
        double* xh = xhat + t * h;
        double* yt = y + t * h;
        for (std::size_t i = 0; i < h; ++i) {
            xh[i] = (xt[i] - mu) * r;
            yt[i] = g[i] * xh[i] + b[i];
        }
    }
}

// dx += backward of layer_norm; accumulates into dg, db.
void layer_norm_backward(const double* dy, const double* xhat, const double* rstd,
                         std::size_t rows, std::size_t h, const double* g,
                         double* dx, double* dg, double* db) {
    for (std::size_t t = 0; t < rows; ++t) {
        const double* dyt = dy + t * h;
        const double* xh = xhat + t * h;
        double m1 = 0.0, m2 = 0.0;
        for (std::size_t i = 0; i < h; ++i) {
            const double dxh = dyt[i] * g[i];
            m1 += dxh;
            m2 += dxh * xh[i];
            dg[i] += dyt[i] * xh[i];
            db[i] += dyt[i];
        }
        m1 /= static_cast<double>(h);
        m2 /= static_cast<double>(h);
        const double r = rstd[t];
        double* dxt = dx + t * h;
        for (std::size_t i = 0; i < h; ++i) {
            dxt[i] += r * (dyt[i] * g[i] - m1 - xh[i] * m2);
        }
    }
}

void add_rows(double* m, const double* bias, std::size_t rows, std::size_t cols) {
    for (std::size_t t = 0; t < rows; ++t)
        for (std::size_t i = 0; i < cols; ++i) m[t * cols + i] += bias[i];
}

void col_sums_acc(const double* m, double* out, std::size_t rows, std::size_t cols) {
    for (std::size_t t = 0; t < rows; ++t)
        for (std::size_t i = 0; i < cols; ++i) out[i] += m[t * cols + i];
}
}  // namespace

void TowerConfig::validate() const {
    if (layers < 1) throw ConfigError("tower: layers must be >= 1");
    if (heads < 1 || hidden % heads != 0)
        throw ConfigError("tower: hidden must be a multiple of heads");
    if (dim < 1) throw ConfigError("tower: dim must be >= 1");
    if (max_seq < 2) throw ConfigError("tower: max_seq must be >= 2");
    if (term_vocab < 2) throw ConfigError("tower: term vocab too small");
}

TowerParams make_tower(const TowerConfig& cfg) {
    cfg.validate();
    TowerParams p;
    p.cfg = cfg;
    const std::size_t h = cfg.hidden, f = cfg.ffn();

    std::size_t cursor = 0;
    auto block = [&](const std::string& name, std::size_t size) {
        p.blocks.push_back({name, cursor, size});
        const std::size_t off = cursor;
        cursor += size;
        return off;
    };

    p.tok_emb = block("tok_emb", static_cast<std::size_t>(cfg.vocab_total()) * h);
    p.pos_emb = block("pos_emb", static_cast<std::size_t>(cfg.max_seq) * h);
    p.layer.resize(cfg.layers);
    for (std::uint32_t l = 0; l < cfg.layers; ++l) {
        const std::string pre = "layer" + std::to_string(l) + ".";
        auto& lo = p.layer[l];
        lo.ln1_g = block(pre + "ln1_g", h);
        lo.ln1_b = block(pre + "ln1_b", h);
        lo.wq = block(pre + "wq", h * h);
        lo.wk = block(pre + "wk", h * h);
        lo.wv = block(pre + "wv", h * h);
        lo.wo = block(pre + "wo", h * h);
        lo.ln2_g = block(pre + "ln2_g", h);
        lo.ln2_b = block(pre + "ln2_b", h);
        lo.w1 = block(pre + "w1", f * h);
        lo.b1 = block(pre + "b1", f);
        lo.w2 = block(pre + "w2", h * f);
        lo.b2 = block(pre + "b2", h);
    }
    p.lnf_g = block("lnf_g", h);
    p.lnf_b = block("lnf_b", h);
    p.proj = block("proj", static_cast<std::size_t>(cfg.dim) * h);

    p.data.assign(cursor, 0.0);
    return p;
}

void init_params(TowerParams& p, std::uint64_t seed) {
    Rng rng(derive_seed(seed, 0x70F3ULL));
    const double h = static_cast<double>(p.cfg.hidden);
    const double f = static_cast<double>(p.cfg.ffn());
    auto fill = [&](std::size_t off, std::size_t n, double std_dev) {
        for (std::size_t i = 0; i < n; ++i) p.data[off + i] = std_dev * rng.normal();
    };
    auto ones = [&](std::size_t off, std::size_t n) {
        std::fill_n(p.data.begin() + static_cast<std::ptrdiff_t>(off), n, 1.0);
    };

    fill(p.tok_emb, static_cast<std::size_t>(p.cfg.vocab_total()) * p.cfg.hidden, 0.05);
    fill(p.pos_emb, static_cast<std::size_t>(p.cfg.max_seq) * p.cfg.hidden, 0.05);
    for (const auto& lo : p.layer) {
        ones(lo.ln1_g, p.cfg.hidden);
        fill(lo.wq, p.cfg.hidden * p.cfg.hidden, 1.0 / std::sqrt(h));
        fill(lo.wk, p.cfg.hidden * p.cfg.hidden, 1.0 / std::sqrt(h));
        fill(lo.wv, p.cfg.hidden * p.cfg.hidden, 1.0 / std::sqrt(h));
        fill(lo.wo, p.cfg.hidden * p.cfg.hidden, 1.0 / std::sqrt(h));
        ones(lo.ln2_g, p.cfg.hidden);
        fill(lo.w1, p.cfg.ffn() * p.cfg.hidden, 1.0 / std::sqrt(h));
        fill(lo.w2, p.cfg.hidden * p.cfg.ffn(), 1.0 / std::sqrt(f));
    }
    ones(p.lnf_g, p.cfg.hidden);
    fill(p.proj, static_cast<std::size_t>(p.cfg.dim) * p.cfg.hidden, 1.0 / std::sqrt(h));
}

// ---------------------------------------------------------------------------
// Checkpoint.
// ---------------------------------------------------------------------------

namespace {
constexpr char kTowerMagic[4] = {'D', 'N', 'T', '1'};

void put_u32(std::string& out, std::uint32_t v) {
    char b[4];
    b[0] = static_cast<char>(v & 0xff);
    b[1] = static_cast<char>((v >> 8) & 0xff);
    b[2] = static_cast<char>((v >> 16) & 0xff);
    b[3] = static_cast<char>((v >> 24) & 0xff);
    out.append(b, 4);
}

std::uint32_t get_u32(const std::string& s, std::size_t& pos) {
    if (pos + 4 > s.size()) throw IoError("checkpoint truncated");
    const auto* b = reinterpret_cast<const unsigned char*>(s.data() + pos);
    pos += 4;
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) |
           (static_cast<std::uint32_t>(b[3]) << 24);
}
}  // namespace

void save_tower(const TowerParams& p, const std::string& path) {
    std::string out;
    out.reserve(32 + p.data.size() * sizeof(double));
    out.append(kTowerMagic, 4);
    put_u32(out, p.cfg.layers);
    put_u32(out, p.cfg.heads);
    put_u32(out, p.cfg.hidden);
    put_u32(out, p.cfg.dim);
    put_u32(out, p.cfg.term_vocab);
    put_u32(out, p.cfg.max_seq);
    put_u32(out, p.cfg.bidirectional ? 1u : 0u);
    out.append(reinterpret_cast<const char*>(p.data.data()),
               p.data.size() * sizeof(double));
    write_file(path, out);
}

TowerParams load_tower(const std::string& path) {
    const std::string s = read_file(path);
    if (s.size() < 4 || std::memcmp(s.data(), kTowerMagic, 4) != 0)
        throw IoError("not a tower checkpoint: " + path);
    std::size_t pos = 4;
    TowerConfig cfg;
    cfg.layers = get_u32(s, pos);
    cfg.heads = get_u32(s, pos);
    cfg.hidden = get_u32(s, pos);
    cfg.dim = get_u32(s, pos);
    cfg.term_vocab = get_u32(s, pos);
    cfg.max_seq = get_u32(s, pos);
    cfg.bidirectional = get_u32(s, pos) != 0;

    TowerParams p = make_tower(cfg);
    const std::size_t need = p.data.size() * sizeof(double);
    if (s.size() - pos != need)
        throw IoError("checkpoint size mismatch: " + path);
    std::memcpy(p.data.data(), s.data() + pos, need);
    return p;
}

// ---------------------------------------------------------------------------
// Forward.
// ---------------------------------------------------------------------------

std::vector<double> tower_forward(const TowerParams& p,
                                  const std::vector<TokenId>& seq,
                                  Activations* cache) {
    const auto& cfg = p.cfg;
    const std::size_t L = seq.size();
    const std::size_t h = cfg.hidden;
    const std::size_t f = cfg.ffn();
    const std::size_t H = cfg.heads;
    const std::size_t D = h / H;
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(D));

    if (L == 0) throw ShapeError("tower_forward: empty sequence");
    if (L > cfg.max_seq)
        throw ShapeError("sequence length " + std::to_string(L) +
                         " exceeds max_seq " + std::to_string(cfg.max_seq));
    for (auto id : seq) {
        if (id >= cfg.vocab_total())
            throw TokenRangeError("token id " + std::to_string(id) +
                                  " out of range (vocab " +
                                  std::to_string(cfg.vocab_total()) + ")");
    }

    if (cache) {
        cache->len = L;
        cache->layers.assign(cfg.layers, {});
    }

    std::vector<double> x(L * h);
    for (std::size_t t = 0; t < L; ++t) {
        const double* te = p.ptr(p.tok_emb) + static_cast<std::size_t>(seq[t]) * h;
        const double* pe = p.ptr(p.pos_emb) + t * h;
        for (std::size_t i = 0; i < h; ++i) x[t * h + i] = te[i] + pe[i];
    }

    std::vector<double> a(L * h), xhat(L * h), rstd(L);
    std::vector<double> q(L * h), k(L * h), v(L * h), probs, ctx(L * h);
    std::vector<double> f1(L * f), g1(L * f), f2(L * h);

    for (std::uint32_t l = 0; l < cfg.layers; ++l) {
        const auto& lo = p.layer[l];
        Activations::LayerActs* la = cache ? &cache->layers[l] : nullptr;
        if (la) la->in = x;

        layer_norm(x.data(), L, h, p.ptr(lo.ln1_g), p.ptr(lo.ln1_b), a.data(),
                   xhat.data(), rstd.data());
        if (la) {
            la->ln1_xhat = xhat;
            la->ln1_rstd = rstd;
        }

        matmul_nt(a.data(), p.ptr(lo.wq), q.data(), L, h, h);
        matmul_nt(a.data(), p.ptr(lo.wk), k.data(), L, h, h);
        matmul_nt(a.data(), p.ptr(lo.wv), v.data(), L, h, h);

        probs.assign(H * L * L, 0.0);
        std::fill(ctx.begin(), ctx.end(), 0.0);
        for (std::size_t hd = 0; hd < H; ++hd) {
            const std::size_t o = hd * D;
            double* ph = probs.data() + hd * L * L;
            for (std::size_t i = 0; i < L; ++i) {
                const std::size_t jmax = cfg.bidirectional ? L - 1 : i;
                double* row = ph + i * L;
                double mx = -1e300;
                for (std::size_t j = 0; j <= jmax; ++j) {
                    row[j] = dot(q.data() + i * h + o, k.data() + j * h + o, D) *
                             inv_sqrt_d;
                    mx = std::max(mx, row[j]);
                }
                double denom = 0.0;
                for (std::size_t j = 0; j <= jmax; ++j) {
                    row[j] = std::exp(row[j] - mx);
                    denom += row[j];
                }
                const double inv = 1.0 / denom;
                double* ci = ctx.data() + i * h + o;
                for (std::size_t j = 0; j <= jmax; ++j) {
                    row[j] *= inv;
                    axpy(row[j], v.data() + j * h + o, ci, D);
                }
            }
        }
        if (la) {
            la->q = q;
            la->k = k;
            la->v = v;
            la->probs = probs;
            la->ctx = ctx;
        }

        // x <- x + Wo ctx
        matmul_nt(ctx.data(), p.ptr(lo.wo), f2.data(), L, h, h);
        for (std::size_t i = 0; i < L * h; ++i) x[i] += f2[i];
        if (la) la->mid = x;

        layer_norm(x.data(), L, h, p.ptr(lo.ln2_g), p.ptr(lo.ln2_b), a.data(),
                   xhat.data(), rstd.data());
        if (la) {
            la->ln2_xhat = xhat;
            la->ln2_rstd = rstd;
        }

        matmul_nt(a.data(), p.ptr(lo.w1), f1.data(), L, f, h);
        add_rows(f1.data(), p.ptr(lo.b1), L, f);
        for (std::size_t i = 0; i < L * f; ++i) g1[i] = gelu(f1[i]);
        if (la) {
            la->f1 = f1;
            la->g1 = g1;
        }

        matmul_nt(g1.data(), p.ptr(lo.w2), f2.data(), L, h, f);
        add_rows(f2.data(), p.ptr(lo.b2), L, h);
        for (std::size_t i = 0; i < L * h; ++i) x[i] += f2[i];
    }

    std::vector<double> hidden(L * h);
    layer_norm(x.data(), L, h, p.ptr(p.lnf_g), p.ptr(p.lnf_b), hidden.data(),
               xhat.data(), rstd.data());
    if (cache) {
        cache->xf = std::move(x);
        cache->lnf_xhat = xhat;
        cache->lnf_rstd = rstd;
    }
    return hidden;
}

// ---------------------------------------------------------------------------
// Backward.
// ---------------------------------------------------------------------------

void tower_backward(const TowerParams& p, const std::vector<TokenId>& seq,
                    const Activations& acts, const std::vector<double>& d_hidden,
                    std::vector<double>& grad) {
    const auto& cfg = p.cfg;
    const std::size_t L = acts.len;
    const std::size_t h = cfg.hidden;
    const std::size_t f = cfg.ffn();
    const std::size_t H = cfg.heads;
    const std::size_t D = h / H;
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(D));

    if (seq.size() != L || d_hidden.size() != L * h)
        throw ShapeError("tower_backward: shape mismatch");
    if (grad.size() != p.data.size())
        throw ShapeError("tower_backward: grad buffer size mismatch");

    std::vector<double> dx(L * h, 0.0);
    layer_norm_backward(d_hidden.data(), acts.lnf_xhat.data(), acts.lnf_rstd.data(),
                        L, h, p.ptr(p.lnf_g), dx.data(), grad.data() + p.lnf_g,
                        grad.data() + p.lnf_b);

    std::vector<double> a(L * h), da(L * h);
    std::vector<double> dq(L * h), dk(L * h), dv(L * h), dctx(L * h);
    std::vector<double> df1(L * f), dg1(L * f);
    std::vector<double> dmid(L * h);

    for (std::uint32_t li = cfg.layers; li-- > 0;) {
        const auto& lo = p.layer[li];
        const auto& la = acts.layers[li];

        // FFN block: out = mid + W2 gelu(W1 LN2(mid) + b1) + b2
        // Recompute the LN2 output from its cached normalized form.
        for (std::size_t t = 0; t < L; ++t)
            for (std::size_t i = 0; i < h; ++i)
                a[t * h + i] = p.ptr(lo.ln2_g)[i] * la.ln2_xhat[t * h + i] +
                               p.ptr(lo.ln2_b)[i];

        std::fill(dg1.begin(), dg1.end(), 0.0);
        matmul_nn_acc(dx.data(), p.ptr(lo.w2), dg1.data(), L, f, h);
        matmul_tn_acc(dx.data(), la.g1.data(), grad.data() + lo.w2, L, f, h);
        col_sums_acc(dx.data(), grad.data() + lo.b2, L, h);

        for (std::size_t i = 0; i < L * f; ++i)
            df1[i] = dg1[i] * gelu_grad(la.f1[i]);

        std::fill(da.begin(), da.end(), 0.0);
        matmul_nn_acc(df1.data(), p.ptr(lo.w1), da.data(), L, h, f);
        matmul_tn_acc(df1.data(), a.data(), grad.data() + lo.w1, L, h, f);
        col_sums_acc(df1.data(), grad.data() + lo.b1, L, f);

        dmid = dx;  // residual path
        layer_norm_backward(da.data(), la.ln2_xhat.data(), la.ln2_rstd.data(), L, h,
                            p.ptr(lo.ln2_g), dmid.data(), grad.data() + lo.ln2_g,
                            grad.data() + lo.ln2_b);

        // Attention block: mid = in + Wo ctx(LN1(in))
        std::fill(dctx.begin(), dctx.end(), 0.0);
        matmul_nn_acc(dmid.data(), p.ptr(lo.wo), dctx.data(), L, h, h);
        matmul_tn_acc(dmid.data(), la.ctx.data(), grad.data() + lo.wo, L, h, h);

        std::fill(dq.begin(), dq.end(), 0.0);
        std::fill(dk.begin(), dk.end(), 0.0);
        std::fill(dv.begin(), dv.end(), 0.0);
        std::vector<double> dp(L);
        for (std::size_t hd = 0; hd < H; ++hd) {
            const std::size_t o = hd * D;
            const double* ph = la.probs.data() + hd * L * L;
            for (std::size_t i = 0; i < L; ++i) {
                const std::size_t jmax = cfg.bidirectional ? L - 1 : i;
                const double* row = ph + i * L;
                const double* dci = dctx.data() + i * h + o;
                double psum = 0.0;
                for (std::size_t j = 0; j <= jmax; ++j) {
                    dp[j] = dot(dci, la.v.data() + j * h + o, D);
                    axpy(row[j], dci, dv.data() + j * h + o, D);
                    psum += row[j] * dp[j];
                }
                double* dqi = dq.data() + i * h + o;
                for (std::size_t j = 0; j <= jmax; ++j) {
                    const double ds = row[j] * (dp[j] - psum) * inv_sqrt_d;
                    if (ds == 0.0) continue;
                    axpy(ds, la.k.data() + j * h + o, dqi, D);
                    axpy(ds, la.q.data() + i * h + o, dk.data() + j * h + o, D);
                }
            }
        }

        for (std::size_t t = 0; t < L; ++t)
            for (std::size_t i = 0; i < h; ++i)
                a[t * h + i] = p.ptr(lo.ln1_g)[i] * la.ln1_xhat[t * h + i] +
                               p.ptr(lo.ln1_b)[i];

        std::fill(da.begin(), da.end(), 0.0);
        matmul_nn_acc(dq.data(), p.ptr(lo.wq), da.data(), L, h, h);
        matmul_nn_acc(dk.data(), p.ptr(lo.wk), da.data(), L, h, h);
        matmul_nn_acc(dv.data(), p.ptr(lo.wv), da.data(), L, h, h);
        matmul_tn_acc(dq.data(), a.data(), grad.data() + lo.wq, L, h, h);
        matmul_tn_acc(dk.data(), a.data(), grad.data() + lo.wk, L, h, h);
        matmul_tn_acc(dv.data(), a.data(), grad.data() + lo.wv, L, h, h);

        dx = dmid;
        layer_norm_backward(da.data(), la.ln1_xhat.data(), la.ln1_rstd.data(), L, h,
                            p.ptr(lo.ln1_g), dx.data(), grad.data() + lo.ln1_g,
                            grad.data() + lo.ln1_b);
    }

    for (std::size_t t = 0; t < L; ++t) {
        double* gt = grad.data() + p.tok_emb + static_cast<std::size_t>(seq[t]) * h;
        double* gp = grad.data() + p.pos_emb + t * h;
        const double* dxt = dx.data() + t * h;
        for (std::size_t i = 0; i < h; ++i) {
            gt[i] += dxt[i];
            gp[i] += dxt[i];
        }
    }
}

// ---------------------------------------------------------------------------
// Embeddings.
// ---------------------------------------------------------------------------

std::vector<int> mrl_dims_for(int dim, int dim_low) {
    if (dim_low < 1 || dim_low > dim) throw ConfigError("bad MRL dims");
    std::vector<int> m;
    for (int d = dim_low; d < dim; d *= 2) m.push_back(d);
    m.push_back(dim);
    return m;
}

std::vector<double> truncate(const EmbeddingRecord& e, int m) {
    if (std::find(e.mrl_dims.begin(), e.mrl_dims.end(), m) == e.mrl_dims.end())
        throw MrlDimError("dimension " + std::to_string(m) + " not in the MRL set");
    return std::vector<double>(e.vec.begin(), e.vec.begin() + m);
}

std::vector<EmbeddingRecord> extract_embed(const std::vector<double>& hidden,
                                           std::size_t hidden_width,
                                           const RenderedPrompt& prompt,
                                           const double* proj, std::size_t dim,
                                           const std::vector<int>& mrl_dims) {
    if (hidden_width == 0 || hidden.size() % hidden_width != 0)
        throw ShapeError("extract_embed: bad hidden matrix");
    const std::size_t rows = hidden.size() / hidden_width;
    std::vector<EmbeddingRecord> out;
    out.reserve(prompt.positions.size());
    for (auto pos : prompt.positions) {
        if (pos >= rows) throw ShapeError("extract_embed: position out of range");
        EmbeddingRecord r;
        r.mrl_dims = mrl_dims;
        r.vec.resize(dim);
        matmul_nt(hidden.data() + pos * hidden_width, proj, r.vec.data(), 1, dim,
                  hidden_width);
        out.push_back(std::move(r));
    }
    return out;
}

DocEmbeddings embed_document(const TowerParams& p, const Tokenizer& tok,
                             const corpus::Document& d) {
    const auto prompt = render_document_prompt(d, tok, p.cfg.max_seq);
    const auto hidden = tower_forward(p, prompt.tokens);
    const int dim = static_cast<int>(p.cfg.dim);
    auto recs = extract_embed(hidden, p.cfg.hidden, prompt, p.ptr(p.proj),
                              p.cfg.dim, mrl_dims_for(dim, std::min(16, dim)));
    return {std::move(recs[0]), std::move(recs[1]), std::move(recs[2])};
}

EmbeddingRecord embed_query(const TowerParams& p, const Tokenizer& tok,
                            const std::string& text, QueryRenderMode mode) {
    const auto prompt = render_query({0, text}, tok, mode);
    const auto hidden = tower_forward(p, prompt.tokens);
    const int dim = static_cast<int>(p.cfg.dim);
    auto recs = extract_embed(hidden, p.cfg.hidden, prompt, p.ptr(p.proj),
                              p.cfg.dim, mrl_dims_for(dim, std::min(16, dim)));
    return std::move(recs[0]);
}

}  // namespace densenote
