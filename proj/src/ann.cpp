#include "densenote/ann.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>

namespace densenote::ann {

namespace {

double dist2(const double* a, const double* b, std::size_t d) {
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        const double t = a[i] - b[i];
        s += t * t;
    }
    return s;
}

double dist2_f32(const double* a, const float* b, std::size_t d) {
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        const double t = a[i] - static_cast<double>(b[i]);
        s += t * t;
    }
    return s;
}

// Nearest centroid index, ties to the lowest index.
int nearest(const double* v, const std::vector<double>& centroids, int k,
            std::size_t d, double* best_out = nullptr) {
    int best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c) {
        const double cd = dist2(v, centroids.data() + static_cast<std::size_t>(c) * d, d);
        if (cd < bd) {
            bd = cd;
            best = c;
        }
    }
    if (best_out) *best_out = bd;
    return best;
}

}  // namespace

KmeansResult kmeans(const std::vector<double>& points, std::size_t n,
                    std::size_t d, int k, int iters, std::uint64_t seed) {
    if (k < 1) throw ConfigError("kmeans: k must be >= 1");
    if (n < static_cast<std::size_t>(k))
        throw ConfigError("kmeans: fewer points than clusters");
    if (points.size() != n * d) throw ShapeError("kmeans: bad point matrix");

    KmeansResult res;
    res.centroids.assign(static_cast<std::size_t>(k) * d, 0.0);
    res.assignments.assign(n, 0);
    Rng rng(derive_seed(seed, 0x4B4DULL));

    // k-means++ seeding.
    std::vector<double> min_d2(n, std::numeric_limits<double>::infinity());
    {
        const std::size_t first = rng.below(n);
        std::copy_n(points.data() + first * d, d, res.centroids.data());
        for (int c = 1; c < k; ++c) {
            const double* prev =
                res.centroids.data() + static_cast<std::size_t>(c - 1) * d;
            double total = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                min_d2[i] = std::min(min_d2[i], dist2(points.data() + i * d, prev, d));
                total += min_d2[i];
            }
            std::size_t pick = 0;
            if (total > 0.0) {
                const double r = rng.uniform() * total;
                double acc = 0.0;
                pick = n - 1;
                for (std::size_t i = 0; i < n; ++i) {
                    acc += min_d2[i];
                    if (r < acc) {
                        pick = i;
                        break;
                    }
                }
            } else {
                pick = rng.below(n);
            }
            std::copy_n(points.data() + pick * d, d,
                        res.centroids.data() + static_cast<std::size_t>(c) * d);
        }
    }

    std::vector<double> point_d2(n, 0.0);
    std::vector<double> sums(static_cast<std::size_t>(k) * d);
    std::vector<std::int64_t> counts(static_cast<std::size_t>(k));

    for (int it = 0; it < iters; ++it) {
        // Assignment (deterministic regardless of threading: one writer per i).
        parallel_for(n, [&](std::size_t i) {
            double bd = 0.0;
            res.assignments[i] = nearest(points.data() + i * d, res.centroids, k, d, &bd);
            point_d2[i] = bd;
        });
        double sse = 0.0;
        for (std::size_t i = 0; i < n; ++i) sse += point_d2[i];
        res.sse_history.push_back(sse);

        // Mean update.
        std::fill(sums.begin(), sums.end(), 0.0);
        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            const int c = res.assignments[i];
            counts[static_cast<std::size_t>(c)] += 1;
            axpy(1.0, points.data() + i * d,
                 sums.data() + static_cast<std::size_t>(c) * d, d);
        }
        for (int c = 0; c < k; ++c) {
            if (counts[static_cast<std::size_t>(c)] == 0) {
                // Re-seed an empty cluster from the farthest point.
                std::size_t far = 0;
                for (std::size_t i = 1; i < n; ++i)
                    if (point_d2[i] > point_d2[far]) far = i;
                std::copy_n(points.data() + far * d, d,
                            res.centroids.data() + static_cast<std::size_t>(c) * d);
                point_d2[far] = 0.0;  // avoid re-seeding two clusters from one point
            } else {
                const double inv = 1.0 / static_cast<double>(counts[static_cast<std::size_t>(c)]);
                for (std::size_t j = 0; j < d; ++j)
                    res.centroids[static_cast<std::size_t>(c) * d + j] =
                        sums[static_cast<std::size_t>(c) * d + j] * inv;
            }
        }
    }

    // Final assignment so centroids and assignments agree.
    parallel_for(n, [&](std::size_t i) {
        double bd = 0.0;
        res.assignments[i] = nearest(points.data() + i * d, res.centroids, k, d, &bd);
        point_d2[i] = bd;
    });
    double sse = 0.0;
    for (std::size_t i = 0; i < n; ++i) sse += point_d2[i];
    res.sse_history.push_back(sse);
    return res;
}

// ---------------------------------------------------------------------------
// Residual codebooks.
// ---------------------------------------------------------------------------

ResidualCodebook build_residual(const std::vector<double>& vectors, std::size_t n,
                                std::size_t dim, int layers, int k, int iters,
                                std::uint64_t seed) {
    if (layers < 1) throw ConfigError("build_residual: layers must be >= 1");
    ResidualCodebook cb;
    cb.dim = dim;
    cb.layers = layers;
    cb.k = k;

    std::vector<double> residuals = vectors;
    for (int l = 0; l < layers; ++l) {
        auto km = kmeans(residuals, n, dim, k, iters, derive_seed(seed, 100 + l));
        parallel_for(n, [&](std::size_t i) {
            const double* c = km.centroids.data() +
                              static_cast<std::size_t>(km.assignments[i]) * dim;
            for (std::size_t j = 0; j < dim; ++j) residuals[i * dim + j] -= c[j];
        });
        double mean_norm = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            mean_norm += norm(residuals.data() + i * dim, dim);
        cb.mean_residual_norms.push_back(mean_norm / static_cast<double>(n));
        cb.centroids.push_back(std::move(km.centroids));
    }
    return cb;
}

std::vector<int> assign_semantic_id(const ResidualCodebook& cb, const double* v) {
    std::vector<double> r(v, v + cb.dim);
    std::vector<int> id(static_cast<std::size_t>(cb.layers));
    for (int l = 0; l < cb.layers; ++l) {
        const int c = nearest(r.data(), cb.centroids[static_cast<std::size_t>(l)],
                              cb.k, cb.dim);
        id[static_cast<std::size_t>(l)] = c;
        const double* cc = cb.centroids[static_cast<std::size_t>(l)].data() +
                           static_cast<std::size_t>(c) * cb.dim;
        for (std::size_t j = 0; j < cb.dim; ++j) r[j] -= cc[j];
    }
    return id;
}

std::vector<double> reconstruct(const ResidualCodebook& cb,
                                const std::vector<int>& id) {
    if (id.size() != static_cast<std::size_t>(cb.layers))
        throw ShapeError("reconstruct: bad semantic id length");
    std::vector<double> out(cb.dim, 0.0);
    for (int l = 0; l < cb.layers; ++l) {
        const int c = id[static_cast<std::size_t>(l)];
        if (c < 0 || c >= cb.k) throw ShapeError("reconstruct: id out of range");
        axpy(1.0, cb.centroids[static_cast<std::size_t>(l)].data() +
                      static_cast<std::size_t>(c) * cb.dim,
             out.data(), cb.dim);
    }
    return out;
}

// ---------------------------------------------------------------------------
// IVFPQ build.
// ---------------------------------------------------------------------------

IvfPqIndex build_ivfpq(const std::vector<double>& vectors,
                       const std::vector<std::int64_t>& ids,
                       const IvfParams& params, std::uint64_t seed) {
    const std::size_t n = ids.size();
    if (n == 0) throw ConfigError("build_ivfpq: no vectors");
    if (vectors.size() % n != 0) throw ShapeError("build_ivfpq: bad matrix");
    const std::size_t dim = vectors.size() / n;
    if (dim % static_cast<std::size_t>(params.m_sub) != 0)
        throw ConfigError("build_ivfpq: dim must be divisible by m_sub");
    const std::size_t ksub = 1u << params.nbits;
    if (n < std::max<std::size_t>(static_cast<std::size_t>(params.nlist), ksub))
        throw ConfigError("build_ivfpq: need at least max(nlist, 2^nbits) vectors");
    if (params.nbits < 1 || params.nbits > 8)
        throw ConfigError("build_ivfpq: nbits must be in [1, 8] for byte codes");

    IvfPqIndex index;
    index.dim = static_cast<std::uint32_t>(dim);
    index.nlist = static_cast<std::uint32_t>(params.nlist);
    index.m_sub = static_cast<std::uint32_t>(params.m_sub);
    index.nbits = static_cast<std::uint32_t>(params.nbits);
    index.count = static_cast<std::uint32_t>(n);
    const std::size_t dsub = index.dsub();

    // Coarse quantizer, then freeze to f32 so a saved and reloaded index
    // behaves identically to a freshly built one.
    auto coarse_km = kmeans(vectors, n, dim, params.nlist, params.kmeans_iters,
                            derive_seed(seed, 1));
    index.coarse.assign(coarse_km.centroids.begin(), coarse_km.centroids.end());

    std::vector<int> assign(n);
    std::vector<double> residuals(n * dim);
    parallel_for(n, [&](std::size_t i) {
        const double* v = vectors.data() + i * dim;
        int best = 0;
        double bd = std::numeric_limits<double>::infinity();
        for (std::uint32_t c = 0; c < index.nlist; ++c) {
            const double cd = dist2_f32(v, index.coarse.data() + c * dim, dim);
            if (cd < bd) {
                bd = cd;
                best = static_cast<int>(c);
            }
        }
        assign[i] = best;
        const float* cc = index.coarse.data() + static_cast<std::size_t>(best) * dim;
        for (std::size_t j = 0; j < dim; ++j)
            residuals[i * dim + j] = v[j] - static_cast<double>(cc[j]);
    });

    // Per-subspace codebooks trained on the coarse residuals.
    index.pq_codebooks.assign(static_cast<std::size_t>(params.m_sub) * ksub * dsub, 0.0f);
    std::vector<double> sub(n * dsub);
    for (int s = 0; s < params.m_sub; ++s) {
        for (std::size_t i = 0; i < n; ++i)
            std::copy_n(residuals.data() + i * dim + static_cast<std::size_t>(s) * dsub,
                        dsub, sub.data() + i * dsub);
        auto km = kmeans(sub, n, dsub, static_cast<int>(ksub), params.kmeans_iters,
                         derive_seed(seed, 10 + static_cast<std::uint64_t>(s)));
        float* dst = index.pq_codebooks.data() +
                     static_cast<std::size_t>(s) * ksub * dsub;
        for (std::size_t j = 0; j < ksub * dsub; ++j)
            dst[j] = static_cast<float>(km.centroids[j]);
    }

    // Encode and file every vector.
    index.lists.resize(index.nlist);
    std::vector<std::uint8_t> codes(n * static_cast<std::size_t>(params.m_sub));
    parallel_for(n, [&](std::size_t i) {
        for (int s = 0; s < params.m_sub; ++s) {
            const double* r = residuals.data() + i * dim + static_cast<std::size_t>(s) * dsub;
            const float* cb = index.pq_codebooks.data() +
                              static_cast<std::size_t>(s) * ksub * dsub;
            int best = 0;
            double bd = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < ksub; ++c) {
                const double cd = dist2_f32(r, cb + c * dsub, dsub);
                if (cd < bd) {
                    bd = cd;
                    best = static_cast<int>(c);
                }
            }
            codes[i * static_cast<std::size_t>(params.m_sub) + static_cast<std::size_t>(s)] =
                static_cast<std::uint8_t>(best);
        }
    });
    for (std::size_t i = 0; i < n; ++i) {
        auto& list = index.lists[static_cast<std::size_t>(assign[i])];
        list.ids.push_back(ids[i]);
        list.codes.insert(list.codes.end(),
                          codes.begin() + static_cast<std::ptrdiff_t>(
                                              i * static_cast<std::size_t>(params.m_sub)),
                          codes.begin() + static_cast<std::ptrdiff_t>(
                                              (i + 1) * static_cast<std::size_t>(params.m_sub)));
    }

    // Semantic IDs over the raw vectors.
    index.semantic = build_residual(vectors, n, dim, params.rq_layers, params.rq_k,
                                    params.kmeans_iters, derive_seed(seed, 2));
    index.doc_ids = ids;
    index.semantic_ids.resize(n * static_cast<std::size_t>(params.rq_layers));
    parallel_for(n, [&](std::size_t i) {
        const auto sid = assign_semantic_id(index.semantic, vectors.data() + i * dim);
        for (int l = 0; l < params.rq_layers; ++l)
            index.semantic_ids[i * static_cast<std::size_t>(params.rq_layers) +
                               static_cast<std::size_t>(l)] =
                static_cast<std::uint32_t>(sid[static_cast<std::size_t>(l)]);
    });
    return index;
}

// ---------------------------------------------------------------------------
// Search.
// ---------------------------------------------------------------------------

std::vector<SearchHit> search(const IvfPqIndex& index, const double* query,
                              int nprobe, int topk) {
    if (index.count == 0) throw EmptyIndex("search on an empty index");
    if (topk <= 0) return {};
    nprobe = std::clamp<int>(nprobe, 1, static_cast<int>(index.nlist));
    const std::size_t dim = index.dim;
    const std::size_t dsub = index.dsub();
    const std::size_t ksub = index.ksub();

    std::vector<std::pair<double, std::uint32_t>> cells(index.nlist);
    for (std::uint32_t c = 0; c < index.nlist; ++c)
        cells[c] = {dist2_f32(query, index.coarse.data() + static_cast<std::size_t>(c) * dim, dim), c};
    std::partial_sort(cells.begin(), cells.begin() + nprobe, cells.end());

    std::vector<SearchHit> hits;
    std::vector<double> lut(static_cast<std::size_t>(index.m_sub) * ksub);
    std::vector<double> rq(dim);
    for (int pi = 0; pi < nprobe; ++pi) {
        const std::uint32_t cell = cells[static_cast<std::size_t>(pi)].second;
        const auto& list = index.lists[cell];
        if (list.ids.empty()) continue;

        const float* cc = index.coarse.data() + static_cast<std::size_t>(cell) * dim;
        for (std::size_t j = 0; j < dim; ++j)
            rq[j] = query[j] - static_cast<double>(cc[j]);
        for (std::uint32_t s = 0; s < index.m_sub; ++s) {
            const float* cb = index.pq_codebooks.data() +
                              static_cast<std::size_t>(s) * ksub * dsub;
            double* row = lut.data() + static_cast<std::size_t>(s) * ksub;
            for (std::size_t c = 0; c < ksub; ++c)
                row[c] = dist2_f32(rq.data() + s * dsub, cb + c * dsub, dsub);
        }
        for (std::size_t e = 0; e < list.ids.size(); ++e) {
            const std::uint8_t* code = list.codes.data() + e * index.m_sub;
            double dist = 0.0;
            for (std::uint32_t s = 0; s < index.m_sub; ++s)
                dist += lut[static_cast<std::size_t>(s) * ksub + code[s]];
            hits.push_back({list.ids[e], dist});
        }
    }

    const std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(topk), hits.size());
    auto cmp = [](const SearchHit& a, const SearchHit& b) {
        if (a.dist != b.dist) return a.dist < b.dist;
        return a.id < b.id;
    };
    std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(keep),
                      hits.end(), cmp);
    hits.resize(keep);
    return hits;
}

std::vector<SearchHit> exact_search(const std::vector<double>& vectors,
                                    const std::vector<std::int64_t>& ids,
                                    std::size_t dim, const double* query,
                                    int topk) {
    if (ids.empty()) throw EmptyIndex("exact_search on an empty set");
    if (topk <= 0) return {};
    std::vector<SearchHit> hits(ids.size());
    parallel_for(ids.size(), [&](std::size_t i) {
        hits[i] = {ids[i], dist2(vectors.data() + i * dim, query, dim)};
    });
    auto cmp = [](const SearchHit& a, const SearchHit& b) {
        if (a.dist != b.dist) return a.dist < b.dist;
        return a.id < b.id;
    };
    const std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(topk), hits.size());
    std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(keep),
                      hits.end(), cmp);
    hits.resize(keep);
    return hits;
}

std::vector<double> decode_entry(const IvfPqIndex& index, std::size_t list,
                                 std::size_t pos) {
    const auto& pl = index.lists.at(list);
    const std::size_t dim = index.dim;
    const std::size_t dsub = index.dsub();
    const std::size_t ksub = index.ksub();
    std::vector<double> out(dim);
    const float* cc = index.coarse.data() + list * dim;
    for (std::size_t j = 0; j < dim; ++j) out[j] = static_cast<double>(cc[j]);
    const std::uint8_t* code = pl.codes.data() + pos * index.m_sub;
    for (std::uint32_t s = 0; s < index.m_sub; ++s) {
        const float* cb = index.pq_codebooks.data() +
                          (static_cast<std::size_t>(s) * ksub + code[s]) * dsub;
        for (std::size_t j = 0; j < dsub; ++j)
            out[static_cast<std::size_t>(s) * dsub + j] += static_cast<double>(cb[j]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Files.
// ---------------------------------------------------------------------------

namespace {
constexpr char kIndexMagic[4] = {'D', 'N', 'I', 'X'};
constexpr char kTableMagic[4] = {'D', 'N', 'E', 'B'};

struct Writer {
    std::string out;
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    void i64(std::int64_t v) {
        const auto u = static_cast<std::uint64_t>(v);
        for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((u >> (8 * i)) & 0xff));
    }
    void bytes(const void* p, std::size_t n) {
        out.append(reinterpret_cast<const char*>(p), n);
    }
};

struct Reader {
    const std::string& s;
    std::size_t pos = 0;
    explicit Reader(const std::string& str) : s(str) {}
    void need(std::size_t n) const {
        if (pos + n > s.size()) throw IoError("index file truncated");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(s[pos + static_cast<std::size_t>(i)])) << (8 * i);
        pos += 4;
        return v;
    }
    std::int64_t i64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(s[pos + static_cast<std::size_t>(i)])) << (8 * i);
        pos += 8;
        return static_cast<std::int64_t>(v);
    }
    void bytes(void* p, std::size_t n) {
        need(n);
        std::memcpy(p, s.data() + pos, n);
        pos += n;
    }
};
}  // namespace

void save_index(const IvfPqIndex& index, const std::string& path) {
    Writer w;
    w.bytes(kIndexMagic, 4);
    w.u32(index.dim);
    w.u32(index.nlist);
    w.u32(index.m_sub);
    w.u32(index.nbits);
    w.u32(index.count);
    w.u32(static_cast<std::uint32_t>(index.semantic.layers));
    w.u32(static_cast<std::uint32_t>(index.semantic.k));
    w.bytes(index.coarse.data(), index.coarse.size() * sizeof(float));
    w.bytes(index.pq_codebooks.data(), index.pq_codebooks.size() * sizeof(float));
    for (const auto& list : index.lists) {
        w.u32(static_cast<std::uint32_t>(list.ids.size()));
        for (std::size_t e = 0; e < list.ids.size(); ++e) {
            w.i64(list.ids[e]);
            w.bytes(list.codes.data() + e * index.m_sub, index.m_sub);
        }
    }
    for (const auto& layer : index.semantic.centroids) {
        std::vector<float> f(layer.begin(), layer.end());
        w.bytes(f.data(), f.size() * sizeof(float));
    }
    for (double v : index.semantic.mean_residual_norms)
        w.bytes(&v, sizeof(double));
    for (std::int64_t id : index.doc_ids) w.i64(id);
    w.bytes(index.semantic_ids.data(), index.semantic_ids.size() * sizeof(std::uint32_t));
    write_file(path, w.out);
}

IvfPqIndex load_index(const std::string& path) {
    const std::string s = read_file(path);
    if (s.size() < 4 || std::memcmp(s.data(), kIndexMagic, 4) != 0)
        throw IoError("not an index file: " + path);
    Reader r(s);
    r.pos = 4;
    IvfPqIndex index;
    index.dim = r.u32();
    index.nlist = r.u32();
    index.m_sub = r.u32();
    index.nbits = r.u32();
    index.count = r.u32();
    const std::uint32_t rq_layers = r.u32();
    const std::uint32_t rq_k = r.u32();

    index.coarse.resize(static_cast<std::size_t>(index.nlist) * index.dim);
    r.bytes(index.coarse.data(), index.coarse.size() * sizeof(float));
    index.pq_codebooks.resize(static_cast<std::size_t>(index.m_sub) * index.ksub() *
                              index.dsub());
    r.bytes(index.pq_codebooks.data(), index.pq_codebooks.size() * sizeof(float));
    index.lists.resize(index.nlist);
    for (auto& list : index.lists) {
        const std::uint32_t len = r.u32();
        list.ids.resize(len);
        list.codes.resize(static_cast<std::size_t>(len) * index.m_sub);
        for (std::uint32_t e = 0; e < len; ++e) {
            list.ids[e] = r.i64();
            r.bytes(list.codes.data() + static_cast<std::size_t>(e) * index.m_sub,
                    index.m_sub);
        }
    }
    index.semantic.dim = index.dim;
    index.semantic.layers = static_cast<int>(rq_layers);
    index.semantic.k = static_cast<int>(rq_k);
    index.semantic.centroids.resize(rq_layers);
    for (auto& layer : index.semantic.centroids) {
        std::vector<float> f(static_cast<std::size_t>(rq_k) * index.dim);
        r.bytes(f.data(), f.size() * sizeof(float));
        layer.assign(f.begin(), f.end());
    }
    index.semantic.mean_residual_norms.resize(rq_layers);
    for (auto& v : index.semantic.mean_residual_norms) r.bytes(&v, sizeof(double));
    index.doc_ids.resize(index.count);
    for (auto& id : index.doc_ids) id = r.i64();
    index.semantic_ids.resize(static_cast<std::size_t>(index.count) * rq_layers);
    r.bytes(index.semantic_ids.data(), index.semantic_ids.size() * sizeof(std::uint32_t));
    return index;
}

std::vector<double> EmbeddingTable::row_f64(std::size_t i) const {
    std::vector<double> out(dim);
    for (std::size_t j = 0; j < dim; ++j)
        out[j] = static_cast<double>(rows[i * dim + j]);
    return out;
}

void save_table(const EmbeddingTable& table, const std::string& path) {
    Writer w;
    w.bytes(kTableMagic, 4);
    w.u32(table.count);
    w.u32(table.dim);
    w.bytes(table.rows.data(), table.rows.size() * sizeof(float));
    write_file(path, w.out);

    Writer ids;
    for (std::int64_t id : table.ids) ids.i64(id);
    write_file(path + ".ids", ids.out);
}

EmbeddingTable load_table(const std::string& path) {
    const std::string s = read_file(path);
    if (s.size() < 4 || std::memcmp(s.data(), kTableMagic, 4) != 0)
        throw IoError("not an embedding table: " + path);
    Reader r(s);
    r.pos = 4;
    EmbeddingTable table;
    table.count = r.u32();
    table.dim = r.u32();
    table.rows.resize(static_cast<std::size_t>(table.count) * table.dim);
    r.bytes(table.rows.data(), table.rows.size() * sizeof(float));

    const std::string ids = read_file(path + ".ids");
    if (ids.size() != static_cast<std::size_t>(table.count) * 8)
        throw IoError("embedding table id sidecar size mismatch");
    Reader ri(ids);
    table.ids.resize(table.count);
    for (auto& id : table.ids) id = ri.i64();
    return table;
}

std::vector<SearchHit> exact_search_table(const EmbeddingTable& table,
                                          const double* query, int topk) {
    if (table.count == 0) throw EmptyIndex("exact search on an empty table");
    if (topk <= 0) return {};
    std::vector<SearchHit> hits(table.count);
    parallel_for(table.count, [&](std::size_t i) {
        hits[i] = {table.ids[i],
                   dist2_f32(query, table.rows.data() + i * table.dim, table.dim)};
    });
    auto cmp = [](const SearchHit& a, const SearchHit& b) {
        if (a.dist != b.dist) return a.dist < b.dist;
        return a.id < b.id;
    };
    const std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(topk), hits.size());
    std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(keep),
                      hits.end(), cmp);
    hits.resize(keep);
    return hits;
}

}  // namespace densenote::ann
