#pragma once

// Offline index path: plain k-means, the 6-layer residual K-means semantic-ID
// codebooks, an IVFPQ index with asymmetric distance search, and the exact
// brute-force oracle used to measure recall.

#include <cstdint>
#include <string>
#include <vector>

#include "densenote/common.hpp"

namespace densenote::ann {

struct KmeansResult {
    std::vector<double> centroids;    // k x d
    std::vector<int> assignments;     // n
    std::vector<double> sse_history;  // one entry per Lloyd iteration
};

// k-means++ seeding then Lloyd iterations; empty clusters are re-seeded from
// the point farthest from its centroid. Deterministic under seed.
KmeansResult kmeans(const std::vector<double>& points, std::size_t n,
                    std::size_t d, int k, int iters, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Residual K-means semantic IDs.
// ---------------------------------------------------------------------------

struct ResidualCodebook {
    std::size_t dim = 0;
    int layers = 0;
    int k = 0;
    std::vector<std::vector<double>> centroids;  // per layer: k x dim
    std::vector<double> mean_residual_norms;     // per layer, after assignment
};

ResidualCodebook build_residual(const std::vector<double>& vectors, std::size_t n,
                                std::size_t dim, int layers, int k, int iters,
                                std::uint64_t seed);

// Greedy nearest-centroid path over residuals; one index per layer.
std::vector<int> assign_semantic_id(const ResidualCodebook& cb, const double* v);

// Sum of the chosen centroids.
std::vector<double> reconstruct(const ResidualCodebook& cb,
                                const std::vector<int>& id);

// ---------------------------------------------------------------------------
// IVFPQ.
// ---------------------------------------------------------------------------

struct IvfParams {
    int nlist = 256;
    int m_sub = 16;
    int nbits = 8;
    int rq_layers = 6;   // semantic-ID codebook depth
    int rq_k = 64;       // centroids per semantic layer
    int kmeans_iters = 10;
};

struct IvfPqIndex {
    std::uint32_t dim = 0, nlist = 0, m_sub = 0, nbits = 0, count = 0;
    std::uint32_t ksub() const { return 1u << nbits; }
    std::uint32_t dsub() const { return dim / m_sub; }

    std::vector<float> coarse;        // nlist x dim
    std::vector<float> pq_codebooks;  // m_sub x ksub x dsub
    struct PostingList {
        std::vector<std::int64_t> ids;
        std::vector<std::uint8_t> codes;  // ids.size() x m_sub
    };
    std::vector<PostingList> lists;

    ResidualCodebook semantic;               // semantic-ID codebooks
    std::vector<std::int64_t> doc_ids;       // insertion order
    std::vector<std::uint32_t> semantic_ids; // count x rq_layers
};

IvfPqIndex build_ivfpq(const std::vector<double>& vectors,
                       const std::vector<std::int64_t>& ids,
                       const IvfParams& params, std::uint64_t seed);

struct SearchHit {
    std::int64_t id = 0;
    double dist = 0.0;  // squared L2, ascending
};

// Probes the nprobe nearest coarse cells with per-cell lookup tables. Ties
// break by ascending id. Throws EmptyIndex when there is nothing to search.
std::vector<SearchHit> search(const IvfPqIndex& index, const double* query,
                              int nprobe, int topk);

std::vector<SearchHit> exact_search(const std::vector<double>& vectors,
                                    const std::vector<std::int64_t>& ids,
                                    std::size_t dim, const double* query,
                                    int topk);

// Decode one posting entry back to a vector (coarse centroid + PQ centroids).
std::vector<double> decode_entry(const IvfPqIndex& index, std::size_t list,
                                 std::size_t pos);

// Index file ("DNIX") and embedding table ("DNEB", f32 rows; ids in a binary
// ".ids" sidecar).
void save_index(const IvfPqIndex&, const std::string& path);
IvfPqIndex load_index(const std::string& path);

struct EmbeddingTable {
    std::uint32_t count = 0, dim = 0;
    std::vector<std::int64_t> ids;
    std::vector<float> rows;

    std::vector<double> row_f64(std::size_t i) const;
};

void save_table(const EmbeddingTable&, const std::string& path);
EmbeddingTable load_table(const std::string& path);

std::vector<SearchHit> exact_search_table(const EmbeddingTable& table,
                                          const double* query, int topk);

}  // namespace densenote::ann
