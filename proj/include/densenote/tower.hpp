#pragma once

// A small trainable transformer tower in 64-bit floats with hand-written
// backpropagation. Parameters live in one flat vector behind a named block
// layout so the optimizer, checkpoint format, and finite-difference oracles
// all see the same storage.

#include <cstdint>
#include <string>
#include <vector>

#include "densenote/common.hpp"
#include "densenote/prompt.hpp"
#include "densenote/tokenizer.hpp"

namespace densenote {

struct TowerConfig {
    std::uint32_t layers = 2;
    std::uint32_t heads = 4;
    std::uint32_t hidden = 64;
    std::uint32_t dim = 128;          // projection output size
    std::uint32_t term_vocab = 10000;
    std::uint32_t max_seq = 128;
    bool bidirectional = false;       // the BERT-style student sets this

    std::uint32_t vocab_total() const { return term_vocab + kNumSpecials; }
    std::uint32_t ffn() const { return 4 * hidden; }
    void validate() const;
};

struct BlockInfo {
    std::string name;
    std::size_t offset = 0;
    std::size_t size = 0;
};

struct TowerParams {
    TowerConfig cfg;
    std::vector<double> data;

    // Block offsets into data (declaration order == checkpoint order).
    std::size_t tok_emb = 0;  // vocab_total x hidden
    std::size_t pos_emb = 0;  // max_seq x hidden
    struct LayerOffsets {
        std::size_t ln1_g, ln1_b;
        std::size_t wq, wk, wv, wo;   // hidden x hidden each
        std::size_t ln2_g, ln2_b;
        std::size_t w1, b1;           // ffn x hidden, ffn
        std::size_t w2, b2;           // hidden x ffn, hidden
    };
    std::vector<LayerOffsets> layer;
    std::size_t lnf_g = 0, lnf_b = 0;
    std::size_t proj = 0;  // dim x hidden

    std::vector<BlockInfo> blocks;

    std::size_t size() const { return data.size(); }
    const double* ptr(std::size_t off) const { return data.data() + off; }
    double* ptr(std::size_t off) { return data.data() + off; }
};

TowerParams make_tower(const TowerConfig& cfg);
void init_params(TowerParams& p, std::uint64_t seed);

// Checkpoint: magic "DNT1", u32 config fields (layers, heads, hidden, dim,
// term_vocab, max_seq, flags), then the f64 blocks in declaration order.
void save_tower(const TowerParams& p, const std::string& path);
TowerParams load_tower(const std::string& path);

// ---------------------------------------------------------------------------
// Forward / backward.
// ---------------------------------------------------------------------------

struct Activations {
    std::size_t len = 0;
    struct LayerActs {
        std::vector<double> in;                // len x h, residual stream entering the layer
        std::vector<double> ln1_xhat, ln2_xhat;  // len x h
        std::vector<double> ln1_rstd, ln2_rstd;  // len
        std::vector<double> q, k, v;           // len x h
        std::vector<double> probs;             // heads x len x len
        std::vector<double> ctx;               // len x h, pre-Wo
        std::vector<double> mid;               // len x h, after attention residual
        std::vector<double> f1, g1;            // len x ffn
    };
    std::vector<LayerActs> layers;
    std::vector<double> xf;        // len x h, input to the final norm
    std::vector<double> lnf_xhat;  // len x h
    std::vector<double> lnf_rstd;  // len
};

// Final hidden states, row-major len x hidden. With cache == nullptr only the
// output is produced. Attention is causal unless cfg.bidirectional.
std::vector<double> tower_forward(const TowerParams& p,
                                  const std::vector<TokenId>& seq,
                                  Activations* cache = nullptr);

// Accumulates dLoss/dparams into grad (same layout as p.data) given the
// gradient w.r.t. the final hidden states.
void tower_backward(const TowerParams& p, const std::vector<TokenId>& seq,
                    const Activations& acts, const std::vector<double>& d_hidden,
                    std::vector<double>& grad);

// ---------------------------------------------------------------------------
// Embeddings.
// ---------------------------------------------------------------------------

struct EmbeddingRecord {
    std::vector<double> vec;    // length dim; prefixes at mrl_dims are usable
    std::vector<int> mrl_dims;  // the set M, ascending
};

// M = {dim_low, 2*dim_low, ..., dim}.
std::vector<int> mrl_dims_for(int dim, int dim_low = 16);

// First m components of the record; m must be in M.
std::vector<double> truncate(const EmbeddingRecord& e, int m);

// One record per recorded prompt position: proj * hidden[pos].
std::vector<EmbeddingRecord> extract_embed(const std::vector<double>& hidden,
                                           std::size_t hidden_width,
                                           const RenderedPrompt& prompt,
                                           const double* proj, std::size_t dim,
                                           const std::vector<int>& mrl_dims);

struct DocEmbeddings {
    EmbeddingRecord title, content, emb;
};

DocEmbeddings embed_document(const TowerParams& p, const Tokenizer& tok,
                             const corpus::Document& d);
EmbeddingRecord embed_query(const TowerParams& p, const Tokenizer& tok,
                            const std::string& text, QueryRenderMode mode);

}  // namespace densenote
