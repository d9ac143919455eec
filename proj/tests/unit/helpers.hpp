#pragma once

// Shared test fixtures: tiny corpora, tiny tower configs, and the central
// finite-difference gradient oracle.

#include <cmath>
#include <functional>
#include <vector>

#include "densenote/common.hpp"
#include "densenote/corpus.hpp"
#include "densenote/tower.hpp"

namespace testutil {

using namespace densenote;

inline TowerConfig tiny_tower(std::uint32_t layers = 2, std::uint32_t hidden = 16,
                              std::uint32_t heads = 2, std::uint32_t dim = 8,
                              bool bidirectional = false) {
    TowerConfig cfg;
    cfg.layers = layers;
    cfg.hidden = hidden;
    cfg.heads = heads;
    cfg.dim = dim;
    cfg.term_vocab = 101;
    cfg.max_seq = 48;
    cfg.bidirectional = bidirectional;
    return cfg;
}

inline corpus::Document tiny_doc(std::int64_t id, const std::string& salt = "") {
    return {id, "alpha beta" + salt, "gamma", "delta epsilon zeta" + salt};
}

struct FdStats {
    double max_rel_err = 0.0;
    int checked = 0;
};

// Central finite differences on a sample of coordinates per named block.
// f(params) must be a deterministic scalar; grad is the analytic gradient in
// the same flat layout.
inline FdStats fd_check_blocks(const TowerParams& params,
                               const std::vector<double>& grad,
                               const std::function<double(const TowerParams&)>& f,
                               int per_block, std::uint64_t seed) {
    FdStats stats;
    TowerParams work = params;
    Rng rng(seed);
    for (const auto& block : params.blocks) {
        const int n = static_cast<int>(
            std::min<std::size_t>(static_cast<std::size_t>(per_block), block.size));
        for (int c = 0; c < n; ++c) {
            const std::size_t i = block.offset + rng.below(block.size);
            const double orig = work.data[i];
            const double h = 1e-5 * std::max(1.0, std::abs(orig));
            work.data[i] = orig + h;
            const double fp = f(work);
            work.data[i] = orig - h;
            const double fm = f(work);
            work.data[i] = orig;
            const double fd = (fp - fm) / (2.0 * h);
            // Floor keeps finite-difference rounding noise on (near-)zero
            // gradients from registering as relative error.
            const double scale = std::max(1e-4, std::abs(fd) + std::abs(grad[i]));
            const double rel = std::abs(fd - grad[i]) / scale;
            stats.max_rel_err = std::max(stats.max_rel_err, rel);
            stats.checked += 1;
        }
    }
    return stats;
}

}  // namespace testutil
