#pragma once

// Evaluation metrics: R@K over per-query rankings, Mann-Whitney AUC over
// labeled pairs, and contrastive entropy on validation triplets.

#include <cstdint>
#include <map>
#include <unordered_map>
#include <vector>

#include "densenote/tower.hpp"
#include "densenote/train.hpp"

namespace densenote::metrics {

struct RecallReport {
    std::map<int, double> recall;              // K -> Success@K / n_queries
    std::map<int, std::int64_t> successes;
    std::int64_t n_queries = 0;
};

using Rankings = std::unordered_map<std::int64_t, std::vector<std::int64_t>>;
using Truth = std::unordered_map<std::int64_t, std::int64_t>;

// Success at K iff the ground-truth doc appears within the first K entries of
// the query's ranking. Throws MissingRanking when a truth query lacks one.
RecallReport recall_at_k(const Rankings& rankings, const Truth& truth,
                         const std::vector<int>& ks);

// Mann-Whitney AUC; ties contribute 1/2. Throws DegenerateLabels when only
// one class is present.
double auc(const std::vector<int>& labels, const std::vector<double>& scores);

// Mean q->d InfoNCE at prefix m over pools of `pool_size` validation
// triplets; the pool holds the [EMB]-type positives of the batch.
double contrastive_entropy(const TowerParams& doc_tower,
                           const TowerParams& query_tower, const Tokenizer& tok,
                           const std::vector<corpus::TrainingTriplet>& validation,
                           const train::TextStore& texts, double tau, int m,
                           int pool_size = 480);

}  // namespace densenote::metrics
