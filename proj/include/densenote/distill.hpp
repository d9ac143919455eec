#pragma once

// Stage-II query-based knowledge distillation: a small student query tower
// learns the frozen teacher's query embeddings through an MSE + cosine loss,
// plus the executable generalization-bound check.

#include <cstdint>
#include <string>
#include <vector>

#include "densenote/corpus.hpp"
#include "densenote/tower.hpp"
#include "densenote/train.hpp"

namespace densenote::qkd {

struct DistillConfig {
    double lambda = 1.0;
    double lr = 3e-3;
    int epochs = 40;
    int batch = 64;
    std::uint64_t seed = 1;
    double warmup_ratio = 0.1;
    double weight_decay = 1e-3;
    double clip_norm = 1.0;
    double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
    bool add_paraphrases = true;
    TowerConfig student{1, 4, 32, 128, 10000, 128, true};
    QueryRenderMode student_mode = QueryRenderMode::StudentCls;

    void validate() const;
};

// ||q - q_stu||^2 - lambda * cos(q, q_stu) for one pair.
double qkd_loss(const std::vector<double>& q_teacher,
                const std::vector<double>& q_student, double lambda);

// Same value plus dLoss/d(q_student) accumulated into d_student.
double qkd_loss_grad(const double* q_teacher, const double* q_student,
                     std::size_t n, double lambda, double* d_student);

// Cheap seeded paraphrases of the training queries (term dropped, swapped, or
// duplicated); ids continue from id_base.
std::vector<corpus::Query> make_paraphrases(const std::vector<corpus::Query>& qs,
                                            std::uint64_t seed,
                                            std::int64_t id_base);

struct DistillResult {
    TowerParams student;
    std::vector<std::pair<int, double>> curve;  // (step, mean qkd loss)
};

// Teacher is frozen; its embeddings are computed once. The student starts
// from `student_init`.
DistillResult distill(const std::vector<corpus::Query>& queries,
                      const TowerParams& teacher, const TowerParams& student_init,
                      const DistillConfig& cfg, const Tokenizer& teacher_tok,
                      const Tokenizer& student_tok);

// Mean distillation loss over a query set plus the gradient for the student
// (finite-difference oracle hook).
double qkd_batch_loss_and_grad(const std::vector<corpus::Query>& queries,
                               const std::vector<std::vector<double>>& teacher_embs,
                               const TowerParams& student,
                               const DistillConfig& cfg,
                               const Tokenizer& student_tok,
                               std::vector<double>* student_grad);

// ---------------------------------------------------------------------------
// Appendix-style bound check: the empirical risk gap of the student against
// the shared document tower is bounded by (2K/n) * sum ||q_stu - q||.
// ---------------------------------------------------------------------------

struct BoundReport {
    double k_norm = 0.0;  // max embedding L2 norm observed in the sample
    std::int64_t n = 0;   // number of (query, doc, label) pairs
    double lhs = 0.0;     // R(student scores) - R(teacher scores)
    double rhs = 0.0;     // (2 k_norm / n) * sum ||q_stu - q||
    bool holds = false;   // lhs <= rhs + 1e-9
};

// Each triplet contributes (q, d+, y=1) and (q, d-, y=0); scores are raw dot
// products of the full-dim [EMB]-type document embedding with the query
// embeddings, and the point-wise loss is (1-y) s + softplus(-s).
BoundReport check_bound(const std::vector<corpus::TrainingTriplet>& sample,
                        const train::TextStore& texts,
                        const TowerParams& teacher_query,
                        const TowerParams& student,
                        const TowerParams& doc_tower,
                        const Tokenizer& teacher_tok,
                        const Tokenizer& student_tok,
                        QueryRenderMode student_mode);

void save_bound_report(const BoundReport&, const std::string& path);

}  // namespace densenote::qkd
