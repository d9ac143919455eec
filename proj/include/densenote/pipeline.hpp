#pragma once

// Orchestration: configuration, the gen-data -> train -> distill -> index ->
// eval stage chain, and the content-hash manifest.

#include <cstdint>
#include <iosfwd>
#include <string>

#include <nlohmann/json.hpp>

#include "densenote/ann.hpp"
#include "densenote/corpus.hpp"
#include "densenote/distill.hpp"
#include "densenote/train.hpp"

namespace densenote::pipeline {

struct DataParams {
    int docs = 2000;
    int queries = 1000;
    int eval_queries = 300;
    int vocab = 800;
    int k_filter = 10;
    int t_filter = 50;
    double th_click = 0.6;
    double th_rel = 0.5;
    double val_fraction = 0.1;
};

struct EvalParams {
    std::vector<int> ks = {10, 50, 100, 500, 1000};
    int nprobe = 16;
    int entropy_pool = 240;
    double tau = 0.05;
    double auc_sat_threshold = 0.70;  // satisfaction is stricter than relevance
    double auc_rel_threshold = 0.50;
};

struct PipelineConfig {
    std::uint64_t seed = 1;
    std::string out_dir = ".";
    DataParams data;
    train::TrainConfig train;
    qkd::DistillConfig distill;
    ann::IvfParams index;
    EvalParams eval;
};

PipelineConfig default_config();
// JSON file; missing fields keep their defaults. DENSENOTE_SEED overrides.
PipelineConfig load_config(const std::string& path);
PipelineConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const PipelineConfig& cfg);

// Artifact paths inside out_dir.
struct Artifacts {
    std::string corpus, queries, eval_queries, truth, clicks, relevance;
    std::string triplets, val_triplets, data_stats, auc_pairs;
    std::string doc_tower, query_tower, stage1_curve;
    std::string student, distill_curve;
    std::string table, index;
    std::string eval_report;
    std::string manifest;

    static Artifacts in(const std::string& dir);
    std::vector<std::string> all() const;
};

enum class Stage { GenData = 0, TrainStage1, Distill, BuildIndex, Eval };
Stage stage_from_string(const std::string& s);
const char* to_string(Stage s);

void stage_gen_data(const PipelineConfig& cfg);
void stage_train(const PipelineConfig& cfg);
void stage_distill(const PipelineConfig& cfg);
void stage_build_index(const PipelineConfig& cfg);
nlohmann::json stage_eval(const PipelineConfig& cfg);

// Runs the stage chain starting at `from`, then writes the manifest. Logs one
// line per stage to `log` when non-null. Throws with the stage name on error.
void run_pipeline(const PipelineConfig& cfg, Stage from = Stage::GenData,
                  std::ostream* log = nullptr);

// SHA-256 of every existing artifact, keyed by file name.
nlohmann::json build_manifest(const PipelineConfig& cfg);

}  // namespace densenote::pipeline
