#include "densenote/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <sstream>
#include <numeric>
#include <ostream>
#include <set>

#include "densenote/metrics.hpp"

namespace densenote::pipeline {

using nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Config (de)serialization.
// ---------------------------------------------------------------------------

namespace {

template <typename T>
T jget(const json& j, const char* key, const T& def) {
    if (j.is_object() && j.contains(key)) return j.at(key).get<T>();
    return def;
}

TowerConfig tower_from_json(const json& j, const TowerConfig& def) {
    TowerConfig t = def;
    t.layers = jget<std::uint32_t>(j, "layers", def.layers);
    t.heads = jget<std::uint32_t>(j, "heads", def.heads);
    t.hidden = jget<std::uint32_t>(j, "hidden", def.hidden);
    t.dim = jget<std::uint32_t>(j, "dim", def.dim);
    t.term_vocab = jget<std::uint32_t>(j, "term_vocab", def.term_vocab);
    t.max_seq = jget<std::uint32_t>(j, "max_seq", def.max_seq);
    t.bidirectional = jget<bool>(j, "bidirectional", def.bidirectional);
    return t;
}

json tower_to_json(const TowerConfig& t) {
    return {{"layers", t.layers},         {"heads", t.heads},
            {"hidden", t.hidden},         {"dim", t.dim},
            {"term_vocab", t.term_vocab}, {"max_seq", t.max_seq},
            {"bidirectional", t.bidirectional}};
}

}  // namespace

PipelineConfig default_config() {
    PipelineConfig cfg;
    // Desk-scale geometry: contrastive pool of 48 across 2 logical workers.
    cfg.train.k_workers = 2;
    cfg.train.b_per_worker = 24;
    cfg.train.epochs = 8;
    cfg.index.nlist = 64;
    return cfg;
}

PipelineConfig config_from_json(const json& j) {
    PipelineConfig cfg = default_config();
    cfg.seed = jget<std::uint64_t>(j, "seed", cfg.seed);
    cfg.out_dir = jget<std::string>(j, "out_dir", cfg.out_dir);

    if (j.contains("data")) {
        const auto& d = j.at("data");
        cfg.data.docs = jget<int>(d, "docs", cfg.data.docs);
        cfg.data.queries = jget<int>(d, "queries", cfg.data.queries);
        cfg.data.eval_queries = jget<int>(d, "eval_queries", cfg.data.eval_queries);
        cfg.data.vocab = jget<int>(d, "vocab", cfg.data.vocab);
        cfg.data.k_filter = jget<int>(d, "k_filter", cfg.data.k_filter);
        cfg.data.t_filter = jget<int>(d, "t_filter", cfg.data.t_filter);
        cfg.data.th_click = jget<double>(d, "th_click", cfg.data.th_click);
        cfg.data.th_rel = jget<double>(d, "th_rel", cfg.data.th_rel);
        cfg.data.val_fraction = jget<double>(d, "val_fraction", cfg.data.val_fraction);
    }
    if (j.contains("train")) {
        const auto& t = j.at("train");
        auto& tc = cfg.train;
        tc.tau = jget<double>(t, "tau", tc.tau);
        tc.margin = jget<double>(t, "margin", tc.margin);
        tc.alpha = jget<double>(t, "alpha", tc.alpha);
        tc.mrl_dims = jget<std::vector<int>>(t, "mrl_dims", tc.mrl_dims);
        tc.k_workers = jget<int>(t, "k_workers", tc.k_workers);
        tc.b_per_worker = jget<int>(t, "b_per_worker", tc.b_per_worker);
        tc.lr = jget<double>(t, "lr", tc.lr);
        tc.epochs = jget<int>(t, "epochs", tc.epochs);
        tc.warmup_ratio = jget<double>(t, "warmup_ratio", tc.warmup_ratio);
        tc.weight_decay = jget<double>(t, "weight_decay", tc.weight_decay);
        tc.clip_norm = jget<double>(t, "clip_norm", tc.clip_norm);
        tc.parallel_workers = jget<bool>(t, "parallel_workers", tc.parallel_workers);
        if (t.contains("doc_tower"))
            tc.doc_tower = tower_from_json(t.at("doc_tower"), tc.doc_tower);
        if (t.contains("query_tower"))
            tc.query_tower = tower_from_json(t.at("query_tower"), tc.query_tower);
    }
    if (j.contains("distill")) {
        const auto& d = j.at("distill");
        auto& dc = cfg.distill;
        dc.lambda = jget<double>(d, "lambda", dc.lambda);
        dc.lr = jget<double>(d, "lr", dc.lr);
        dc.epochs = jget<int>(d, "epochs", dc.epochs);
        dc.batch = jget<int>(d, "batch", dc.batch);
        dc.add_paraphrases = jget<bool>(d, "add_paraphrases", dc.add_paraphrases);
        if (d.contains("student"))
            dc.student = tower_from_json(d.at("student"), dc.student);
    }
    if (j.contains("index")) {
        const auto& i = j.at("index");
        cfg.index.nlist = jget<int>(i, "nlist", cfg.index.nlist);
        cfg.index.m_sub = jget<int>(i, "m_sub", cfg.index.m_sub);
        cfg.index.nbits = jget<int>(i, "nbits", cfg.index.nbits);
        cfg.index.rq_layers = jget<int>(i, "rq_layers", cfg.index.rq_layers);
        cfg.index.rq_k = jget<int>(i, "rq_k", cfg.index.rq_k);
        cfg.index.kmeans_iters = jget<int>(i, "kmeans_iters", cfg.index.kmeans_iters);
    }
    if (j.contains("eval")) {
        const auto& e = j.at("eval");
        cfg.eval.ks = jget<std::vector<int>>(e, "ks", cfg.eval.ks);
        cfg.eval.nprobe = jget<int>(e, "nprobe", cfg.eval.nprobe);
        cfg.eval.entropy_pool = jget<int>(e, "entropy_pool", cfg.eval.entropy_pool);
        cfg.eval.tau = jget<double>(e, "tau", cfg.eval.tau);
        cfg.eval.auc_sat_threshold =
            jget<double>(e, "auc_sat_threshold", cfg.eval.auc_sat_threshold);
        cfg.eval.auc_rel_threshold =
            jget<double>(e, "auc_rel_threshold", cfg.eval.auc_rel_threshold);
    }

    if (const char* env = std::getenv("DENSENOTE_SEED"))
        cfg.seed = std::strtoull(env, nullptr, 10);
    return cfg;
}

PipelineConfig load_config(const std::string& path) {
    return config_from_json(json::parse(read_file(path)));
}

json config_to_json(const PipelineConfig& cfg) {
    return {
        {"seed", cfg.seed},
        {"out_dir", cfg.out_dir},
        {"data",
         {{"docs", cfg.data.docs},
          {"queries", cfg.data.queries},
          {"eval_queries", cfg.data.eval_queries},
          {"vocab", cfg.data.vocab},
          {"k_filter", cfg.data.k_filter},
          {"t_filter", cfg.data.t_filter},
          {"th_click", cfg.data.th_click},
          {"th_rel", cfg.data.th_rel},
          {"val_fraction", cfg.data.val_fraction}}},
        {"train",
         {{"tau", cfg.train.tau},
          {"margin", cfg.train.margin},
          {"alpha", cfg.train.alpha},
          {"mrl_dims", cfg.train.mrl_dims},
          {"k_workers", cfg.train.k_workers},
          {"b_per_worker", cfg.train.b_per_worker},
          {"lr", cfg.train.lr},
          {"epochs", cfg.train.epochs},
          {"warmup_ratio", cfg.train.warmup_ratio},
          {"weight_decay", cfg.train.weight_decay},
          {"clip_norm", cfg.train.clip_norm},
          {"parallel_workers", cfg.train.parallel_workers},
          {"doc_tower", tower_to_json(cfg.train.doc_tower)},
          {"query_tower", tower_to_json(cfg.train.query_tower)}}},
        {"distill",
         {{"lambda", cfg.distill.lambda},
          {"lr", cfg.distill.lr},
          {"epochs", cfg.distill.epochs},
          {"batch", cfg.distill.batch},
          {"add_paraphrases", cfg.distill.add_paraphrases},
          {"student", tower_to_json(cfg.distill.student)}}},
        {"index",
         {{"nlist", cfg.index.nlist},
          {"m_sub", cfg.index.m_sub},
          {"nbits", cfg.index.nbits},
          {"rq_layers", cfg.index.rq_layers},
          {"rq_k", cfg.index.rq_k},
          {"kmeans_iters", cfg.index.kmeans_iters}}},
        {"eval",
         {{"ks", cfg.eval.ks},
          {"nprobe", cfg.eval.nprobe},
          {"entropy_pool", cfg.eval.entropy_pool},
          {"tau", cfg.eval.tau},
          {"auc_sat_threshold", cfg.eval.auc_sat_threshold},
          {"auc_rel_threshold", cfg.eval.auc_rel_threshold}}}};
}

// ---------------------------------------------------------------------------
// Artifacts.
// ---------------------------------------------------------------------------

Artifacts Artifacts::in(const std::string& dir) {
    auto p = [&](const char* name) { return (fs::path(dir) / name).string(); };
    Artifacts a;
    a.corpus = p("corpus.jsonl");
    a.queries = p("queries.jsonl");
    a.eval_queries = p("eval_queries.jsonl");
    a.truth = p("truth.jsonl");
    a.clicks = p("clicks.jsonl");
    a.relevance = p("relevance.jsonl");
    a.triplets = p("triplets.jsonl");
    a.val_triplets = p("val_triplets.jsonl");
    a.data_stats = p("data_stats.json");
    a.auc_pairs = p("auc_pairs.jsonl");
    a.doc_tower = p("doc_tower.dnt");
    a.query_tower = p("query_tower.dnt");
    a.stage1_curve = p("stage1_curve.csv");
    a.student = p("student.dnt");
    a.distill_curve = p("distill_curve.csv");
    a.table = p("doc_embeddings.dneb");
    a.index = p("index.dnix");
    a.eval_report = p("eval_report.json");
    a.manifest = p("manifest.json");
    return a;
}

std::vector<std::string> Artifacts::all() const {
    return {corpus,     queries,      eval_queries, truth,        clicks,
            relevance,  triplets,     val_triplets, data_stats,   auc_pairs,
            doc_tower,  query_tower,  stage1_curve, student,      distill_curve,
            table,      index,        eval_report};
}

Stage stage_from_string(const std::string& s) {
    if (s == "gen-data") return Stage::GenData;
    if (s == "train-stage1") return Stage::TrainStage1;
    if (s == "distill") return Stage::Distill;
    if (s == "build-index") return Stage::BuildIndex;
    if (s == "eval") return Stage::Eval;
    throw ConfigError("unknown stage: " + s);
}

const char* to_string(Stage s) {
    switch (s) {
        case Stage::GenData: return "gen-data";
        case Stage::TrainStage1: return "train-stage1";
        case Stage::Distill: return "distill";
        case Stage::BuildIndex: return "build-index";
        case Stage::Eval: return "eval";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Stages.
// ---------------------------------------------------------------------------

void stage_gen_data(const PipelineConfig& cfg) {
    const auto art = Artifacts::in(cfg.out_dir);
    fs::create_directories(cfg.out_dir);

    corpus::SynthConfig sc;
    sc.seed = cfg.seed;
    sc.n_docs = cfg.data.docs;
    sc.n_queries = cfg.data.queries;
    sc.n_eval_queries = cfg.data.eval_queries;
    sc.vocab_size = cfg.data.vocab;
    const auto data = corpus::synth_corpus(sc);

    // One-hop triplets from clicks and relevance candidates.
    corpus::OneHopStats ohs;
    auto triplets = corpus::build_onehop(data.clicks, data.relevance,
                                         cfg.data.k_filter, cfg.data.t_filter,
                                         derive_seed(cfg.seed, 20), &ohs);

    // Query associations over all training pairs.
    std::vector<corpus::TermScores> scores(data.train_queries.size());
    parallel_for(data.train_queries.size(), [&](std::size_t i) {
        scores[i] = corpus::score_terms(data.train_queries[i], data.stats);
    });
    std::vector<corpus::Association> assocs;
    std::int64_t n_click_assoc = 0, n_rel_assoc = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        for (std::size_t j = i + 1; j < scores.size(); ++j) {
            const auto r = corpus::match_association(scores[i], scores[j],
                                                     cfg.data.th_click,
                                                     cfg.data.th_rel);
            if (r.click_a_q1_from_q2 || r.click_a_q2_from_q1 || r.rel_a) {
                assocs.push_back({data.train_queries[i].id,
                                  data.train_queries[j].id, r});
                n_click_assoc += (r.click_a_q1_from_q2 ? 1 : 0) +
                                 (r.click_a_q2_from_q1 ? 1 : 0);
                n_rel_assoc += r.rel_a ? 1 : 0;
            }
        }
    }
    const std::size_t onehop_count = triplets.size();
    triplets = corpus::expand_multihop(triplets, assocs);

    // 9:1 train/validation split of the merged triplet set.
    Rng split_rng(derive_seed(cfg.seed, 21));
    std::vector<std::size_t> order(triplets.size());
    std::iota(order.begin(), order.end(), 0);
    split_rng.shuffle(order);
    const std::size_t n_val =
        static_cast<std::size_t>(static_cast<double>(triplets.size()) *
                                 cfg.data.val_fraction);
    std::vector<corpus::TrainingTriplet> val, tr;
    for (std::size_t i = 0; i < order.size(); ++i)
        (i < n_val ? val : tr).push_back(triplets[order[i]]);

    corpus::save_documents(data.docs, art.corpus);
    corpus::save_queries(data.train_queries, art.queries);
    corpus::save_queries(data.eval_queries, art.eval_queries);
    corpus::save_truth(data.truth, art.truth);
    corpus::save_clicks(data.clicks, art.clicks);
    corpus::save_relevance(data.relevance, art.relevance);
    corpus::save_triplets(tr, art.triplets);
    corpus::save_triplets(val, art.val_triplets);

    // Labeled pairs for the AUC metrics: ground truth, near misses from the
    // oracle ranking, and random documents per held-out query.
    {
        Rng pair_rng(derive_seed(cfg.seed, 22));
        std::ostringstream out;
        for (const auto& q : data.eval_queries) {
            const auto ranking = data.oracle_ranking(q.text);
            std::set<std::int64_t> chosen;
            auto emit = [&](std::int64_t doc_id, double score) {
                if (!chosen.insert(doc_id).second) return;
                json row{{"query_id", q.id},
                         {"doc_id", doc_id},
                         {"label_sat", score >= cfg.eval.auc_sat_threshold ? 1 : 0},
                         {"label_rel", score >= cfg.eval.auc_rel_threshold ? 1 : 0}};
                out << row.dump() << '\n';
            };
            for (std::size_t r = 0; r < 6 && r < ranking.size(); ++r)
                emit(ranking[r].doc_id, ranking[r].score);
            for (int extra = 0; extra < 14; ++extra) {
                const auto& pick = ranking[pair_rng.below(ranking.size())];
                emit(pick.doc_id, pick.score);
            }
        }
        write_file(art.auc_pairs, out.str());
    }

    std::map<std::string, std::int64_t> by_source;
    for (const auto& t : triplets) by_source[corpus::to_string(t.source)] += 1;
    json stats{{"n_docs", data.docs.size()},
               {"n_train_queries", data.train_queries.size()},
               {"n_eval_queries", data.eval_queries.size()},
               {"onehop_triplets", onehop_count},
               {"total_triplets", triplets.size()},
               {"train_triplets", tr.size()},
               {"val_triplets", val.size()},
               {"triplets_by_source", by_source},
               {"skipped_no_negative", ohs.skipped_no_negative},
               {"skipped_short_list", ohs.skipped_short_list},
               {"associated_pairs", assocs.size()},
               {"click_associations", n_click_assoc},
               {"rel_associations", n_rel_assoc}};
    write_file(art.data_stats, stats.dump(2) + "\n");
}

namespace {

Tokenizer tokenizer_for(const TowerConfig& t) { return Tokenizer(t.term_vocab); }

train::TextStore make_store(const std::vector<corpus::Document>& docs,
                            const std::vector<corpus::Query>& train_q,
                            const std::vector<corpus::Query>& eval_q) {
    return train::TextStore::build(docs, {&train_q, &eval_q});
}

}  // namespace

void stage_train(const PipelineConfig& cfg) {
    const auto art = Artifacts::in(cfg.out_dir);
    const auto docs = corpus::load_documents(art.corpus);
    const auto queries = corpus::load_queries(art.queries);
    const auto triplets = corpus::load_triplets(art.triplets);
    const auto texts = train::TextStore::build(docs, {&queries});

    train::TrainConfig tc = cfg.train;
    tc.seed = derive_seed(cfg.seed, 30);
    const Tokenizer tok = tokenizer_for(tc.doc_tower);
    const auto res = train::train_stage1(triplets, texts, tc, tok);
    save_tower(res.doc_tower, art.doc_tower);
    save_tower(res.query_tower, art.query_tower);
    train::save_curve(res.curve, art.stage1_curve);
}

void stage_distill(const PipelineConfig& cfg) {
    const auto art = Artifacts::in(cfg.out_dir);
    const auto teacher = load_tower(art.query_tower);
    const auto queries = corpus::load_queries(art.queries);

    qkd::DistillConfig dc = cfg.distill;
    dc.seed = derive_seed(cfg.seed, 31);
    TowerParams student = make_tower(dc.student);
    init_params(student, derive_seed(cfg.seed, 32));

    const Tokenizer teacher_tok(teacher.cfg.term_vocab);
    const Tokenizer student_tok(dc.student.term_vocab);
    const auto res = qkd::distill(queries, teacher, student, dc, teacher_tok,
                                  student_tok);
    save_tower(res.student, art.student);

    std::ostringstream out;
    out << "step,loss\n";
    out.precision(17);
    for (const auto& [step, loss] : res.curve) out << step << ',' << loss << '\n';
    write_file(art.distill_curve, out.str());
}

void stage_build_index(const PipelineConfig& cfg) {
    const auto art = Artifacts::in(cfg.out_dir);
    const auto docs = corpus::load_documents(art.corpus);
    const auto doc_tower = load_tower(art.doc_tower);
    const Tokenizer tok(doc_tower.cfg.term_vocab);
    const std::size_t dim = doc_tower.cfg.dim;

    // The serving embedding is the [EMB]-type document embedding, unit
    // normalized so L2 search realizes cosine ranking.
    std::vector<double> rows(docs.size() * dim);
    std::vector<std::int64_t> ids(docs.size());
    parallel_for(docs.size(), [&](std::size_t i) {
        const auto emb = embed_document(doc_tower, tok, docs[i]).emb;
        const double nrm = norm(emb.vec.data(), dim);
        if (!(nrm > 0.0)) throw DegenerateEmbedding("zero doc embedding");
        for (std::size_t j = 0; j < dim; ++j) rows[i * dim + j] = emb.vec[j] / nrm;
        ids[i] = docs[i].id;
    });

    ann::EmbeddingTable table;
    table.count = static_cast<std::uint32_t>(docs.size());
    table.dim = static_cast<std::uint32_t>(dim);
    table.ids = ids;
    table.rows.assign(rows.begin(), rows.end());
    ann::save_table(table, art.table);

    // Build from the same f32 values the table stores.
    std::vector<double> rows_f32(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        rows_f32[i] = static_cast<double>(table.rows[i]);
    const auto index =
        ann::build_ivfpq(rows_f32, ids, cfg.index, derive_seed(cfg.seed, 33));
    ann::save_index(index, art.index);
}

json stage_eval(const PipelineConfig& cfg) {
    const auto art = Artifacts::in(cfg.out_dir);
    const auto docs = corpus::load_documents(art.corpus);
    const auto train_q = corpus::load_queries(art.queries);
    const auto eval_q = corpus::load_queries(art.eval_queries);
    const auto truth_all = corpus::load_truth(art.truth);
    const auto val_triplets = corpus::load_triplets(art.val_triplets);
    const auto doc_tower = load_tower(art.doc_tower);
    const auto query_tower = load_tower(art.query_tower);
    const auto student = load_tower(art.student);
    const auto table = ann::load_table(art.table);
    const auto index = ann::load_index(art.index);

    const Tokenizer tok(query_tower.cfg.term_vocab);
    const Tokenizer student_tok(student.cfg.term_vocab);
    const std::size_t dim = query_tower.cfg.dim;
    const int max_k = *std::max_element(cfg.eval.ks.begin(), cfg.eval.ks.end());

    metrics::Truth truth_eval;
    for (const auto& q : eval_q) truth_eval[q.id] = truth_all.at(q.id);

    // Teacher / student query embeddings (normalized like the doc table).
    std::vector<std::vector<double>> q_teacher(eval_q.size()), q_student(eval_q.size());
    parallel_for(eval_q.size(), [&](std::size_t i) {
        auto t = embed_query(query_tower, tok, eval_q[i].text,
                             QueryRenderMode::TeacherEos).vec;
        auto s = embed_query(student, student_tok, eval_q[i].text,
                             QueryRenderMode::StudentCls).vec;
        const double nt = norm(t.data(), dim), ns = norm(s.data(), dim);
        for (auto& v : t) v /= nt;
        for (auto& v : s) v /= ns;
        q_teacher[i] = std::move(t);
        q_student[i] = std::move(s);
    });

    metrics::Rankings teacher_exact, student_exact, student_index, teacher_index;
    double overlap10 = 0.0, rel_dist = 0.0;
    for (std::size_t i = 0; i < eval_q.size(); ++i) {
        const auto te = ann::exact_search_table(table, q_teacher[i].data(), max_k);
        const auto se = ann::exact_search_table(table, q_student[i].data(), max_k);
        const auto si = ann::search(index, q_student[i].data(), cfg.eval.nprobe, max_k);
        const auto ti = ann::search(index, q_teacher[i].data(), cfg.eval.nprobe, max_k);
        auto ids_of = [](const std::vector<ann::SearchHit>& hits) {
            std::vector<std::int64_t> ids;
            ids.reserve(hits.size());
            for (const auto& h : hits) ids.push_back(h.id);
            return ids;
        };
        teacher_exact[eval_q[i].id] = ids_of(te);
        student_exact[eval_q[i].id] = ids_of(se);
        student_index[eval_q[i].id] = ids_of(si);
        teacher_index[eval_q[i].id] = ids_of(ti);

        std::set<std::int64_t> top_t(teacher_index[eval_q[i].id].begin(),
                                     teacher_index[eval_q[i].id].begin() +
                                         std::min<std::ptrdiff_t>(10, static_cast<std::ptrdiff_t>(ti.size())));
        int inter = 0;
        for (std::size_t r = 0; r < si.size() && r < 10; ++r)
            if (top_t.count(si[r].id)) ++inter;
        overlap10 += static_cast<double>(inter) / 10.0;

        std::vector<double> diff(dim);
        for (std::size_t j = 0; j < dim; ++j)
            diff[j] = q_student[i][j] - q_teacher[i][j];
        rel_dist += norm(diff.data(), dim);  // embeddings are unit norm
    }
    overlap10 /= static_cast<double>(eval_q.size());
    rel_dist /= static_cast<double>(eval_q.size());

    const auto rep_teacher = metrics::recall_at_k(teacher_exact, truth_eval, cfg.eval.ks);
    const auto rep_student = metrics::recall_at_k(student_exact, truth_eval, cfg.eval.ks);
    const auto rep_index = metrics::recall_at_k(student_index, truth_eval, cfg.eval.ks);

    // Per-MRL-dim recall@100 for the teacher, exact prefix-cosine scan.
    json mrl_recall = json::object();
    for (int m : cfg.train.mrl_dims) {
        metrics::Rankings rk;
        for (std::size_t i = 0; i < eval_q.size(); ++i) {
            std::vector<std::pair<double, std::int64_t>> scored(table.count);
            parallel_for(table.count, [&](std::size_t r) {
                const auto row = table.row_f64(r);
                scored[r] = {-cosine_prefix(q_teacher[i].data(), row.data(),
                                            static_cast<std::size_t>(m)),
                             table.ids[r]};
            });
            const std::size_t keep = std::min<std::size_t>(100, scored.size());
            std::partial_sort(scored.begin(),
                              scored.begin() + static_cast<std::ptrdiff_t>(keep),
                              scored.end());
            auto& ids = rk[eval_q[i].id];
            for (std::size_t r = 0; r < keep; ++r) ids.push_back(scored[r].second);
        }
        const auto rep = metrics::recall_at_k(rk, truth_eval, {100});
        mrl_recall[std::to_string(m)] = rep.recall.at(100);
    }

    // AUC over the labeled pairs, scored by the deployed (student) encoder.
    json auc_json = json::object();
    {
        std::unordered_map<std::int64_t, std::size_t> row_of;
        for (std::size_t r = 0; r < table.ids.size(); ++r) row_of[table.ids[r]] = r;
        std::unordered_map<std::int64_t, std::size_t> eq_of;
        for (std::size_t i = 0; i < eval_q.size(); ++i) eq_of[eval_q[i].id] = i;

        std::vector<int> sat, rel;
        std::vector<double> score_stu, score_tea;
        std::istringstream in(read_file(art.auc_pairs));
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const json row = json::parse(line);
            const auto qi = eq_of.at(row.at("query_id").get<std::int64_t>());
            const auto dr = row_of.at(row.at("doc_id").get<std::int64_t>());
            const auto drow = table.row_f64(dr);
            sat.push_back(row.at("label_sat").get<int>());
            rel.push_back(row.at("label_rel").get<int>());
            score_stu.push_back(dot(q_student[qi].data(), drow.data(), dim));
            score_tea.push_back(dot(q_teacher[qi].data(), drow.data(), dim));
        }
        auc_json["sat_student"] = metrics::auc(sat, score_stu);
        auc_json["rel_student"] = metrics::auc(rel, score_stu);
        auc_json["sat_teacher"] = metrics::auc(sat, score_tea);
        auc_json["rel_teacher"] = metrics::auc(rel, score_tea);
    }

    // Contrastive entropy on validation triplets, trained vs untrained.
    const auto texts = make_store(docs, train_q, eval_q);
    const int full_dim = cfg.train.mrl_dims.back();
    const double entropy_trained = metrics::contrastive_entropy(
        doc_tower, query_tower, tok, val_triplets, texts, cfg.eval.tau, full_dim,
        cfg.eval.entropy_pool);
    TowerParams doc0 = make_tower(cfg.train.doc_tower);
    TowerParams query0 = make_tower(cfg.train.query_tower);
    const std::uint64_t train_seed = derive_seed(cfg.seed, 30);
    init_params(doc0, derive_seed(train_seed, 11));
    init_params(query0, derive_seed(train_seed, 12));
    const double entropy_untrained = metrics::contrastive_entropy(
        doc0, query0, tok, val_triplets, texts, cfg.eval.tau, full_dim,
        cfg.eval.entropy_pool);

    auto recall_json = [&](const metrics::RecallReport& rep) {
        json j = json::object();
        for (const auto& [k, v] : rep.recall) j[std::to_string(k)] = v;
        return j;
    };

    json report{{"n_eval_queries", eval_q.size()},
                {"recall_teacher_exact", recall_json(rep_teacher)},
                {"recall_student_exact", recall_json(rep_student)},
                {"recall_student_index", recall_json(rep_index)},
                {"mrl_recall_at_100", mrl_recall},
                {"teacher_student_overlap_at_10", overlap10},
                {"mean_query_embedding_distance", rel_dist},
                {"auc", auc_json},
                {"contrastive_entropy_trained", entropy_trained},
                {"contrastive_entropy_untrained", entropy_untrained}};
    write_file(art.eval_report, report.dump(2) + "\n");
    return report;
}

// ---------------------------------------------------------------------------
// Manifest and the runner.
// ---------------------------------------------------------------------------

json build_manifest(const PipelineConfig& cfg) {
    const auto art = Artifacts::in(cfg.out_dir);
    json artifacts = json::object();
    for (const auto& path : art.all()) {
        if (!file_exists(path)) continue;
        artifacts[fs::path(path).filename().string()] = sha256_file(path);
    }
    return json{{"seed", cfg.seed}, {"artifacts", artifacts}};
}

void run_pipeline(const PipelineConfig& cfg, Stage from, std::ostream* log) {
    const auto art = Artifacts::in(cfg.out_dir);
    fs::create_directories(cfg.out_dir);

    struct StageDef {
        Stage stage;
        std::function<void()> run;
    };
    const std::vector<StageDef> stages = {
        {Stage::GenData, [&] { stage_gen_data(cfg); }},
        {Stage::TrainStage1, [&] { stage_train(cfg); }},
        {Stage::Distill, [&] { stage_distill(cfg); }},
        {Stage::BuildIndex, [&] { stage_build_index(cfg); }},
        {Stage::Eval, [&] { stage_eval(cfg); }},
    };

    for (const auto& s : stages) {
        if (static_cast<int>(s.stage) < static_cast<int>(from)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            s.run();
        } catch (const std::exception& e) {
            throw Error(std::string("stage ") + to_string(s.stage) +
                        " failed: " + e.what());
        }
        if (log) {
            const double secs =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                    .count();
            (*log) << "[densenote] " << to_string(s.stage) << " done in " << secs
                   << "s\n";
            log->flush();
        }
    }
    write_file(art.manifest, build_manifest(cfg).dump(2) + "\n");
}

}  // namespace densenote::pipeline
