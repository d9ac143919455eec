// densenote CLI: data generation, two-stage training, distillation, index
// construction, evaluation, scaling-law fitting, and the serve loop.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <csignal>
#include <iostream>
#include <sstream>

#include "densenote/ann.hpp"
#include "densenote/corpus.hpp"
#include "densenote/distill.hpp"
#include "densenote/metrics.hpp"
#include "densenote/pipeline.hpp"
#include "densenote/scaling.hpp"
#include "densenote/serve.hpp"
#include "densenote/tower.hpp"
#include "densenote/train.hpp"

using nlohmann::json;
using namespace densenote;

namespace {

pipeline::PipelineConfig load_or_default(const std::string& config_path,
                                         const std::string& out_dir,
                                         std::uint64_t seed_flag) {
    pipeline::PipelineConfig cfg = config_path.empty()
                                       ? pipeline::config_from_json(json::object())
                                       : pipeline::load_config(config_path);
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (seed_flag != 0) cfg.seed = seed_flag;
    return cfg;
}

std::vector<corpus::Query> load_query_union(const std::string& dir) {
    const auto art = pipeline::Artifacts::in(dir);
    auto qs = corpus::load_queries(art.queries);
    if (file_exists(art.eval_queries)) {
        const auto extra = corpus::load_queries(art.eval_queries);
        qs.insert(qs.end(), extra.begin(), extra.end());
    }
    return qs;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"densenote: two-stage dense retrieval pipeline at desk scale"};
    app.require_subcommand(1);

    // ---- gen-data ----
    struct {
        std::uint64_t seed = 1;
        int docs = 2000, queries = 1000, eval_queries = 300, vocab = 800;
        std::string out = ".";
        std::string config;
    } gen;
    auto* sc_gen = app.add_subcommand("gen-data",
                                      "Generate the synthetic corpus and triplets");
    sc_gen->add_option("--seed", gen.seed, "RNG seed");
    sc_gen->add_option("--docs", gen.docs, "number of documents");
    sc_gen->add_option("--queries", gen.queries, "number of training queries");
    sc_gen->add_option("--eval-queries", gen.eval_queries, "held-out queries");
    sc_gen->add_option("--vocab", gen.vocab, "generator vocabulary size");
    sc_gen->add_option("--out", gen.out, "output directory")->required();
    sc_gen->add_option("--config", gen.config, "pipeline config JSON");

    // ---- init-tower ----
    struct {
        std::string role = "doc";
        std::string out;
        std::uint64_t seed = 1;
        std::string config;
    } init;
    auto* sc_init = app.add_subcommand("init-tower", "Write a fresh tower checkpoint");
    sc_init->add_option("--role", init.role, "doc | query | student")
        ->check(CLI::IsMember({"doc", "query", "student"}));
    sc_init->add_option("--out", init.out, "checkpoint path")->required();
    sc_init->add_option("--seed", init.seed, "RNG seed");
    sc_init->add_option("--config", init.config, "pipeline config JSON");

    // ---- train-stage1 ----
    struct {
        std::string triplets, config, out_doc, out_query, curve;
        std::string corpus_path, queries_path;
    } tr;
    auto* sc_train = app.add_subcommand("train-stage1", "Stage-I dual-tower training");
    sc_train->add_option("--triplets", tr.triplets)->required();
    sc_train->add_option("--config", tr.config, "pipeline config JSON");
    sc_train->add_option("--corpus", tr.corpus_path, "corpus.jsonl (defaults beside triplets)");
    sc_train->add_option("--queries", tr.queries_path, "queries.jsonl (defaults beside triplets)");
    sc_train->add_option("--out-doc", tr.out_doc)->required();
    sc_train->add_option("--out-query", tr.out_query)->required();
    sc_train->add_option("--curve", tr.curve)->required();

    // ---- distill ----
    struct {
        std::string teacher, queries, config, out, curve;
    } di;
    auto* sc_distill = app.add_subcommand("distill", "Stage-II query distillation");
    sc_distill->add_option("--teacher", di.teacher)->required();
    sc_distill->add_option("--queries", di.queries)->required();
    sc_distill->add_option("--config", di.config, "pipeline config JSON");
    sc_distill->add_option("--out", di.out)->required();
    sc_distill->add_option("--curve", di.curve, "loss curve CSV");

    // ---- check-bound ----
    struct {
        std::string teacher, student, doc_tower, triplets, report;
        std::string corpus_path, queries_path;
    } cb;
    auto* sc_bound = app.add_subcommand("check-bound",
                                        "Evaluate the distillation risk bound");
    sc_bound->add_option("--teacher", cb.teacher)->required();
    sc_bound->add_option("--student", cb.student)->required();
    sc_bound->add_option("--doc-tower", cb.doc_tower)->required();
    sc_bound->add_option("--triplets", cb.triplets)->required();
    sc_bound->add_option("--corpus", cb.corpus_path);
    sc_bound->add_option("--queries", cb.queries_path);
    sc_bound->add_option("--report", cb.report)->required();

    // ---- build-index ----
    struct {
        std::string dir = ".";
        std::string config;
        std::uint64_t seed = 0;
    } bi;
    auto* sc_index = app.add_subcommand("build-index",
                                        "Encode documents and build the IVFPQ index");
    sc_index->add_option("--dir", bi.dir, "pipeline artifact directory")->required();
    sc_index->add_option("--config", bi.config, "pipeline config JSON");
    sc_index->add_option("--seed", bi.seed, "override seed");

    // ---- search ----
    struct {
        std::string index, tower, query;
        int topk = 10, nprobe = 16;
    } se;
    auto* sc_search = app.add_subcommand("search", "One-off index search");
    sc_search->add_option("--index", se.index)->required();
    sc_search->add_option("--tower", se.tower, "query encoder checkpoint")->required();
    sc_search->add_option("--query", se.query)->required();
    sc_search->add_option("--topk", se.topk);
    sc_search->add_option("--nprobe", se.nprobe);

    // ---- eval ----
    struct {
        std::string dir = ".";
        std::string config, report;
    } ev;
    auto* sc_eval = app.add_subcommand("eval", "Evaluate retrieval quality");
    sc_eval->add_option("--dir", ev.dir, "pipeline artifact directory")->required();
    sc_eval->add_option("--config", ev.config, "pipeline config JSON");
    sc_eval->add_option("--report", ev.report, "report path (defaults into --dir)");

    // ---- fit-scaling ----
    struct {
        std::string points, form = "single", out;
        double gamma = 0.0;
    } fitargs;
    auto* sc_fit = app.add_subcommand("fit-scaling", "Fit a scaling law to CSV points");
    sc_fit->add_option("--points", fitargs.points, "CSV: x,y or n,d,y")->required();
    sc_fit->add_option("--form", fitargs.form)->check(CLI::IsMember({"single", "mixed"}));
    sc_fit->add_option("--gamma", fitargs.gamma, "fix the mixed inner exponent divisor");
    sc_fit->add_option("--out", fitargs.out, "output JSON")->required();

    // ---- run-pipeline ----
    struct {
        std::string config, out, from = "gen-data";
        std::uint64_t seed = 0;
    } rp;
    auto* sc_run = app.add_subcommand("run-pipeline", "Run the full stage chain");
    sc_run->add_option("--config", rp.config, "pipeline config JSON");
    sc_run->add_option("--out", rp.out, "output directory");
    sc_run->add_option("--from", rp.from,
                       "first stage: gen-data|train-stage1|distill|build-index|eval");
    sc_run->add_option("--seed", rp.seed, "override seed");

    // ---- serve ----
    struct {
        std::string index, tower;
        std::string host = "127.0.0.1";
        int port = 7070, nprobe = 16;
    } sv;
    auto* sc_serve = app.add_subcommand("serve", "Serve NDJSON queries over TCP");
    sc_serve->add_option("--index", sv.index)->required();
    sc_serve->add_option("--tower", sv.tower, "query encoder checkpoint")->required();
    sc_serve->add_option("--host", sv.host);
    sc_serve->add_option("--port", sv.port);
    sc_serve->add_option("--nprobe", sv.nprobe, "default nprobe");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sc_gen->parsed()) {
            auto cfg = load_or_default(gen.config, gen.out, gen.seed);
            cfg.data.docs = gen.docs;
            cfg.data.queries = gen.queries;
            cfg.data.eval_queries = gen.eval_queries;
            cfg.data.vocab = gen.vocab;
            pipeline::stage_gen_data(cfg);
            std::cout << "wrote data artifacts to " << cfg.out_dir << "\n";
        } else if (sc_init->parsed()) {
            auto cfg = load_or_default(init.config, "", 0);
            TowerConfig tc = init.role == "student" ? cfg.distill.student
                             : init.role == "query" ? cfg.train.query_tower
                                                    : cfg.train.doc_tower;
            TowerParams p = make_tower(tc);
            init_params(p, derive_seed(init.seed, init.role == "doc" ? 11 : init.role == "query" ? 12 : 32));
            save_tower(p, init.out);
            std::cout << "wrote " << init.role << " tower (" << p.size()
                      << " params) to " << init.out << "\n";
        } else if (sc_train->parsed()) {
            const auto dir = std::filesystem::path(tr.triplets).parent_path().string();
            auto cfg = load_or_default(tr.config, dir.empty() ? "." : dir, 0);
            const auto art = pipeline::Artifacts::in(cfg.out_dir);
            const auto docs = corpus::load_documents(
                tr.corpus_path.empty() ? art.corpus : tr.corpus_path);
            const auto queries = corpus::load_queries(
                tr.queries_path.empty() ? art.queries : tr.queries_path);
            const auto triplets = corpus::load_triplets(tr.triplets);
            const auto texts = train::TextStore::build(docs, {&queries});
            train::TrainConfig tc = cfg.train;
            tc.seed = derive_seed(cfg.seed, 30);
            const Tokenizer tok(tc.doc_tower.term_vocab);
            const auto res = train::train_stage1(triplets, texts, tc, tok);
            save_tower(res.doc_tower, tr.out_doc);
            save_tower(res.query_tower, tr.out_query);
            train::save_curve(res.curve, tr.curve);
            std::cout << "stage-1 done; final loss "
                      << (res.curve.empty() ? 0.0 : res.curve.back().loss) << "\n";
        } else if (sc_distill->parsed()) {
            auto cfg = load_or_default(di.config, "", 0);
            const auto teacher = load_tower(di.teacher);
            const auto queries = corpus::load_queries(di.queries);
            qkd::DistillConfig dc = cfg.distill;
            dc.seed = derive_seed(cfg.seed, 31);
            TowerParams student = make_tower(dc.student);
            init_params(student, derive_seed(cfg.seed, 32));
            const Tokenizer teacher_tok(teacher.cfg.term_vocab);
            const Tokenizer student_tok(dc.student.term_vocab);
            const auto res =
                qkd::distill(queries, teacher, student, dc, teacher_tok, student_tok);
            save_tower(res.student, di.out);
            if (!di.curve.empty()) {
                std::ostringstream out;
                out << "step,loss\n";
                out.precision(17);
                for (const auto& [step, loss] : res.curve)
                    out << step << ',' << loss << '\n';
                write_file(di.curve, out.str());
            }
            std::cout << "distilled student saved to " << di.out << "\n";
        } else if (sc_bound->parsed()) {
            const auto dir =
                std::filesystem::path(cb.triplets).parent_path().string();
            const auto art = pipeline::Artifacts::in(dir.empty() ? "." : dir);
            const auto docs = corpus::load_documents(
                cb.corpus_path.empty() ? art.corpus : cb.corpus_path);
            auto queries = cb.queries_path.empty() ? load_query_union(dir)
                                                   : corpus::load_queries(cb.queries_path);
            const auto teacher = load_tower(cb.teacher);
            const auto student = load_tower(cb.student);
            const auto doc_tower = load_tower(cb.doc_tower);
            const auto triplets = corpus::load_triplets(cb.triplets);
            const auto texts = train::TextStore::build(docs, {&queries});
            const Tokenizer teacher_tok(teacher.cfg.term_vocab);
            const Tokenizer student_tok(student.cfg.term_vocab);
            const auto rep = qkd::check_bound(
                triplets, texts, teacher, student, doc_tower, teacher_tok,
                student_tok,
                student.cfg.bidirectional ? QueryRenderMode::StudentCls
                                          : QueryRenderMode::TeacherEos);
            qkd::save_bound_report(rep, cb.report);
            std::cout << "bound " << (rep.holds ? "holds" : "VIOLATED") << ": lhs="
                      << rep.lhs << " rhs=" << rep.rhs << "\n";
        } else if (sc_index->parsed()) {
            auto cfg = load_or_default(bi.config, bi.dir, bi.seed);
            pipeline::stage_build_index(cfg);
            std::cout << "index written under " << cfg.out_dir << "\n";
        } else if (sc_search->parsed()) {
            const auto index = ann::load_index(se.index);
            const auto tower = load_tower(se.tower);
            const Tokenizer tok(tower.cfg.term_vocab);
            auto emb = embed_query(tower, tok, se.query,
                                   tower.cfg.bidirectional
                                       ? QueryRenderMode::StudentCls
                                       : QueryRenderMode::TeacherEos)
                           .vec;
            const double nrm = norm(emb.data(), emb.size());
            for (auto& v : emb) v /= nrm;
            const auto hits = ann::search(index, emb.data(), se.nprobe, se.topk);
            json out = json::array();
            for (const auto& h : hits)
                out.push_back({{"id", h.id}, {"score", 1.0 - 0.5 * h.dist}});
            std::cout << out.dump(2) << "\n";
        } else if (sc_eval->parsed()) {
            auto cfg = load_or_default(ev.config, ev.dir, 0);
            const auto report = pipeline::stage_eval(cfg);
            if (!ev.report.empty()) write_file(ev.report, report.dump(2) + "\n");
            std::cout << report.dump(2) << "\n";
        } else if (sc_fit->parsed()) {
            std::istringstream in(read_file(fitargs.points));
            std::string line;
            std::vector<std::vector<double>> rows;
            while (std::getline(in, line)) {
                if (line.empty()) continue;
                std::istringstream ls(line);
                std::vector<double> row;
                std::string cell;
                while (std::getline(ls, cell, ',')) {
                    try {
                        row.push_back(std::stod(cell));
                    } catch (...) {
                        row.clear();  // header line
                        break;
                    }
                }
                if (!row.empty()) rows.push_back(std::move(row));
            }
            if (fitargs.form == "single") {
                std::vector<double> xs, ys;
                for (const auto& r : rows) {
                    if (r.size() != 2) throw ConfigError("fit-scaling: expected x,y rows");
                    xs.push_back(r[0]);
                    ys.push_back(r[1]);
                }
                const auto fit = scaling::fit_single(xs, ys);
                scaling::save_fit(fit, fitargs.out);
                std::cout << "C=" << fit.c << " alpha=" << fit.alpha
                          << " delta=" << fit.delta << " R2=" << fit.r_squared << "\n";
            } else {
                std::vector<std::array<double, 3>> pts;
                for (const auto& r : rows) {
                    if (r.size() != 3) throw ConfigError("fit-scaling: expected n,d,y rows");
                    pts.push_back({r[0], r[1], r[2]});
                }
                const auto fit = scaling::fit_mixed(pts, fitargs.gamma);
                scaling::save_fit(fit, fitargs.out);
                std::cout << "C_N=" << fit.c_n << " alpha_N=" << fit.alpha_n
                          << " gamma=" << fit.gamma << " C_D=" << fit.c_d
                          << " delta=" << fit.delta << " R2=" << fit.r_squared
                          << "\n";
            }
        } else if (sc_run->parsed()) {
            auto cfg = load_or_default(rp.config, rp.out, rp.seed);
            pipeline::run_pipeline(cfg, pipeline::stage_from_string(rp.from),
                                   &std::cout);
            std::cout << "pipeline complete; manifest at "
                      << pipeline::Artifacts::in(cfg.out_dir).manifest << "\n";
        } else if (sc_serve->parsed()) {
            serve::ServerConfig scfg;
            scfg.host = sv.host;
            scfg.port = sv.port;
            scfg.default_nprobe = sv.nprobe;
            serve::Server server(ann::load_index(sv.index), load_tower(sv.tower),
                                 scfg);
            server.start();
            std::cout << "serving on " << sv.host << ":" << server.port()
                      << " (ctrl-c to stop)\n";
            ::pause();
            server.stop();
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
