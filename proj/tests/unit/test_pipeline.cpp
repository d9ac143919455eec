#include <doctest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <nlohmann/json.hpp>

#include "densenote/pipeline.hpp"
#include "densenote/serve.hpp"

using namespace densenote;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// A pipeline configuration small enough for unit testing.
pipeline::PipelineConfig micro_pipeline(const std::string& dir, std::uint64_t seed) {
    pipeline::PipelineConfig cfg = pipeline::default_config();
    cfg.seed = seed;
    cfg.out_dir = dir;
    cfg.data.docs = 120;
    cfg.data.queries = 50;
    cfg.data.eval_queries = 12;
    cfg.data.vocab = 260;
    cfg.data.t_filter = 40;
    cfg.train.doc_tower = {1, 2, 16, 16, 500, 96, false};
    cfg.train.query_tower = {1, 2, 16, 16, 500, 96, false};
    cfg.train.mrl_dims = {4, 8, 16};
    cfg.train.k_workers = 2;
    cfg.train.b_per_worker = 8;
    cfg.train.epochs = 1;
    cfg.distill.student = {1, 2, 12, 16, 500, 96, true};
    cfg.distill.epochs = 2;
    cfg.distill.batch = 16;
    cfg.index.nlist = 8;
    cfg.index.m_sub = 4;
    cfg.index.nbits = 6;
    cfg.index.rq_layers = 3;
    cfg.index.rq_k = 8;
    cfg.index.kmeans_iters = 5;
    cfg.eval.ks = {10, 50, 100};
    cfg.eval.nprobe = 4;
    cfg.eval.entropy_pool = 24;
    return cfg;
}

std::string talk(int fd, const std::string& line) {
    const std::string msg = line + "\n";
    REQUIRE(::send(fd, msg.data(), msg.size(), 0) ==
            static_cast<ssize_t>(msg.size()));
    std::string buf;
    char chunk[4096];
    while (buf.find('\n') == std::string::npos) {
        const ssize_t n = ::recv(fd, chunk, sizeof(chunk), 0);
        REQUIRE(n > 0);
        buf.append(chunk, static_cast<std::size_t>(n));
    }
    return buf.substr(0, buf.find('\n'));
}

int connect_to(int port) {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    REQUIRE(fd >= 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<std::uint16_t>(port));
    ::inet_pton(AF_INET, "127.0.0.1", &addr.sin_addr);
    REQUIRE(::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0);
    return fd;
}

}  // namespace

TEST_CASE("config round trips through JSON with defaults") {
    const auto def = pipeline::default_config();
    const auto back = pipeline::config_from_json(pipeline::config_to_json(def));
    CHECK(back.seed == def.seed);
    CHECK(back.data.docs == def.data.docs);
    CHECK(back.train.tau == def.train.tau);
    CHECK(back.train.doc_tower.hidden == def.train.doc_tower.hidden);
    CHECK(back.distill.student.bidirectional == def.distill.student.bidirectional);
    CHECK(back.index.nlist == def.index.nlist);

    // Partial JSON keeps defaults elsewhere.
    const auto partial = pipeline::config_from_json(
        json{{"train", {{"tau", 0.07}}}, {"data", {{"docs", 500}}}});
    CHECK(partial.train.tau == 0.07);
    CHECK(partial.data.docs == 500);
    CHECK(partial.train.margin == def.train.margin);
}

TEST_CASE("pipeline: deterministic manifests and stage isolation") {
    const std::string dir_a = "/tmp/densenote_pipe_a";
    const std::string dir_b = "/tmp/densenote_pipe_b";
    fs::remove_all(dir_a);
    fs::remove_all(dir_b);

    const auto cfg_a = micro_pipeline(dir_a, 7);
    const auto cfg_b = micro_pipeline(dir_b, 7);
    pipeline::run_pipeline(cfg_a);
    pipeline::run_pipeline(cfg_b);

    auto manifest = [](const std::string& dir) {
        return json::parse(read_file(pipeline::Artifacts::in(dir).manifest));
    };
    const auto ma = manifest(dir_a);
    CHECK(ma.at("artifacts") == manifest(dir_b).at("artifacts"));

    // Rerun in place: identical manifest.
    pipeline::run_pipeline(cfg_a);
    CHECK(manifest(dir_a).at("artifacts") == ma.at("artifacts"));

    // Stage isolation: drop the index and rebuild only from build-index.
    const auto art = pipeline::Artifacts::in(dir_a);
    const std::string index_bytes = read_file(art.index);
    fs::remove(art.index);
    pipeline::run_pipeline(cfg_a, pipeline::Stage::BuildIndex);
    CHECK(read_file(art.index) == index_bytes);
    CHECK(manifest(dir_a).at("artifacts") == ma.at("artifacts"));

    // The eval report carries the expected fields.
    const auto report = json::parse(read_file(art.eval_report));
    CHECK(report.contains("recall_teacher_exact"));
    CHECK(report.contains("contrastive_entropy_trained"));
    CHECK(report.at("n_eval_queries").get<int>() == 12);

    fs::remove_all(dir_b);
}

TEST_CASE("serve: responses, clamps, malformed input, and statelessness") {
    // Reuses the artifacts produced by the pipeline test when present.
    const std::string dir = "/tmp/densenote_pipe_a";
    const auto art = pipeline::Artifacts::in(dir);
    if (!file_exists(art.index)) {
        pipeline::run_pipeline(micro_pipeline(dir, 7));
    }
    serve::ServerConfig scfg;
    scfg.port = 0;
    scfg.default_nprobe = 4;
    serve::Server server(ann::load_index(art.index), load_tower(art.student), scfg);
    server.start();
    REQUIRE(server.port() > 0);

    const int fd = connect_to(server.port());
    const auto queries = corpus::load_queries(art.eval_queries);

    // Identical requests get identical responses (no hidden state), and the
    // response carries ids, scores, and a latency.
    const std::string req =
        json{{"query", queries[0].text}, {"topk", 5}, {"nprobe", 4}}.dump();
    const auto r1 = json::parse(talk(fd, req));
    const auto r2 = json::parse(talk(fd, req));
    REQUIRE(r1.contains("ids"));
    CHECK(r1.at("ids") == r2.at("ids"));
    CHECK(r1.at("scores") == r2.at("scores"));
    CHECK(r1.at("ids").size() == 5);
    CHECK(r1.contains("latency_us"));

    // topk = 0 clamps to an empty result.
    const auto r0 = json::parse(talk(fd, json{{"query", "abc"}, {"topk", 0}}.dump()));
    CHECK(r0.at("ids").empty());

    // Malformed requests produce an error and keep the connection alive.
    const auto bad = json::parse(talk(fd, "{nope"));
    CHECK(bad.contains("error"));
    const auto missing = json::parse(talk(fd, "{\"topk\": 3}"));
    CHECK(missing.contains("error"));
    const auto after = json::parse(talk(fd, req));
    CHECK(after.at("ids") == r1.at("ids"));

    // A second concurrent connection works.
    const int fd2 = connect_to(server.port());
    const auto other = json::parse(talk(fd2, req));
    CHECK(other.at("ids") == r1.at("ids"));
    ::close(fd2);
    ::close(fd);

    CHECK(server.requests_served() == 5);  // error replies are not counted
    server.stop();
}

TEST_CASE("manifest hash flips when any artifact byte changes") {
    const std::string dir = "/tmp/densenote_pipe_a";
    const auto art = pipeline::Artifacts::in(dir);
    if (!file_exists(art.index)) {
        pipeline::run_pipeline(micro_pipeline(dir, 7));
    }
    const auto cfg = micro_pipeline(dir, 7);
    const auto before = pipeline::build_manifest(cfg);
    std::string bytes = read_file(art.triplets);
    bytes[bytes.size() / 2] ^= 0x1;
    write_file(art.triplets, bytes);
    const auto after = pipeline::build_manifest(cfg);
    CHECK(before.at("artifacts") != after.at("artifacts"));
    CHECK(before.at("artifacts").at("index.dnix") ==
          after.at("artifacts").at("index.dnix"));
    fs::remove_all(dir);
}
