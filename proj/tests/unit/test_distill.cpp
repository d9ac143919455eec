#include <doctest.h>

#include <cmath>

#include "densenote/distill.hpp"
#include "helpers.hpp"

using namespace densenote;
using namespace densenote::qkd;
using testutil::tiny_tower;

namespace {

std::vector<corpus::Query> micro_queries(int n, std::uint64_t seed = 3) {
    Rng rng(seed);
    std::vector<corpus::Query> qs;
    for (int i = 0; i < n; ++i) {
        qs.push_back({i + 1, "w" + std::to_string(rng.below(50)) + " w" +
                                 std::to_string(rng.below(50)) + " w" +
                                 std::to_string(rng.below(50))});
    }
    return qs;
}

}  // namespace

TEST_CASE("qkd_loss: closed-form values") {
    // Perfect mimic: MSE 0, cosine 1 -> -lambda.
    std::vector<double> q{0.3, -0.2, 0.9};
    CHECK(qkd_loss(q, q, 1.0) == doctest::Approx(-1.0).epsilon(1e-12));

    // lambda = 0 and a unit offset -> pure squared error of 1.
    std::vector<double> q2{1.3, -0.2, 0.9};
    CHECK(qkd_loss(q, q2, 0.0) == doctest::Approx(1.0).epsilon(1e-12));

    // Orthogonal unit vectors with lambda = 1: ||q - s||^2 = 2, cos = 0.
    std::vector<double> a{1.0, 0.0}, b{0.0, 1.0};
    CHECK(qkd_loss(a, b, 1.0) == doctest::Approx(2.0).epsilon(1e-12));

    std::vector<double> zero{0.0, 0.0};
    CHECK_THROWS_AS(qkd_loss(a, zero, 1.0), DegenerateEmbedding);
    CHECK_THROWS_AS(qkd_loss(a, q, 1.0), ShapeError);
}

TEST_CASE("qkd_loss is bounded below by -lambda") {
    Rng rng(12);
    for (int trial = 0; trial < 500; ++trial) {
        const double lambda = rng.uniform() * 3.0;
        std::vector<double> q(6), s(6);
        for (auto& v : q) v = rng.normal();
        for (auto& v : s) v = rng.normal();
        CHECK(qkd_loss(q, s, lambda) >= -lambda - 1e-12);
    }
}

TEST_CASE("qkd_loss_grad matches finite differences") {
    Rng rng(9);
    std::vector<double> q(8), s(8);
    for (auto& v : q) v = rng.normal();
    for (auto& v : s) v = rng.normal();
    std::vector<double> grad(8, 0.0);
    qkd_loss_grad(q.data(), s.data(), 8, 1.3, grad.data());
    for (std::size_t i = 0; i < 8; ++i) {
        const double h = 1e-6;
        auto sp = s, sm = s;
        sp[i] += h;
        sm[i] -= h;
        const double fd = (qkd_loss(q, sp, 1.3) - qkd_loss(q, sm, 1.3)) / (2 * h);
        CHECK(grad[i] == doctest::Approx(fd).epsilon(1e-5));
    }
}

TEST_CASE("student gradient through the tower matches finite differences") {
    const auto queries = micro_queries(3);
    auto teacher_cfg = tiny_tower(1, 16, 2, 8);
    auto teacher = make_tower(teacher_cfg);
    init_params(teacher, 51);
    Tokenizer tok(teacher_cfg.term_vocab);

    DistillConfig cfg;
    cfg.student = tiny_tower(1, 12, 2, 8, /*bidirectional=*/true);
    cfg.lambda = 1.0;
    auto student = make_tower(cfg.student);
    init_params(student, 52);
    Tokenizer stok(cfg.student.term_vocab);

    std::vector<std::vector<double>> tembs;
    for (const auto& q : queries)
        tembs.push_back(embed_query(teacher, tok, q.text,
                                    QueryRenderMode::TeacherEos).vec);

    std::vector<double> grad(student.size(), 0.0);
    qkd_batch_loss_and_grad(queries, tembs, student, cfg, stok, &grad);

    auto loss_of = [&](const TowerParams& p) {
        return qkd_batch_loss_and_grad(queries, tembs, p, cfg, stok, nullptr);
    };
    const auto stats = testutil::fd_check_blocks(student, grad, loss_of, 4, 53);
    CHECK(stats.checked > 30);
    CHECK(stats.max_rel_err < 1e-4);
}

TEST_CASE("distill: teacher-copy student starts at exactly -lambda") {
    const auto queries = micro_queries(6);
    auto cfg_t = tiny_tower(1, 16, 2, 8);
    auto teacher = make_tower(cfg_t);
    init_params(teacher, 61);
    Tokenizer tok(cfg_t.term_vocab);

    DistillConfig cfg;
    cfg.student = cfg_t;  // same architecture, causal
    cfg.student_mode = QueryRenderMode::TeacherEos;
    cfg.add_paraphrases = false;
    cfg.lambda = 1.0;
    cfg.epochs = 0;  // no steps; we only probe the initial loss

    std::vector<std::vector<double>> tembs;
    for (const auto& q : queries)
        tembs.push_back(embed_query(teacher, tok, q.text,
                                    QueryRenderMode::TeacherEos).vec);
    const double loss =
        qkd_batch_loss_and_grad(queries, tembs, teacher, cfg, tok, nullptr);
    CHECK(loss == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("distill: loss falls and the teacher is frozen") {
    const auto queries = micro_queries(24, 7);
    auto cfg_t = tiny_tower(1, 16, 2, 8);
    auto teacher = make_tower(cfg_t);
    init_params(teacher, 71);
    Tokenizer tok(cfg_t.term_vocab);

    DistillConfig cfg;
    cfg.student = tiny_tower(1, 12, 2, 8, true);
    cfg.batch = 12;
    cfg.epochs = 60;
    cfg.lr = 5e-3;
    cfg.seed = 5;
    auto student0 = make_tower(cfg.student);
    init_params(student0, 72);

    const auto teacher_before = teacher.data;
    Tokenizer stok(cfg.student.term_vocab);
    const auto res = qkd::distill(queries, teacher, student0, cfg, tok, stok);
    CHECK(teacher.data == teacher_before);

    REQUIRE(res.curve.size() > 20);
    CHECK(res.curve.back().second < res.curve.front().second);

    // Determinism.
    const auto res2 = qkd::distill(queries, teacher, student0, cfg, tok, stok);
    CHECK(res2.curve.back().second == res.curve.back().second);
    CHECK(res2.student.data == res.student.data);
}

TEST_CASE("make_paraphrases: deterministic, fresh ids, non-empty") {
    const auto queries = micro_queries(10, 13);
    const auto a = make_paraphrases(queries, 99, 1000);
    const auto b = make_paraphrases(queries, 99, 1000);
    REQUIRE(a.size() == b.size());
    REQUIRE(!a.empty());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].id >= 1000);
        CHECK(a[i].text == b[i].text);
        CHECK(!Tokenizer::split_terms(a[i].text).empty());
    }
}

TEST_CASE("check_bound: identical towers give lhs == 0 <= rhs") {
    std::vector<corpus::Document> docs;
    for (int i = 1; i <= 6; ++i) docs.push_back(testutil::tiny_doc(i, std::to_string(i)));
    auto queries = micro_queries(3);
    train::TextStore texts = train::TextStore::build(docs, {&queries});
    std::vector<corpus::TrainingTriplet> sample{
        {1, 1, 2, corpus::TripletSource::RelOneHop},
        {2, 3, 4, corpus::TripletSource::RelOneHop},
        {3, 5, 6, corpus::TripletSource::ClickOneHop}};

    auto cfg_t = tiny_tower(1, 16, 2, 8);
    auto teacher = make_tower(cfg_t);
    init_params(teacher, 81);
    auto doc_tower = make_tower(cfg_t);
    init_params(doc_tower, 82);
    Tokenizer tok(cfg_t.term_vocab);

    const auto rep = check_bound(sample, texts, teacher, teacher, doc_tower, tok,
                                 tok, QueryRenderMode::TeacherEos);
    CHECK(rep.lhs == doctest::Approx(0.0));
    CHECK(rep.rhs == doctest::Approx(0.0));
    CHECK(rep.holds);
    CHECK(rep.n == 6);
}

TEST_CASE("check_bound: holds under random student perturbations") {
    std::vector<corpus::Document> docs;
    for (int i = 1; i <= 8; ++i) docs.push_back(testutil::tiny_doc(i, std::to_string(i * 7)));
    auto queries = micro_queries(4, 17);
    train::TextStore texts = train::TextStore::build(docs, {&queries});
    std::vector<corpus::TrainingTriplet> sample{
        {1, 1, 2, corpus::TripletSource::RelOneHop},
        {2, 3, 4, corpus::TripletSource::RelOneHop},
        {3, 5, 6, corpus::TripletSource::ClickOneHop},
        {4, 7, 8, corpus::TripletSource::ClickOneHop}};

    auto cfg_t = tiny_tower(1, 16, 2, 8);
    auto teacher = make_tower(cfg_t);
    init_params(teacher, 91);
    auto doc_tower = make_tower(cfg_t);
    init_params(doc_tower, 92);
    Tokenizer tok(cfg_t.term_vocab);

    Rng rng(93);
    for (int trial = 0; trial < 25; ++trial) {
        auto student = teacher;
        for (auto& v : student.data) v += 0.05 * rng.normal();
        const auto rep = check_bound(sample, texts, teacher, student, doc_tower,
                                     tok, tok, QueryRenderMode::TeacherEos);
        CHECK(rep.holds);
        CHECK(rep.lhs <= rep.rhs + 1e-9);
    }
}

TEST_CASE("check_bound: doubling doc norms scales both sides consistently") {
    std::vector<corpus::Document> docs;
    for (int i = 1; i <= 4; ++i) docs.push_back(testutil::tiny_doc(i, std::to_string(i)));
    auto queries = micro_queries(2, 23);
    train::TextStore texts = train::TextStore::build(docs, {&queries});
    std::vector<corpus::TrainingTriplet> sample{
        {1, 1, 2, corpus::TripletSource::RelOneHop},
        {2, 3, 4, corpus::TripletSource::RelOneHop}};

    auto cfg_t = tiny_tower(1, 16, 2, 8);
    auto teacher = make_tower(cfg_t);
    init_params(teacher, 101);
    auto student = teacher;
    Rng rng(102);
    for (auto& v : student.data) v += 0.02 * rng.normal();
    auto doc_tower = make_tower(cfg_t);
    init_params(doc_tower, 103);
    Tokenizer tok(cfg_t.term_vocab);

    const auto rep1 = check_bound(sample, texts, teacher, student, doc_tower, tok,
                                  tok, QueryRenderMode::TeacherEos);
    // Doubling the projection doubles every doc embedding.
    auto doc2 = doc_tower;
    for (std::size_t i = doc2.proj; i < doc2.size(); ++i) doc2.data[i] *= 2.0;
    const auto rep2 = check_bound(sample, texts, teacher, student, doc2, tok, tok,
                                  QueryRenderMode::TeacherEos);
    CHECK(rep1.holds);
    CHECK(rep2.holds);
    // Doc norms dominate K here, so the rhs doubles with them.
    if (rep1.k_norm > 0.0 && rep2.k_norm == doctest::Approx(2.0 * rep1.k_norm)) {
        CHECK(rep2.rhs == doctest::Approx(2.0 * rep1.rhs).epsilon(1e-9));
    }
}
