#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <set>

#include "densenote/prompt.hpp"
#include "densenote/tower.hpp"
#include "helpers.hpp"

using namespace densenote;
using testutil::tiny_tower;

TEST_CASE("tokenizer: specials are distinct and outside the term range") {
    Tokenizer tok(1000);
    std::set<TokenId> ids;
    for (int s = 0; s < kNumSpecials; ++s) {
        const TokenId id = tok.special(static_cast<Special>(s));
        CHECK(id >= tok.term_vocab());
        CHECK(id < tok.vocab_total());
        ids.insert(id);
    }
    CHECK(ids.size() == kNumSpecials);
    CHECK(tok.term_id("hello") < tok.term_vocab());
    CHECK(tok.encode_terms("Hello WORLD") == tok.encode_terms("hello world"));
}

TEST_CASE("render_document_prompt: three increasing positions") {
    Tokenizer tok(1000);
    const auto d = testutil::tiny_doc(7);
    const auto p = render_document_prompt(d, tok, 128);
    REQUIRE(p.positions.size() == 3);
    CHECK(p.positions[0] < p.positions[1]);
    CHECK(p.positions[1] < p.positions[2]);
    CHECK(p.positions.back() < p.tokens.size());
    // Each recorded position immediately precedes its placeholder.
    CHECK(p.tokens[p.positions[0] + 1] == tok.special(Special::TitleQuery));
    CHECK(p.tokens[p.positions[1] + 1] == tok.special(Special::ContentQuery));
    CHECK(p.tokens[p.positions[2] + 1] == tok.special(Special::Emb));
    CHECK(p.positions[2] + 2 == p.tokens.size());
}

TEST_CASE("render_document_prompt: truncation trims content only") {
    Tokenizer tok(1000);
    corpus::Document d{1, "alpha beta", "gamma", ""};
    for (int i = 0; i < 400; ++i) d.content += "word" + std::to_string(i) + " ";
    const std::size_t max_len = 40;
    const auto p = render_document_prompt(d, tok, max_len);
    CHECK(p.tokens.size() == max_len);
    CHECK(p.tokens[p.positions[0] + 1] == tok.special(Special::TitleQuery));
    CHECK(p.tokens[p.positions[1] + 1] == tok.special(Special::ContentQuery));
    CHECK(p.tokens[p.positions[2] + 1] == tok.special(Special::Emb));

    // Skeleton too large to fit.
    CHECK_THROWS_AS(render_document_prompt(d, tok, 10), PromptOverflow);
}

TEST_CASE("render_document_prompt: empty field is rejected") {
    Tokenizer tok(1000);
    corpus::Document d{1, "alpha", "", "content"};
    CHECK_THROWS_AS(render_document_prompt(d, tok, 64), DomainError);
}

TEST_CASE("render_query: teacher and student forms") {
    Tokenizer tok(1000);
    const corpus::Query q{1, "abc"};
    const auto teacher = render_query(q, tok, QueryRenderMode::TeacherEos);
    REQUIRE(teacher.tokens.size() == 2);
    CHECK(teacher.tokens[1] == tok.special(Special::Eos));
    CHECK(teacher.positions == std::vector<std::size_t>{1});

    const auto student = render_query(q, tok, QueryRenderMode::StudentCls);
    REQUIRE(student.tokens.size() == 2);
    CHECK(student.tokens[0] == tok.special(Special::Cls));
    CHECK(student.positions == std::vector<std::size_t>{0});

    const auto again = render_query(q, tok, QueryRenderMode::TeacherEos);
    CHECK(again.tokens == teacher.tokens);

    CHECK_THROWS_AS(render_query({2, "   "}, tok, QueryRenderMode::TeacherEos),
                    EmptyQuery);
}

TEST_CASE("forward: output shape and token range checks") {
    auto p = make_tower(tiny_tower(1, 32, 4, 8));
    init_params(p, 42);
    const std::vector<TokenId> seq{1, 2, 3, 4, 5};
    const auto h = tower_forward(p, seq);
    CHECK(h.size() == seq.size() * p.cfg.hidden);
    for (double v : h) CHECK(std::isfinite(v));

    CHECK_THROWS_AS(tower_forward(p, {p.cfg.vocab_total()}), TokenRangeError);
    CHECK_THROWS_AS(tower_forward(p, std::vector<TokenId>(p.cfg.max_seq + 1, 1)),
                    ShapeError);
}

TEST_CASE("forward: causality over 100 random perturbations") {
    auto p = make_tower(tiny_tower(2, 16, 2, 8));
    init_params(p, 7);
    Rng rng(99);
    const std::size_t len = 12;
    std::vector<TokenId> base(len);
    for (auto& t : base) t = static_cast<TokenId>(rng.below(p.cfg.term_vocab));
    const auto h0 = tower_forward(p, base);

    for (int trial = 0; trial < 100; ++trial) {
        auto seq = base;
        const std::size_t j = 1 + rng.below(len - 1);
        seq[j] = static_cast<TokenId>(rng.below(p.cfg.term_vocab));
        const auto h1 = tower_forward(p, seq);
        for (std::size_t t = 0; t < j; ++t) {
            for (std::size_t i = 0; i < p.cfg.hidden; ++i) {
                REQUIRE(h0[t * p.cfg.hidden + i] == h1[t * p.cfg.hidden + i]);
            }
        }
    }
}

TEST_CASE("forward: bidirectional mode sees later tokens") {
    auto cfg = tiny_tower(1, 16, 2, 8, /*bidirectional=*/true);
    auto p = make_tower(cfg);
    init_params(p, 3);
    const std::vector<TokenId> a{5, 6, 7};
    const std::vector<TokenId> b{5, 6, 9};
    const auto ha = tower_forward(p, a);
    const auto hb = tower_forward(p, b);
    double diff = 0.0;
    for (std::size_t i = 0; i < cfg.hidden; ++i)
        diff += std::abs(ha[i] - hb[i]);  // position 0 differs
    CHECK(diff > 0.0);
}

TEST_CASE("forward: determinism under fixed seed") {
    auto p1 = make_tower(tiny_tower());
    auto p2 = make_tower(tiny_tower());
    init_params(p1, 1234);
    init_params(p2, 1234);
    REQUIRE(p1.data == p2.data);
    const std::vector<TokenId> seq{3, 1, 4, 1, 5};
    CHECK(tower_forward(p1, seq) == tower_forward(p2, seq));
}

TEST_CASE("tower gradient matches central finite differences") {
    // Scalar head: nonlinear probe of the hidden states, checked per block.
    for (std::uint64_t seed : {11ULL, 12ULL, 13ULL}) {
        auto cfg = tiny_tower(2, 16, 2, 8);
        auto p = make_tower(cfg);
        init_params(p, seed);
        Rng rng(seed * 31 + 1);
        const std::size_t len = 9;
        std::vector<TokenId> seq(len);
        for (auto& t : seq) t = static_cast<TokenId>(rng.below(cfg.term_vocab));
        std::vector<double> probe(len * cfg.hidden);
        for (auto& v : probe) v = rng.normal();

        auto loss_of = [&](const TowerParams& params) {
            const auto h = tower_forward(params, seq);
            double s = 0.0;
            for (std::size_t i = 0; i < h.size(); ++i)
                s += std::tanh(h[i]) * probe[i];
            return s;
        };

        Activations acts;
        const auto h = tower_forward(p, seq, &acts);
        std::vector<double> d_hidden(h.size());
        for (std::size_t i = 0; i < h.size(); ++i) {
            const double t = std::tanh(h[i]);
            d_hidden[i] = (1.0 - t * t) * probe[i];
        }
        std::vector<double> grad(p.size(), 0.0);
        tower_backward(p, seq, acts, d_hidden, grad);

        const auto stats = testutil::fd_check_blocks(p, grad, loss_of, 4, seed + 5);
        CHECK(stats.checked > 50);
        CHECK(stats.max_rel_err < 1e-4);
    }
}

TEST_CASE("extract_embed and truncate") {
    auto cfg = tiny_tower(1, 16, 2, 16);
    auto p = make_tower(cfg);
    init_params(p, 5);
    Tokenizer tok(cfg.term_vocab);

    const auto d = testutil::tiny_doc(1);
    const auto prompt = render_document_prompt(d, tok, cfg.max_seq);
    const auto hidden = tower_forward(p, prompt.tokens);
    const auto mrl = mrl_dims_for(16, 4);  // {4, 8, 16}
    auto recs = extract_embed(hidden, cfg.hidden, prompt, p.ptr(p.proj), cfg.dim, mrl);
    REQUIRE(recs.size() == 3);
    for (const auto& r : recs) CHECK(r.vec.size() == cfg.dim);

    // Identity projection returns the raw hidden row.
    TowerParams ident = p;
    std::fill(ident.ptr(ident.proj), ident.ptr(ident.proj) + cfg.dim * cfg.hidden, 0.0);
    for (std::size_t i = 0; i < cfg.dim; ++i)
        ident.ptr(ident.proj)[i * cfg.hidden + i] = 1.0;
    auto recs_i = extract_embed(hidden, cfg.hidden, prompt, ident.ptr(ident.proj),
                                cfg.dim, mrl);
    for (std::size_t i = 0; i < cfg.dim; ++i)
        CHECK(recs_i[0].vec[i] == hidden[prompt.positions[0] * cfg.hidden + i]);

    // Query prompts carry exactly one record.
    const auto qp = render_query({1, "abc def"}, tok, QueryRenderMode::TeacherEos);
    const auto qh = tower_forward(p, qp.tokens);
    CHECK(extract_embed(qh, cfg.hidden, qp, p.ptr(p.proj), cfg.dim, mrl).size() == 1);

    // Truncation semantics.
    const auto& e = recs[0];
    CHECK(truncate(e, 16) == e.vec);
    const auto t4 = truncate(e, 4);
    CHECK(t4.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) CHECK(t4[i] == e.vec[i]);
    // Prefix nesting.
    EmbeddingRecord half{truncate(e, 8), {4, 8}};
    CHECK(truncate(half, 4) == t4);
    CHECK_THROWS_AS(truncate(e, 5), MrlDimError);
}

TEST_CASE("mrl_dims_for matches the doubling ladder") {
    CHECK(mrl_dims_for(128, 16) == std::vector<int>{16, 32, 64, 128});
    CHECK(mrl_dims_for(8, 8) == std::vector<int>{8});
}

TEST_CASE("checkpoint round trip is bit exact") {
    auto cfg = tiny_tower(2, 16, 2, 8, true);
    auto p = make_tower(cfg);
    init_params(p, 77);
    const std::string path = "/tmp/densenote_test_tower.dnt";
    save_tower(p, path);
    const auto q = load_tower(path);
    CHECK(q.cfg.layers == cfg.layers);
    CHECK(q.cfg.bidirectional == cfg.bidirectional);
    CHECK(q.data == p.data);
    std::remove(path.c_str());
}
