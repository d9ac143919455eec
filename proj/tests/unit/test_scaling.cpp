#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "densenote/common.hpp"
#include "densenote/scaling.hpp"

using namespace densenote;
using namespace densenote::scaling;

namespace {

std::vector<double> log_spaced(double lo, double hi, int n) {
    std::vector<double> xs(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        xs[static_cast<std::size_t>(i)] =
            std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * i / (n - 1));
    return xs;
}

}  // namespace

TEST_CASE("predict: model-size law coefficients reproduce the fit value") {
    // L(N) = (3.82e5 / N)^0.14 + 0.18 evaluated at N = 3.82e5.
    const ScalingFit fit{3.82e5, 0.14, 0.18, 0.0};
    CHECK(std::abs(predict(fit, 3.82e5) - 1.18) < 1e-9);
    CHECK_THROWS_AS(predict(fit, 0.0), DomainError);
    CHECK_THROWS_AS(predict(fit, -3.0), DomainError);
}

TEST_CASE("predict: delta is the x->infinity asymptote") {
    // Data-size law coefficients: (2.60e3 / D)^0.14 + 1.4e-7. The power term
    // still dominates at D = 1e12; the asymptote emerges much further out.
    const ScalingFit fit{2.60e3, 0.14, 1.4e-7, 0.0};
    const double at_1e12 = predict(fit, 1e12);
    CHECK(at_1e12 == doctest::Approx(std::pow(2.60e3 / 1e12, 0.14) + 1.4e-7)
                         .epsilon(1e-12));
    // True asymptote check: far enough out the power term vanishes.
    const double far = predict(fit, 1e80);
    CHECK(std::abs(far - fit.delta) / fit.delta < 0.01);
    // C = x gives 1 + delta for any alpha.
    for (double a : {0.07, 0.5, 1.3}) {
        const ScalingFit f{123.0, a, 0.3, 0.0};
        CHECK(predict(f, 123.0) == doctest::Approx(1.3).epsilon(1e-12));
    }
}

TEST_CASE("predict is strictly decreasing in x") {
    const ScalingFit fit{500.0, 0.21, 0.05, 0.0};
    double prev = predict(fit, 1.0);
    for (double x = 2.0; x < 1e6; x *= 3.0) {
        const double cur = predict(fit, x);
        CHECK(cur < prev);
        prev = cur;
    }
}

TEST_CASE("fit_single: noiseless recovery to 1e-6 relative error") {
    const ScalingFit truth{1000.0, 0.2, 0.1, 0.0};
    const auto xs = log_spaced(50.0, 5e5, 12);
    std::vector<double> ys;
    for (double x : xs) ys.push_back(predict(truth, x));
    const auto fit = fit_single(xs, ys);
    CHECK(std::abs(fit.c - truth.c) / truth.c < 1e-6);
    CHECK(std::abs(fit.alpha - truth.alpha) / truth.alpha < 1e-6);
    CHECK(std::abs(fit.delta - truth.delta) / truth.delta < 1e-6);
    CHECK(fit.r_squared > 1.0 - 1e-10);
}

TEST_CASE("fit_single: 1% multiplicative noise recovered within 5% (median)") {
    // A wide grid keeps C and delta identifiable at this noise level: the
    // power term spans well above and below delta across [1e1, 1e9].
    const ScalingFit truth{1000.0, 0.2, 0.1, 0.0};
    const auto xs = log_spaced(10.0, 1e9, 24);
    std::vector<double> err_c, err_a, err_d, r2s;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed * 7 + 1);
        std::vector<double> ys;
        for (double x : xs)
            ys.push_back(predict(truth, x) * (1.0 + 0.01 * rng.normal()));
        const auto fit = fit_single(xs, ys);
        err_c.push_back(std::abs(fit.c - truth.c) / truth.c);
        err_a.push_back(std::abs(fit.alpha - truth.alpha) / truth.alpha);
        err_d.push_back(std::abs(fit.delta - truth.delta) / truth.delta);
        r2s.push_back(fit.r_squared);
    }
    auto median = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        return v[v.size() / 2];
    };
    CHECK(median(err_c) < 0.05);
    CHECK(median(err_a) < 0.05);
    CHECK(median(err_d) < 0.05);
    CHECK(median(r2s) > 0.99);
}

TEST_CASE("fit_single: zero-variance targets raise DegenerateTarget") {
    const auto xs = log_spaced(10.0, 1000.0, 6);
    const std::vector<double> ys(xs.size(), 2.5);
    CHECK_THROWS_AS(fit_single(xs, ys), DegenerateTarget);
}

TEST_CASE("fit_single: preconditions") {
    CHECK_THROWS_AS(fit_single({1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}), ConfigError);
    CHECK_THROWS_AS(fit_single({1.0, -2.0, 3.0, 4.0}, {1.0, 2.0, 3.0, 4.0}),
                    DomainError);
}

TEST_CASE("fit_single is scale equivariant in x") {
    const ScalingFit truth{200.0, 0.3, 0.2, 0.0};
    const auto xs = log_spaced(10.0, 1e4, 10);
    std::vector<double> ys;
    for (double x : xs) ys.push_back(predict(truth, x));
    const auto base = fit_single(xs, ys);

    const double k = 37.5;
    auto xs_scaled = xs;
    for (auto& x : xs_scaled) x *= k;
    const auto scaled = fit_single(xs_scaled, ys);
    CHECK(std::abs(scaled.c - k * base.c) / (k * base.c) < 1e-6);
    CHECK(std::abs(scaled.alpha - base.alpha) / base.alpha < 1e-6);
    CHECK(std::abs(scaled.delta - base.delta) / std::max(base.delta, 1e-9) < 1e-6);
}

TEST_CASE("fit_single: returned fit beats every initial guess") {
    // The solver only accepts improving steps, so the final SSE cannot exceed
    // the SSE of the best multi-start seed; spot check against the seed grid.
    const auto xs = log_spaced(20.0, 2e4, 9);
    std::vector<double> ys;
    const ScalingFit truth{300.0, 0.12, 0.4, 0.0};
    Rng rng(5);
    for (double x : xs) ys.push_back(predict(truth, x) * (1.0 + 0.02 * rng.normal()));
    const auto fit = fit_single(xs, ys);

    auto sse_of = [&](const ScalingFit& f) {
        double s = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const double r = predict(f, xs[i]) - ys[i];
            s += r * r;
        }
        return s;
    };
    const double fit_sse = sse_of(fit);
    for (double a0 : {0.05, 0.1, 0.2, 0.4})
        for (double c0 : {xs[2], xs[4], xs[6]})
            CHECK(fit_sse <= sse_of({c0, a0, 0.0, 0.0}) + 1e-12);
}

TEST_CASE("predict_mixed: paper-form coefficients at the large-D limit") {
    // ((3.15e5/N)^(0.12/770) + 1.16e2/D)^770 + 0.108 at N = 3.15e5, D = 1e12.
    const MixedFit fit{3.15e5, 0.12, 770.0, 1.16e2, 0.108, 0.0};
    const double val = predict_mixed(fit, 3.15e5, 1e12);
    CHECK(val == doctest::Approx(1.108).epsilon(1e-6));
    CHECK_THROWS_AS(predict_mixed(fit, 0.0, 1.0), DomainError);
}

TEST_CASE("fit_mixed: noiseless recovery with gamma fixed") {
    const MixedFit truth{2.0e4, 0.3, 8.0, 50.0, 0.25, 0.0};
    std::vector<std::array<double, 3>> pts;
    for (double n : log_spaced(1e3, 1e5, 4))
        for (double d : log_spaced(500.0, 5e4, 4))
            pts.push_back({n, d, predict_mixed(truth, n, d)});
    const auto fit = fit_mixed(pts, 8.0);
    CHECK(std::abs(fit.delta - truth.delta) / truth.delta < 1e-4);
    CHECK(std::abs(fit.c_n - truth.c_n) / truth.c_n < 1e-3);
    CHECK(std::abs(fit.alpha_n - truth.alpha_n) / truth.alpha_n < 1e-3);
    CHECK(std::abs(fit.c_d - truth.c_d) / truth.c_d < 1e-3);
    CHECK(fit.r_squared > 1.0 - 1e-8);

    // Span preconditions.
    std::vector<std::array<double, 3>> collapsed;
    for (double d : log_spaced(500.0, 5e4, 8))
        collapsed.push_back({1e4, d, predict_mixed(truth, 1e4, d)});
    CHECK_THROWS_AS(fit_mixed(collapsed, 8.0), FitError);
    const std::vector<std::array<double, 3>> few(pts.begin(), pts.begin() + 4);
    CHECK_THROWS_AS(fit_mixed(few, 8.0), FitError);
}

TEST_CASE("fit save files are valid JSON") {
    const ScalingFit fit{10.0, 0.2, 0.1, 0.999};
    const char* path = "/tmp/densenote_fit.json";
    save_fit(fit, path);
    CHECK(read_file(path).find("\"single\"") != std::string::npos);
    const MixedFit mfit{1e4, 0.1, 770.0, 100.0, 0.1, 0.98};
    save_fit(mfit, path);
    CHECK(read_file(path).find("\"mixed\"") != std::string::npos);
    std::remove(path);
}
