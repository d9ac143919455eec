#include "densenote/scaling.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

namespace densenote::scaling {

namespace {

double softplus(double x) {
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
// Inverse of softplus for start values; y > 0.
double softplus_inv(double y) {
    if (y > 30.0) return y;
    return std::log(std::expm1(std::max(y, 1e-300)));
}

// Solve A x = b in place for small k with partial pivoting. Returns false on
// a (near-)singular system.
bool solve_dense(std::vector<double>& a, std::vector<double>& b, int k) {
    for (int col = 0; col < k; ++col) {
        int piv = col;
        for (int r = col + 1; r < k; ++r)
            if (std::abs(a[r * k + col]) > std::abs(a[piv * k + col])) piv = r;
        if (std::abs(a[piv * k + col]) < 1e-300) return false;
        if (piv != col) {
            for (int c = 0; c < k; ++c) std::swap(a[col * k + c], a[piv * k + c]);
            std::swap(b[col], b[piv]);
        }
        const double inv = 1.0 / a[col * k + col];
        for (int r = col + 1; r < k; ++r) {
            const double f = a[r * k + col] * inv;
            if (f == 0.0) continue;
            for (int c = col; c < k; ++c) a[r * k + c] -= f * a[col * k + c];
            b[r] -= f * b[col];
        }
    }
    for (int col = k - 1; col >= 0; --col) {
        double s = b[col];
        for (int c = col + 1; c < k; ++c) s -= a[col * k + c] * b[c];
        b[col] = s / a[col * k + col];
    }
    return true;
}

// fn(theta, residuals, jacobian) fills r (n) and J (n x k).
using ResidualFn =
    std::function<void(const std::vector<double>&, std::vector<double>&,
                       std::vector<double>&)>;

struct LmOutcome {
    std::vector<double> theta;
    double sse = std::numeric_limits<double>::infinity();
    bool converged = false;
};

LmOutcome levenberg_marquardt(const ResidualFn& fn, std::vector<double> theta,
                              std::size_t n_points, int max_iters = 300) {
    const int k = static_cast<int>(theta.size());
    std::vector<double> r(n_points), jac(n_points * theta.size());
    std::vector<double> r_try(n_points), jac_try(n_points * theta.size());

    auto sse_of = [&](const std::vector<double>& rr) {
        double s = 0.0;
        for (double v : rr) s += v * v;
        return s;
    };

    fn(theta, r, jac);
    double sse = sse_of(r);
    if (!std::isfinite(sse)) return {};

    double mu = 1e-3;
    LmOutcome out{theta, sse, false};
    for (int it = 0; it < max_iters; ++it) {
        // Normal equations (J^T J + mu diag(J^T J)) step = -J^T r.
        std::vector<double> jtj(static_cast<std::size_t>(k) * k, 0.0);
        std::vector<double> jtr(static_cast<std::size_t>(k), 0.0);
        for (std::size_t i = 0; i < n_points; ++i) {
            const double* ji = jac.data() + i * static_cast<std::size_t>(k);
            for (int a = 0; a < k; ++a) {
                jtr[a] -= ji[a] * r[i];
                for (int b = a; b < k; ++b) jtj[a * k + b] += ji[a] * ji[b];
            }
        }
        for (int a = 0; a < k; ++a)
            for (int b = 0; b < a; ++b) jtj[a * k + b] = jtj[b * k + a];

        double gnorm = 0.0;
        for (int a = 0; a < k; ++a) gnorm = std::max(gnorm, std::abs(jtr[a]));
        if (gnorm < 1e-14 * (1.0 + sse)) {
            out.converged = true;
            break;
        }

        bool stepped = false;
        for (int damp = 0; damp < 25; ++damp) {
            std::vector<double> a_sys = jtj;
            std::vector<double> step = jtr;
            for (int d = 0; d < k; ++d)
                a_sys[d * k + d] += mu * std::max(jtj[d * k + d], 1e-12);
            if (!solve_dense(a_sys, step, k)) {
                mu *= 10.0;
                continue;
            }
            std::vector<double> theta_try = theta;
            for (int d = 0; d < k; ++d) theta_try[d] += step[d];
            fn(theta_try, r_try, jac_try);
            const double sse_try = sse_of(r_try);
            if (std::isfinite(sse_try) && sse_try <= sse) {
                double step_norm = 0.0;
                for (double s : step) step_norm = std::max(step_norm, std::abs(s));
                const double improvement = sse - sse_try;
                theta = theta_try;
                r.swap(r_try);
                jac.swap(jac_try);
                sse = sse_try;
                mu = std::max(mu * 0.3, 1e-12);
                stepped = true;
                if (step_norm < 1e-13 || improvement < 1e-17 * (1.0 + sse)) {
                    out.theta = theta;
                    out.sse = sse;
                    out.converged = true;
                    return out;
                }
                break;
            }
            mu *= 10.0;
        }
        if (!stepped) break;  // stuck in damping; keep the best so far
    }
    out.theta = theta;
    out.sse = sse;
    out.converged = true;
    return out;
}

std::vector<double> quantiles(std::vector<double> v, std::initializer_list<double> qs) {
    std::sort(v.begin(), v.end());
    std::vector<double> out;
    for (double q : qs) {
        const double idx = q * static_cast<double>(v.size() - 1);
        out.push_back(v[static_cast<std::size_t>(idx + 0.5)]);
    }
    return out;
}

double r_squared_of(const std::vector<double>& ys, double sse) {
    double mean = 0.0;
    for (double y : ys) mean += y;
    mean /= static_cast<double>(ys.size());
    double ss_tot = 0.0;
    for (double y : ys) ss_tot += (y - mean) * (y - mean);
    if (ss_tot == 0.0) throw DegenerateTarget("targets have zero variance");
    return 1.0 - sse / ss_tot;
}

}  // namespace

double predict(const ScalingFit& fit, double x) {
    if (!(x > 0.0)) throw DomainError("predict: x must be > 0");
    return std::exp(fit.alpha * (std::log(fit.c) - std::log(x))) + fit.delta;
}

double predict_mixed(const MixedFit& fit, double n, double d) {
    if (!(n > 0.0) || !(d > 0.0)) throw DomainError("predict_mixed: N, D must be > 0");
    const double t1 =
        std::exp(fit.alpha_n / fit.gamma * (std::log(fit.c_n) - std::log(n)));
    const double inner = t1 + fit.c_d / d;
    return std::exp(fit.gamma * std::log(inner)) + fit.delta;
}

ScalingFit fit_single(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size()) throw ShapeError("fit_single: length mismatch");
    if (xs.size() < 4) throw ConfigError("fit_single: need at least 4 points");
    for (double x : xs)
        if (!(x > 0.0)) throw DomainError("fit_single: xs must be > 0");
    for (double y : ys)
        if (!std::isfinite(y)) throw DomainError("fit_single: ys must be finite");

    double min_y = *std::min_element(ys.begin(), ys.end());

    // theta = (log C, log alpha, s) with delta = softplus(s).
    auto residuals = [&](const std::vector<double>& th, std::vector<double>& r,
                         std::vector<double>& jac) {
        const double log_c = th[0], alpha = std::exp(th[1]);
        const double delta = softplus(th[2]), dds = sigmoid(th[2]);
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const double u = log_c - std::log(xs[i]);
            const double p = std::exp(alpha * u);
            r[i] = p + delta - ys[i];
            jac[i * 3 + 0] = p * alpha;
            jac[i * 3 + 1] = p * alpha * u;
            jac[i * 3 + 2] = dds;
        }
    };

    const auto c_starts = quantiles(xs, {0.25, 0.5, 0.75});
    const double tiny_s = -30.0;  // softplus(-30) ~ 1e-13
    std::vector<std::vector<double>> starts;
    for (double a0 : {0.05, 0.1, 0.2, 0.4})
        for (double c0 : c_starts)
            for (double s0 : {tiny_s, min_y > 0.0 ? softplus_inv(min_y / 2.0) : tiny_s})
                starts.push_back({std::log(c0), std::log(a0), s0});

    LmOutcome best;
    for (const auto& th0 : starts) {
        const auto out = levenberg_marquardt(residuals, th0, xs.size());
        if (out.converged && out.sse < best.sse) best = out;
    }
    if (!best.converged || best.theta.empty())
        throw FitError("fit_single: no start converged");

    ScalingFit fit;
    fit.c = std::exp(best.theta[0]);
    fit.alpha = std::exp(best.theta[1]);
    fit.delta = softplus(best.theta[2]);
    fit.r_squared = r_squared_of(ys, best.sse);
    return fit;
}

MixedFit fit_mixed(const std::vector<std::array<double, 3>>& points,
                   double gamma_fixed) {
    if (points.size() < 8) throw FitError("fit_mixed: need at least 8 points");
    std::vector<double> ns, ds, ys;
    for (const auto& p : points) {
        if (!(p[0] > 0.0) || !(p[1] > 0.0))
            throw DomainError("fit_mixed: N, D must be > 0");
        if (!std::isfinite(p[2])) throw DomainError("fit_mixed: y must be finite");
        ns.push_back(p[0]);
        ds.push_back(p[1]);
        ys.push_back(p[2]);
    }
    auto distinct = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        return static_cast<std::size_t>(
            std::unique(v.begin(), v.end()) - v.begin());
    };
    if (distinct(ns) < 2 || distinct(ds) < 2)
        throw FitError("fit_mixed: need >= 2 distinct N and D values");

    const bool free_gamma = !(gamma_fixed > 0.0);
    const int k = free_gamma ? 5 : 4;
    double min_y = *std::min_element(ys.begin(), ys.end());

    // theta = (log C_N, log alpha_N, log C_D, s [, log gamma]).
    auto residuals = [&](const std::vector<double>& th, std::vector<double>& r,
                         std::vector<double>& jac) {
        const double log_cn = th[0], alpha_n = std::exp(th[1]);
        const double c_d = std::exp(th[2]);
        const double delta = softplus(th[3]), dds = sigmoid(th[3]);
        const double gamma = free_gamma ? std::exp(th[4]) : gamma_fixed;
        for (std::size_t i = 0; i < points.size(); ++i) {
            const double u = log_cn - std::log(ns[i]);
            const double t1 = std::exp(alpha_n / gamma * u);
            const double inner = t1 + c_d / ds[i];
            const double log_inner = std::log(inner);
            const double p = std::exp(gamma * log_inner);
            r[i] = p + delta - ys[i];
            const double common = p * gamma / inner;
            jac[i * static_cast<std::size_t>(k) + 0] = common * t1 * alpha_n / gamma;
            jac[i * static_cast<std::size_t>(k) + 1] =
                common * t1 * (alpha_n / gamma) * u;
            jac[i * static_cast<std::size_t>(k) + 2] = common * (c_d / ds[i]);
            jac[i * static_cast<std::size_t>(k) + 3] = dds;
            if (free_gamma) {
                const double dfdg =
                    p * log_inner - common * t1 * (alpha_n / gamma) * u;
                jac[i * static_cast<std::size_t>(k) + 4] = gamma * dfdg;
            }
        }
    };

    const auto n_starts = quantiles(ns, {0.25, 0.75});
    const auto d_starts = quantiles(ds, {0.5});
    const double tiny_s = -30.0;
    std::vector<std::vector<double>> starts;
    for (double a0 : {0.05, 0.15, 0.3})
        for (double cn0 : n_starts)
            for (double cd_scale : {1e-4, 1e-2, 1.0})
                for (double s0 :
                     {tiny_s, min_y > 0.0 ? softplus_inv(min_y / 2.0) : tiny_s}) {
                    std::vector<double> th{std::log(cn0), std::log(a0),
                                           std::log(d_starts[0] * cd_scale), s0};
                    if (free_gamma) th.push_back(std::log(8.0));
                    starts.push_back(std::move(th));
                }

    LmOutcome best;
    for (const auto& th0 : starts) {
        const auto out = levenberg_marquardt(residuals, th0, points.size());
        if (out.converged && out.sse < best.sse) best = out;
    }
    if (!best.converged || best.theta.empty())
        throw FitError("fit_mixed: no start converged");

    MixedFit fit;
    fit.c_n = std::exp(best.theta[0]);
    fit.alpha_n = std::exp(best.theta[1]);
    fit.c_d = std::exp(best.theta[2]);
    fit.delta = softplus(best.theta[3]);
    fit.gamma = free_gamma ? std::exp(best.theta[4]) : gamma_fixed;
    fit.r_squared = r_squared_of(ys, best.sse);
    return fit;
}

void save_fit(const ScalingFit& fit, const std::string& path) {
    nlohmann::json j{{"form", "single"},
                     {"C", fit.c},
                     {"alpha", fit.alpha},
                     {"delta", fit.delta},
                     {"r_squared", fit.r_squared}};
    write_file(path, j.dump(2) + "\n");
}

void save_fit(const MixedFit& fit, const std::string& path) {
    nlohmann::json j{{"form", "mixed"},   {"C_N", fit.c_n},
                     {"alpha_N", fit.alpha_n}, {"gamma", fit.gamma},
                     {"C_D", fit.c_d},    {"delta", fit.delta},
                     {"r_squared", fit.r_squared}};
    write_file(path, j.dump(2) + "\n");
}

}  // namespace densenote::scaling
