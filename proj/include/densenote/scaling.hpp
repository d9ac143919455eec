#pragma once

// Nonlinear least squares for the scaling laws: the single-variable form
// L(x) = (C/x)^alpha + delta and the mixed model/data form
// L(N, D) = ((C_N/N)^(alpha_N/gamma) + C_D/D)^gamma + delta.
// Multi-start damped Gauss-Newton over log-parameterized coefficients.

#include <array>
#include <string>
#include <vector>

#include "densenote/common.hpp"

namespace densenote::scaling {

struct ScalingFit {
    double c = 0.0;
    double alpha = 0.0;
    double delta = 0.0;
    double r_squared = 0.0;
};

struct MixedFit {
    double c_n = 0.0;
    double alpha_n = 0.0;
    double gamma = 0.0;
    double c_d = 0.0;
    double delta = 0.0;
    double r_squared = 0.0;
};

double predict(const ScalingFit& fit, double x);             // x > 0
double predict_mixed(const MixedFit& fit, double n, double d);

// xs > 0, ys finite, at least 4 points. Throws DegenerateTarget when the
// targets have zero variance, FitError when no start converges.
ScalingFit fit_single(const std::vector<double>& xs, const std::vector<double>& ys);

// Points are (N, D, y). Needs >= 8 points spanning >= 2 distinct N and D.
// gamma_fixed > 0 pins the inner exponent divisor; <= 0 frees it.
MixedFit fit_mixed(const std::vector<std::array<double, 3>>& points,
                   double gamma_fixed = 0.0);

void save_fit(const ScalingFit&, const std::string& path);
void save_fit(const MixedFit&, const std::string& path);

}  // namespace densenote::scaling
