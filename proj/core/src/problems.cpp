#include "fdnet/problems.hpp"

#include <algorithm>
#include <cmath>

#include "fdnet/errors.hpp"

namespace fdnet {

namespace {

constexpr double kPi = 3.14159265358979323846;

double peak_u(double x, double y) {
    const double p = x * (x - 1.0);
    const double q = y * (y - 1.0);
    return 0.0005 * p * p * q * q * std::exp(10.0 * x * x + 10.0 * y);
}

double peak_f(double x, double y) {
    const double e = std::exp(10.0 * x * x + 10.0 * y);
    const double a = x * x * (x - 1.0) * (x - 1.0);
    const double b = y * y * (y - 1.0) * (y - 1.0);
    const double term_y = 50.0 * b + 20.0 * y * y * (y - 1.0) + y * y +
                          20.0 * y * (y - 1.0) * (y - 1.0) + 4.0 * y * (y - 1.0) +
                          (y - 1.0) * (y - 1.0);
    const double term_x = 40.0 * x * x * x * (x - 1.0) + 10.0 * a * (20.0 * x * x + 1.0) +
                          40.0 * a + x * x + 4.0 * x * (x - 1.0) +
                          (x - 1.0) * (x - 1.0);
    return -0.001 * e * (a * term_y + b * term_x);
}

double exptrig_u(double x, double y) {
    return std::exp(-x * x - y * y) * std::sin(3.0 * kPi * x) * std::sin(3.0 * kPi * y) + x;
}

double exptrig_f(double x, double y) {
    const double e = std::exp(-x * x - y * y);
    const double sx = std::sin(3.0 * kPi * x), cx = std::cos(3.0 * kPi * x);
    const double sy = std::sin(3.0 * kPi * y), cy = std::cos(3.0 * kPi * y);
    const double nine_pi2 = 9.0 * kPi * kPi;
    return e * (sy * ((nine_pi2 + 2.0 - 4.0 * x * x) * sx + 12.0 * kPi * x * cx) +
                sx * ((nine_pi2 + 2.0 - 4.0 * y * y) * sy + 12.0 * kPi * y * cy));
}

ProblemSpec trig_problem(int n) {
    ProblemSpec p;
    p.name = n == 1 ? "trig1" : "trig4";
    p.time_dependent = true;
    const double npi = n * kPi;
    p.exact_u = [npi](double x, double y, double t) {
        return std::cos(t) * std::sin(npi * x) * std::sin(npi * y);
    };
    p.source_f = [npi](double x, double y, double t) {
        return (-std::sin(t) + 2.0 * npi * npi * std::cos(t)) * std::sin(npi * x) *
               std::sin(npi * y);
    };
    return p;
}

}  // namespace

double KelloggSolution::mu(double theta) const {
    const int q = std::min(static_cast<int>(theta / (kPi / 2.0)), 3);
    return coeffs[2 * q] * std::sin(beta * theta) + coeffs[2 * q + 1] * std::cos(beta * theta);
}

double KelloggSolution::mu_prime(double theta) const {
    const int q = std::min(static_cast<int>(theta / (kPi / 2.0)), 3);
    return beta * (coeffs[2 * q] * std::cos(beta * theta) -
                   coeffs[2 * q + 1] * std::sin(beta * theta));
}

double KelloggSolution::evaluate(double x, double y) const {
    const double r = std::hypot(x, y);
    if (r == 0.0) return 0.0;
    double theta = std::atan2(y, x);
    if (theta < 0.0) theta += 2.0 * kPi;
    return std::pow(r, beta) * mu(theta);
}

namespace {

// Interface system: continuity of mu and of kappa * mu' at theta = pi/2, pi,
// 3pi/2 and across the wrap 2pi -> 0. Unknowns (a1,b1,...,a4,b4).
void kellogg_matrix(const std::array<double, 4>& kappa, double beta, double m[8][8]) {
    for (int r = 0; r < 8; ++r)
        for (int c = 0; c < 8; ++c) m[r][c] = 0.0;
    for (int i = 0; i < 4; ++i) {
        const double phi = beta * (i + 1) * kPi / 2.0;
        const double s = std::sin(phi), c = std::cos(phi);
        const int lhs = 2 * i;            // columns of (a_i, b_i)
        const int rhs = 2 * ((i + 1) % 4);
        // value continuity
        m[2 * i][lhs] = s;
        m[2 * i][lhs + 1] = c;
        // flux continuity (common factor beta removed)
        m[2 * i + 1][lhs] = kappa[i] * c;
        m[2 * i + 1][lhs + 1] = -kappa[i] * s;
        if (i < 3) {
            m[2 * i][rhs] = -s;
            m[2 * i][rhs + 1] = -c;
            m[2 * i + 1][rhs] = -kappa[i + 1] * c;
            m[2 * i + 1][rhs + 1] = kappa[i + 1] * s;
        } else {
            // wrap: mu_1 evaluated at theta = 0
            m[2 * i][rhs + 1] = -1.0;
            m[2 * i + 1][rhs] = -kappa[0];
        }
    }
}

double det8(double m[8][8]) {
    double a[8][8];
    for (int r = 0; r < 8; ++r)
        for (int c = 0; c < 8; ++c) a[r][c] = m[r][c];
    double det = 1.0;
    for (int k = 0; k < 8; ++k) {
        int piv = k;
        for (int r = k + 1; r < 8; ++r)
            if (std::abs(a[r][k]) > std::abs(a[piv][k])) piv = r;
        if (a[piv][k] == 0.0) return 0.0;
        if (piv != k) {
            std::swap_ranges(a[piv], a[piv] + 8, a[k]);
            det = -det;
        }
        det *= a[k][k];
        for (int r = k + 1; r < 8; ++r) {
            const double f = a[r][k] / a[k][k];
            for (int c = k; c < 8; ++c) a[r][c] -= f * a[k][c];
        }
    }
    return det;
}

// Nullspace vector of a (numerically) rank-7 matrix via complete-pivot
// elimination with the last free variable fixed at 1.
std::array<double, 8> nullspace8(double m[8][8]) {
    double a[8][8];
    for (int r = 0; r < 8; ++r)
        for (int c = 0; c < 8; ++c) a[r][c] = m[r][c];
    std::array<int, 8> col_of{};  // permutation: elimination column order
    for (int c = 0; c < 8; ++c) col_of[c] = c;
    for (int k = 0; k < 7; ++k) {
        int pr = k, pc = k;
        double best = 0.0;
        for (int r = k; r < 8; ++r)
            for (int c = k; c < 8; ++c)
                if (std::abs(a[r][c]) > best) {
                    best = std::abs(a[r][c]);
                    pr = r;
                    pc = c;
                }
        if (pr != k) std::swap_ranges(a[pr], a[pr] + 8, a[k]);
        if (pc != k) {
            for (int r = 0; r < 8; ++r) std::swap(a[r][pc], a[r][k]);
            std::swap(col_of[pc], col_of[k]);
        }
        for (int r = k + 1; r < 8; ++r) {
            const double f = a[r][k] / a[k][k];
            for (int c = k; c < 8; ++c) a[r][c] -= f * a[k][c];
        }
    }
    std::array<double, 8> z{};
    z[7] = 1.0;  // free variable
    for (int k = 6; k >= 0; --k) {
        double s = 0.0;
        for (int c = k + 1; c < 8; ++c) s += a[k][c] * z[c];
        z[k] = -s / a[k][k];
    }
    std::array<double, 8> out{};
    for (int c = 0; c < 8; ++c) out[col_of[c]] = z[c];
    return out;
}

}  // namespace

KelloggSolution solve_kellogg_coefficients(const std::array<double, 4>& kappa_values) {
    for (double k : kappa_values)
        if (!(k > 0.0))
            throw ConfigError("kellogg: diffusion values must be positive");
    const bool uniform = kappa_values[0] == kappa_values[1] &&
                         kappa_values[1] == kappa_values[2] &&
                         kappa_values[2] == kappa_values[3];

    auto det_at = [&](double beta) {
        double m[8][8];
        kellogg_matrix(kappa_values, beta, m);
        return det8(m);
    };

    const int scan = 2000;
    double lo = 0.0, hi = 0.0;
    double prev_beta = 1e-6, prev_det = det_at(prev_beta);
    for (int i = 1; i <= scan; ++i) {
        const double beta = 1e-6 + (1.0 - 2e-6) * i / scan;
        const double d = det_at(beta);
        if ((prev_det < 0.0) != (d < 0.0) || d == 0.0) {
            lo = prev_beta;
            hi = beta;
            break;
        }
        prev_beta = beta;
        prev_det = d;
    }
    if (hi == 0.0) {
        if (uniform)
            throw ConfigError("uniform kappa: use smooth problems");
        throw ConfigError("kellogg: no singular exponent in (0,1) for this kappa pattern");
    }
    double flo = det_at(lo);
    while (hi - lo > 1e-12) {
        const double mid = 0.5 * (lo + hi);
        const double fm = det_at(mid);
        if ((flo < 0.0) == (fm < 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }

    KelloggSolution sol;
    sol.beta = 0.5 * (lo + hi);
    double m[8][8];
    kellogg_matrix(kappa_values, sol.beta, m);
    sol.coeffs = nullspace8(m);
    double scale = 0.0;
    for (double c : sol.coeffs) scale = std::max(scale, std::abs(c));
    for (double& c : sol.coeffs) c /= scale;

    if (kappa_values == std::array<double, 4>{5.0, 1.0, 5.0, 1.0} &&
        std::abs(sol.beta - 0.5354) > 1e-3)
        throw SolverError("kellogg: singular exponent drifted from its known value");
    return sol;
}

ProblemSpec make_problem(const std::string& name) {
    ProblemSpec p;
    p.name = name;
    if (name == "bubble") {
        p.exact_u = [](double x, double y, double) { return x * (x - 1.0) * y * (y - 1.0); };
        p.source_f = [](double x, double y, double) {
            return -2.0 * (x * (x - 1.0) + y * (y - 1.0));
        };
    } else if (name == "peak") {
        p.exact_u = [](double x, double y, double) { return peak_u(x, y); };
        p.source_f = [](double x, double y, double) { return peak_f(x, y); };
    } else if (name == "exptrig") {
        p.exact_u = [](double x, double y, double) { return exptrig_u(x, y); };
        p.source_f = [](double x, double y, double) { return exptrig_f(x, y); };
    } else if (name == "kellogg") {
        p.x_min = p.y_min = -1.0;
        p.x_max = p.y_max = 1.0;
        KelloggSolution sol = solve_kellogg_coefficients({5.0, 1.0, 5.0, 1.0});
        // rescale from the solver's max|c|=1 normalization to the classical
        // table for this problem (first-quadrant cosine coefficient = 1,
        // giving a1 = 1/sqrt(5), b2 = 7/3, b3 = 5/9, b4 = -13/27)
        const double scale = 1.0 / sol.coeffs[1];
        for (double& c : sol.coeffs) c *= scale;
        p.exact_u = [sol](double x, double y, double) { return sol.evaluate(x, y); };
        p.source_f = [](double, double, double) { return 0.0; };
        p.kappa = [](double x, double y) {
            // quadrants closed on their lower-left edges
            const bool q13 = (x >= 0.0 && y >= 0.0) || (x < 0.0 && y < 0.0);
            return q13 ? 5.0 : 1.0;
        };
    } else if (name == "trig1") {
        p = trig_problem(1);
    } else if (name == "trig4") {
        p = trig_problem(4);
    } else if (name == "gaussian") {
        p.time_dependent = true;
        p.exact_u = [](double x, double y, double t) {
            const double s = 2.0 * x - 1.0, w = 2.0 * y - 1.0;
            return std::cos(t) * std::exp(-50.0 * (s * s + w * w));
        };
        p.source_f = [](double x, double y, double t) {
            const double s = 2.0 * x - 1.0, w = 2.0 * y - 1.0;
            const double e = std::exp(-50.0 * (s * s + w * w));
            return e * (-std::sin(t) + std::cos(t) * (800.0 - 40000.0 * (s * s + w * w)));
        };
    } else {
        throw ConfigError("unknown problem '" + name +
                          "' (expected bubble|peak|exptrig|kellogg|trig1|trig4|gaussian)");
    }
    return p;
}

std::vector<std::string> problem_names() {
    return {"bubble", "peak", "exptrig", "kellogg", "trig1", "trig4", "gaussian"};
}

double verify_source(const ProblemSpec& problem, const GridSpec& grid) {
    if (problem.name == "kellogg")
        throw ConfigError("verify_source: needs a smooth exact solution");
    const double d = 1e-3;
    const double t = problem.time_dependent ? problem.t0 + 0.3 : problem.t0;
    auto u = problem.exact_u;
    double worst = 0.0;
    for (int i = 1; i < grid.n - 1; ++i) {
        for (int j = 1; j < grid.n - 1; ++j) {
            const double x = grid.x(i), y = grid.y(j);
            const double uxx = (-u(x + 2 * d, y, t) + 16.0 * u(x + d, y, t) -
                                30.0 * u(x, y, t) + 16.0 * u(x - d, y, t) -
                                u(x - 2 * d, y, t)) /
                               (12.0 * d * d);
            const double uyy = (-u(x, y + 2 * d, t) + 16.0 * u(x, y + d, t) -
                                30.0 * u(x, y, t) + 16.0 * u(x, y - d, t) -
                                u(x, y - 2 * d, t)) /
                               (12.0 * d * d);
            double expected = -(uxx + uyy);
            if (problem.time_dependent) {
                const double ut = (-u(x, y, t + 2 * d) + 8.0 * u(x, y, t + d) -
                                   8.0 * u(x, y, t - d) + u(x, y, t - 2 * d)) /
                                  (12.0 * d);
                expected += ut;
            }
            worst = std::max(worst, std::abs(problem.source_f(x, y, t) - expected));
        }
    }
    return worst;
}

}  // namespace fdnet
