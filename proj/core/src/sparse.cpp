#include "fdnet/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fdnet/errors.hpp"

namespace fdnet {

namespace {

double harmonic(double a, double b) { return 2.0 / (1.0 / a + 1.0 / b); }

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

}  // namespace

SparseOperator SparseOperator::from_triplets(
    int rows, int cols, std::vector<std::tuple<int, int, double>> entries) {
    std::sort(entries.begin(), entries.end());
    SparseOperator m;
    m.n_rows = rows;
    m.n_cols = cols;
    m.row_ptr.assign(rows + 1, 0);
    m.col_idx.reserve(entries.size());
    m.values.reserve(entries.size());
    for (std::size_t k = 0; k < entries.size(); ++k) {
        auto [r, c, v] = entries[k];
        if (k > 0 && r == std::get<0>(entries[k - 1]) && c == std::get<1>(entries[k - 1])) {
            m.values.back() += v;  // merge duplicates
            continue;
        }
        m.row_ptr[r + 1]++;
        m.col_idx.push_back(c);
        m.values.push_back(v);
    }
    for (int r = 0; r < rows; ++r) m.row_ptr[r + 1] += m.row_ptr[r];
    return m;
}

void SparseOperator::apply(const std::vector<double>& x, std::vector<double>& y) const {
    y.assign(n_rows, 0.0);
    for (int r = 0; r < n_rows; ++r) {
        double acc = 0.0;
        for (int k = row_ptr[r]; k < row_ptr[r + 1]; ++k) acc += values[k] * x[col_idx[k]];
        y[r] = acc;
    }
}

std::vector<double> SparseOperator::apply(const std::vector<double>& x) const {
    std::vector<double> y;
    apply(x, y);
    return y;
}

std::vector<double> SparseOperator::diagonal() const {
    std::vector<double> d(n_rows, 0.0);
    for (int r = 0; r < n_rows; ++r)
        for (int k = row_ptr[r]; k < row_ptr[r + 1]; ++k)
            if (col_idx[k] == r) d[r] = values[k];
    return d;
}

SparseOperator SparseOperator::identity_plus_scaled(double tau) const {
    SparseOperator m = *this;
    for (double& v : m.values) v *= tau;
    for (int r = 0; r < n_rows; ++r) {
        bool found = false;
        for (int k = m.row_ptr[r]; k < m.row_ptr[r + 1]; ++k)
            if (m.col_idx[k] == r) {
                m.values[k] += 1.0;
                found = true;
            }
        if (!found) throw SolverError("identity_plus_scaled: missing diagonal entry");
    }
    return m;
}

EllipticSystem assemble_elliptic(const Tensor<double>& kappa, const GridSpec& grid) {
    const int n = grid.n;
    if (n < 3) throw ConfigError("assemble_elliptic: grid needs at least one interior node");
    const bool constant = kappa.size() == 0;
    if (!constant && (kappa.rows != n || kappa.cols != n))
        throw DimensionError("assemble_elliptic: kappa " + kappa.shape_str() +
                             " does not match grid n=" + std::to_string(n));
    const int ni = n - 2;
    const double inv_h2 = 1.0 / (grid.h * grid.h);
    auto kap = [&](int i, int j) { return constant ? 1.0 : kappa.at(0, i, j); };
    auto idx = [ni](int i, int j) { return (i - 1) * ni + (j - 1); };

    EllipticSystem sys;
    sys.grid = grid;
    sys.boundary_weight.assign(static_cast<std::size_t>(ni) * ni * 4, 0.0);
    std::vector<std::tuple<int, int, double>> trip;
    trip.reserve(static_cast<std::size_t>(ni) * ni * 5);

    // neighbour order: +i, -i, +j, -j
    const int di[4] = {1, -1, 0, 0};
    const int dj[4] = {0, 0, 1, -1};
    for (int i = 1; i <= n - 2; ++i) {
        for (int j = 1; j <= n - 2; ++j) {
            const int row = idx(i, j);
            double diag = 0.0;
            for (int s = 0; s < 4; ++s) {
                const int ii = i + di[s];
                const int jj = j + dj[s];
                const double w = harmonic(kap(i, j), kap(ii, jj)) * inv_h2;
                diag += w;
                if (grid.on_boundary(ii, jj))
                    sys.boundary_weight[static_cast<std::size_t>(row) * 4 + s] = w;
                else
                    trip.emplace_back(row, idx(ii, jj), -w);
            }
            trip.emplace_back(row, row, diag);
        }
    }
    sys.a = SparseOperator::from_triplets(ni * ni, ni * ni, std::move(trip));
    return sys;
}

std::vector<double> EllipticSystem::rhs(const Tensor<double>& f,
                                        const Tensor<double>& g) const {
    const int n = grid.n;
    const int ni = n - 2;
    std::vector<double> b(static_cast<std::size_t>(ni) * ni, 0.0);
    const int di[4] = {1, -1, 0, 0};
    const int dj[4] = {0, 0, 1, -1};
    for (int i = 1; i <= n - 2; ++i)
        for (int j = 1; j <= n - 2; ++j) {
            const int row = (i - 1) * ni + (j - 1);
            double v = f.at(0, i, j);
            for (int s = 0; s < 4; ++s) {
                const double w = boundary_weight[static_cast<std::size_t>(row) * 4 + s];
                if (w != 0.0) v += w * g.at(0, i + di[s], j + dj[s]);
            }
            b[row] = v;
        }
    return b;
}

CgResult cg_solve(const SparseOperator& a, const std::vector<double>& b,
                  std::vector<double>& x, double tol, int max_iters) {
    const int n = a.n_rows;
    x.assign(n, 0.0);
    std::vector<double> inv_diag = a.diagonal();
    for (double& d : inv_diag) d = 1.0 / d;

    std::vector<double> r = b;
    const double bnorm = std::sqrt(dot(b, b));
    if (bnorm == 0.0) return {0, 0.0};

    std::vector<double> z(n), p(n), ap(n);
    for (int i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
    p = z;
    double rz = dot(r, z);
    CgResult res;
    for (int it = 1; it <= max_iters; ++it) {
        a.apply(p, ap);
        const double alpha = rz / dot(p, ap);
        for (int i = 0; i < n; ++i) {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        const double rel = std::sqrt(dot(r, r)) / bnorm;
        res.iterations = it;
        res.rel_residual = rel;
        if (rel <= tol) return res;
        for (int i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
        const double rz_new = dot(r, z);
        const double beta = rz_new / rz;
        rz = rz_new;
        for (int i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
    throw SolverError("cg_solve: no convergence after " + std::to_string(max_iters) +
                      " iterations, relative residual " + std::to_string(res.rel_residual));
}

namespace {

constexpr double kCgTol = 1e-12;

Tensor<double> sample_at(const ProblemSpec& p, const GridSpec& grid, double t,
                         const std::function<double(double, double, double)>& fn) {
    Tensor<double> out(1, grid.n, grid.n);
    for (int i = 0; i < grid.n; ++i)
        for (int j = 0; j < grid.n; ++j) out.at(0, i, j) = fn(grid.x(i), grid.y(j), t);
    (void)p;
    return out;
}

void scatter_interior(const std::vector<double>& x, Tensor<double>& field) {
    const int ni = field.rows - 2;
    for (int i = 1; i <= ni; ++i)
        for (int j = 1; j <= ni; ++j) field.at(0, i, j) = x[(i - 1) * ni + (j - 1)];
}

}  // namespace

Tensor<double> solve_elliptic(const ProblemSpec& problem, const GridSpec& grid) {
    Tensor<double> kappa;
    if (!problem.constant_diffusion())
        kappa = sample_field<double>(grid, [&](double x, double y) {
            return problem.kappa(x, y);
        });
    const EllipticSystem sys = assemble_elliptic(kappa, grid);
    const double t = problem.t0;
    const Tensor<double> f = sample_at(problem, grid, t, problem.source_f);
    const Tensor<double> g = sample_at(problem, grid, t, problem.exact_u);
    std::vector<double> x;
    cg_solve(sys.a, sys.rhs(f, g), x, kCgTol, 10 * grid.n * grid.n);
    Tensor<double> u = g;  // boundary ring keeps g; interior overwritten
    scatter_interior(x, u);
    return u;
}

Tensor<double> solve_parabolic(
    const ProblemSpec& problem, const GridSpec& grid, double tau, int n_steps,
    const std::function<void(int, const Tensor<double>&)>& on_step) {
    if (!(tau > 0.0)) throw ConfigError("solve_parabolic: tau must be > 0");
    const EllipticSystem sys = assemble_elliptic(Tensor<double>{}, grid);
    const SparseOperator stepper = sys.a.identity_plus_scaled(tau);

    const int ni = grid.n - 2;
    Tensor<double> u = sample_at(problem, grid, problem.t0, problem.exact_u);
    std::vector<double> ui(static_cast<std::size_t>(ni) * ni);
    for (int i = 1; i <= ni; ++i)
        for (int j = 1; j <= ni; ++j) ui[(i - 1) * ni + (j - 1)] = u.at(0, i, j);

    for (int step = 1; step <= n_steps; ++step) {
        const double t = problem.t0 + step * tau;
        const Tensor<double> f = sample_at(problem, grid, t, problem.source_f);
        const Tensor<double> g = sample_at(problem, grid, t, problem.exact_u);
        // rhs = u^{n-1} + tau*f + tau * boundary coupling with g^n
        Tensor<double> zero_f(1, grid.n, grid.n);
        std::vector<double> b = sys.rhs(zero_f, g);
        for (std::size_t k = 0; k < b.size(); ++k) b[k] *= tau;
        for (int i = 1; i <= ni; ++i)
            for (int j = 1; j <= ni; ++j) {
                const int row = (i - 1) * ni + (j - 1);
                b[row] += ui[row] + tau * f.at(0, i, j);
            }
        cg_solve(stepper, b, ui, kCgTol, 10 * grid.n * grid.n);
        u = g;
        scatter_interior(ui, u);
        if (on_step) on_step(step, u);
    }
    return u;
}

}  // namespace fdnet
