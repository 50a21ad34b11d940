#include <doctest.h>

#include <cmath>

#include "fdnet/sparse.hpp"
#include "fdnet/stencil.hpp"
#include "test_support.hpp"

using namespace fdnet;
using namespace fdnet::test;

TEST_CASE("laplacian_kernel entries and scaling") {
    const Kernel<double> k1 = laplacian_kernel<double>(1.0);
    CHECK(k1.at(0, 0, 1, 1) == 4.0);
    CHECK(k1.at(0, 0, 0, 1) == -1.0);
    CHECK(k1.at(0, 0, 1, 0) == -1.0);
    CHECK(k1.at(0, 0, 0, 0) == 0.0);
    const Kernel<double> kh = laplacian_kernel<double>(0.5);
    for (std::size_t i = 0; i < kh.data.size(); ++i)
        CHECK(kh.data[i] == doctest::Approx(4.0 * k1.data[i]));
    CHECK_THROWS_AS(laplacian_kernel<double>(0.0), std::domain_error);

    // a linear field is stencil-invisible
    const GridSpec grid = GridSpec::vertex(8);
    const Tensor<double> u = sample_field<double>(grid, [](double x, double) { return x; });
    const Tensor<double> out = conv2d(u, laplacian_kernel<double>(grid.h));
    for (double v : out.data) CHECK(v == doctest::Approx(0.0).epsilon(1e-10));
}

TEST_CASE("tp_kernels match their printed matrices") {
    const TpKernels<double> k = tp_kernels<double>();
    CHECK(k.t_up.at(0, 0, 0, 2) == 1.0);
    CHECK(k.t_up.at(0, 0, 2, 2) == -1.0);
    CHECK(k.p_down.at(0, 0, 3, 2) == 1.0);
    CHECK(k.p_up.at(0, 0, 1, 2) == 1.0);

    auto sum = [](const Kernel<double>& kk) {
        double s = 0.0;
        for (double v : kk.data) s += v;
        return s;
    };
    for (const Kernel<double>* t : {&k.t_up, &k.t_left, &k.t_down, &k.t_right})
        CHECK(sum(*t) == 0.0);
    for (const Kernel<double>* p : {&k.p_up, &k.p_left, &k.p_down, &k.p_right})
        CHECK(sum(*p) == 1.0);

    // transpose identities: t_left = -t_up^T, p_right = p_down^T
    for (int r = 0; r < 5; ++r)
        for (int c = 0; c < 5; ++c) {
            CHECK(k.t_left.at(0, 0, r, c) == -k.t_up.at(0, 0, c, r));
            CHECK(k.t_right.at(0, 0, r, c) == -k.t_down.at(0, 0, c, r));
            CHECK(k.p_left.at(0, 0, r, c) == k.p_up.at(0, 0, c, r));
            CHECK(k.p_right.at(0, 0, r, c) == k.p_down.at(0, 0, c, r));
        }
    CHECK(k.t_up.stride == 2);
    CHECK(k.p_up.padding == Padding::valid);
}

TEST_CASE("kappa_to_dual: dilation, harmonic means, masking") {
    SUBCASE("all ones") {
        const Tensor<double> dual = kappa_to_dual(Tensor<double>(1, 2, 2, 1.0));
        const std::vector<double> want{0, 1, 0, 1, 0, 1, 0, 1, 0};
        CHECK(dual.data == want);
    }
    SUBCASE("hand-computed harmonic mean") {
        Tensor<double> kappa(1, 2, 2, 1.0);
        kappa.at(0, 1, 1) = 3.0;
        const Tensor<double> dual = kappa_to_dual(kappa);
        CHECK(dual.at(0, 0, 1) == 1.0);
        CHECK(dual.at(0, 1, 0) == 1.0);
        CHECK(dual.at(0, 1, 2) == doctest::Approx(1.5));  // 2/(1 + 1/3)
        CHECK(dual.at(0, 2, 1) == doctest::Approx(1.5));
        CHECK(dual.at(0, 1, 1) == 0.0);
    }
    SUBCASE("both-odd positions stay zero for random kappa") {
        Rng rng(61);
        Tensor<double> kappa(1, 5, 5);
        for (auto& v : kappa.data) v = 0.2 + rng.next_unit() * 5.0;
        const Tensor<double> dual = kappa_to_dual(kappa);
        for (int r = 1; r < dual.rows; r += 2)
            for (int c = 1; c < dual.cols; c += 2) CHECK(dual.at(0, r, c) == 0.0);
        for (int r = 0; r < dual.rows; r += 2)
            for (int c = 0; c < dual.cols; c += 2) CHECK(dual.at(0, r, c) == 0.0);
    }
    SUBCASE("harmonic mean stays between its arguments") {
        Rng rng(67);
        for (int i = 0; i < 200; ++i) {
            const double a = 1e-3 + rng.next_unit() * 10.0;
            const double b = 1e-3 + rng.next_unit() * 10.0;
            Tensor<double> kappa(1, 2, 2, a);
            kappa.at(0, 0, 1) = b;
            const double hm = kappa_to_dual(kappa).at(0, 0, 1);
            CHECK(hm >= std::min(a, b) - 1e-15);
            CHECK(hm <= std::max(a, b) + 1e-15);
        }
    }
    SUBCASE("non-positive kappa is rejected") {
        Tensor<double> kappa(1, 2, 2, 1.0);
        kappa.at(0, 0, 0) = 0.0;
        CHECK_THROWS_AS(kappa_to_dual(kappa), std::domain_error);
    }
}

TEST_CASE("residual_const vanishes where it should") {
    const GridSpec grid = GridSpec::vertex(16);
    Rng rng(71);
    SUBCASE("u random, f = K*u gives exact zero") {
        const Tensor<double> u = random_tensor(rng, 1, 16, 16);
        const Tensor<double> ku = conv2d(u, laplacian_kernel<double>(grid.h));
        Tensor<double> f(1, 16, 16);
        for (int i = 0; i < 14; ++i)
            for (int j = 0; j < 14; ++j) f.at(0, i + 1, j + 1) = ku.at(0, i, j);
        const Tensor<double> r = residual_const(u, f, grid);
        for (double v : r.data) CHECK(v == 0.0);
    }
    SUBCASE("exact bubble samples against the analytic source") {
        const ProblemSpec p = make_problem("bubble");
        const Tensor<double> u = sample_field<double>(grid, [&](double x, double y) {
            return p.exact_u(x, y, 0.0);
        });
        const Tensor<double> f = sample_field<double>(grid, [&](double x, double y) {
            return p.source_f(x, y, 0.0);
        });
        const Tensor<double> r = residual_const(u, f, grid);
        for (double v : r.data) CHECK(std::abs(v) < 1e-11);
    }
    SUBCASE("FD solution satisfies the scheme to solver tolerance") {
        const ProblemSpec p = make_problem("exptrig");
        const Tensor<double> u_h = solve_elliptic(p, grid);
        const Tensor<double> f = sample_field<double>(grid, [&](double x, double y) {
            return p.source_f(x, y, 0.0);
        });
        const Tensor<double> r = residual_const(u_h, f, grid);
        for (double v : r.data) CHECK(std::abs(v) < 1e-7);  // tol 1e-12 * ||A|| scale
    }
}

TEST_CASE("residual_nonconst: reductions and brute-force oracle") {
    Rng rng(73);
    const int n = 12;
    const GridSpec grid = GridSpec::vertex(n);
    SUBCASE("kappa = 1 reduces to the five-point residual") {
        const Tensor<double> u = random_tensor(rng, 1, n, n);
        const Tensor<double> f = random_tensor(rng, 1, n, n);
        const Tensor<double> dual = kappa_to_dual(Tensor<double>(1, n, n, 1.0));
        const Tensor<double> r5 = residual_const(u, f, grid);
        const Tensor<double> rv = residual_nonconst(u, dual, f, grid);
        for (std::size_t i = 0; i < r5.data.size(); ++i)
            CHECK(rv.data[i] == doctest::Approx(r5.data[i]).epsilon(1e-12));
    }
    SUBCASE("random kappa against a direct harmonic-average loop") {
        Tensor<double> kappa(1, n, n);
        for (auto& v : kappa.data) v = 0.3 + rng.next_unit() * 3.0;
        const Tensor<double> u = random_tensor(rng, 1, n, n);
        const Tensor<double> f = random_tensor(rng, 1, n, n);
        const Tensor<double> rv = residual_nonconst(u, kappa_to_dual(kappa), f, grid);
        auto hm = [](double a, double b) { return 2.0 / (1.0 / a + 1.0 / b); };
        const double inv_h2 = 1.0 / (grid.h * grid.h);
        for (int i = 1; i <= n - 2; ++i)
            for (int j = 1; j <= n - 2; ++j) {
                const double ke = hm(kappa.at(0, i, j), kappa.at(0, i + 1, j));
                const double kw = hm(kappa.at(0, i, j), kappa.at(0, i - 1, j));
                const double kn = hm(kappa.at(0, i, j), kappa.at(0, i, j + 1));
                const double ks = hm(kappa.at(0, i, j), kappa.at(0, i, j - 1));
                const double flux =
                    ke * (u.at(0, i + 1, j) - u.at(0, i, j)) -
                    kw * (u.at(0, i, j) - u.at(0, i - 1, j)) +
                    kn * (u.at(0, i, j + 1) - u.at(0, i, j)) -
                    ks * (u.at(0, i, j) - u.at(0, i, j - 1));
                const double want = -inv_h2 * flux - f.at(0, i, j);
                CHECK(rv.at(0, i - 1, j - 1) ==
                      doctest::Approx(want).epsilon(1e-12).scale(inv_h2));
            }
    }
    SUBCASE("constant field with zero source has zero residual") {
        Tensor<double> kappa(1, n, n);
        for (auto& v : kappa.data) v = 0.3 + rng.next_unit() * 3.0;
        const Tensor<double> u(1, n, n, 7.25);
        const Tensor<double> f(1, n, n, 0.0);
        const Tensor<double> rv = residual_nonconst(u, kappa_to_dual(kappa), f, grid);
        for (double v : rv.data) CHECK(std::abs(v) < 1e-12 / (grid.h * grid.h));
    }
}

TEST_CASE("assemble_elliptic: hand-checked single-interior-node system") {
    // n=3, h=0.5: one unknown with diagonal 4/h^2 = 16 and all four
    // neighbours on the boundary contributing 4*g/h^2 to the rhs
    const GridSpec grid = GridSpec::vertex(3, 0.0, 1.0, 0.0, 1.0);
    REQUIRE(grid.h == doctest::Approx(0.5));
    const EllipticSystem sys = assemble_elliptic(Tensor<double>{}, grid);
    REQUIRE(sys.a.n_rows == 1);
    CHECK(sys.a.values.size() == 1);
    CHECK(sys.a.values[0] == doctest::Approx(16.0));

    Tensor<double> f(1, 3, 3, 2.0);
    Tensor<double> g(1, 3, 3);
    g.at(0, 0, 1) = 1.0;
    g.at(0, 2, 1) = 2.0;
    g.at(0, 1, 0) = 3.0;
    g.at(0, 1, 2) = 4.0;
    const std::vector<double> b = sys.rhs(f, g);
    CHECK(b[0] == doctest::Approx(2.0 + 4.0 * (1.0 + 2.0 + 3.0 + 4.0)));
}

TEST_CASE("assembled operator is exactly symmetric with zero interior row sums") {
    Rng rng(79);
    const GridSpec grid = GridSpec::vertex(10);
    Tensor<double> kappa(1, 10, 10);
    for (auto& v : kappa.data) v = 0.2 + rng.next_unit() * 4.0;
    for (const bool constant : {true, false}) {
        const EllipticSystem sys =
            assemble_elliptic(constant ? Tensor<double>{} : kappa, grid);
        const SparseOperator& a = sys.a;
        // symmetry: compare a(i,j) with a(j,i) entry by entry
        for (int r = 0; r < a.n_rows; ++r)
            for (int k = a.row_ptr[r]; k < a.row_ptr[r + 1]; ++k) {
                const int c = a.col_idx[k];
                double mirror = 0.0;
                for (int k2 = a.row_ptr[c]; k2 < a.row_ptr[c + 1]; ++k2)
                    if (a.col_idx[k2] == r) mirror = a.values[k2];
                CHECK(a.values[k] == mirror);
            }
    }
    // interior rows away from the boundary sum to zero for kappa = 1
    const EllipticSystem sys = assemble_elliptic(Tensor<double>{}, grid);
    const int ni = 8;
    for (int i = 2; i <= 7; ++i)
        for (int j = 2; j <= 7; ++j) {
            const int row = (i - 1) * ni + (j - 1);
            double sum = 0.0;
            for (int k = sys.a.row_ptr[row]; k < sys.a.row_ptr[row + 1]; ++k)
                sum += sys.a.values[k];
            CHECK(sum == doctest::Approx(0.0).epsilon(1e-12).scale(1.0 / (grid.h * grid.h)));
        }
}

TEST_CASE("solve_elliptic reproduces the reference error table") {
    // cell layout: N cells per side, h = 1/N
    SUBCASE("bubble is exact to solver tolerance") {
        const ProblemSpec p = make_problem("bubble");
        for (int n : {32, 64}) {
            const GridSpec grid = p.cell_grid(n);
            const Tensor<double> u_h = solve_elliptic(p, grid);
            const Tensor<double> u = sample_field<double>(grid, [&](double x, double y) {
                return p.exact_u(x, y, 0.0);
            });
            CHECK(norm_2h(u, u_h, grid) < 1e-12);
        }
    }
    SUBCASE("peak at N=32") {
        const ProblemSpec p = make_problem("peak");
        const GridSpec grid = p.cell_grid(32);
        const Tensor<double> u_h = solve_elliptic(p, grid);
        const Tensor<double> u = sample_field<double>(grid, [&](double x, double y) {
            return p.exact_u(x, y, 0.0);
        });
        // frozen from an independent sparse direct solve of the same system
        CHECK(norm_2h(u, u_h, grid) == doctest::Approx(2.0134e-2).epsilon(0.01));
        CHECK(norm_inf(u, u_h) == doctest::Approx(1.1151e-1).epsilon(0.01));
    }
    SUBCASE("exptrig max-norm at N=128") {
        const ProblemSpec p = make_problem("exptrig");
        const GridSpec grid = p.cell_grid(128);
        const Tensor<double> u_h = solve_elliptic(p, grid);
        const Tensor<double> u = sample_field<double>(grid, [&](double x, double y) {
            return p.exact_u(x, y, 0.0);
        });
        CHECK(norm_inf(u, u_h) == doctest::Approx(4.5588e-4).epsilon(0.01));
    }
}

TEST_CASE("solve_parabolic reproduces the backward-Euler error table") {
    SUBCASE("trig1 N=32") {
        const ProblemSpec p = make_problem("trig1");
        const GridSpec grid = p.vertex_grid(32);
        const Tensor<double> u_h = solve_parabolic(p, grid, 0.1, 5);
        const Tensor<double> u = sample_field<double>(grid, [&](double x, double y) {
            return p.exact_u(x, y, 0.5);
        });
        CHECK(norm_2h(u, u_h, grid) == doctest::Approx(7.6693e-4).epsilon(0.01));
    }
    SUBCASE("gaussian N=128 at t=5") {
        const ProblemSpec p = make_problem("gaussian");
        const GridSpec grid = p.vertex_grid(128);
        const Tensor<double> u_h = solve_parabolic(p, grid, 0.1, 50);
        const Tensor<double> u = sample_field<double>(grid, [&](double x, double y) {
            return p.exact_u(x, y, 5.0);
        });
        // frozen from an independent sparse direct-solve marching oracle
        CHECK(norm_2h(u, u_h, grid) == doctest::Approx(5.722e-5).epsilon(0.02));
    }
    SUBCASE("zero data stays identically zero") {
        ProblemSpec p;
        p.name = "zero";
        p.time_dependent = true;
        p.exact_u = [](double, double, double) { return 0.0; };
        p.source_f = [](double, double, double) { return 0.0; };
        const GridSpec grid = GridSpec::vertex(16);
        const Tensor<double> u_h = solve_parabolic(p, grid, 0.1, 3);
        for (double v : u_h.data) CHECK(v == 0.0);
    }
    SUBCASE("unconditional stability: sup norm non-increasing with zero data") {
        const ProblemSpec trig = make_problem("trig1");
        ProblemSpec p;
        p.name = "decay";
        p.time_dependent = true;
        // start from a nontrivial field, then evolve with f = g = 0
        p.exact_u = [&](double x, double y, double t) {
            return t == 0.0 ? trig.exact_u(x, y, 0.0) : 0.0;
        };
        p.source_f = [](double, double, double) { return 0.0; };
        const GridSpec grid = GridSpec::vertex(24);
        double prev = std::numeric_limits<double>::infinity();
        bool monotone = true;
        solve_parabolic(p, grid, 0.05, 8, [&](int, const Tensor<double>& u) {
            double m = 0.0;
            for (double v : u.data) m = std::max(m, std::abs(v));
            if (m > prev + 1e-14) monotone = false;
            prev = m;
        });
        CHECK(monotone);
    }
}

TEST_CASE("cg_solve hits its tolerance and reports failure honestly") {
    const GridSpec grid = GridSpec::vertex(20);
    const EllipticSystem sys = assemble_elliptic(Tensor<double>{}, grid);
    Rng rng(83);
    std::vector<double> b(sys.a.n_rows);
    for (auto& v : b) v = rng.next_symmetric(1.0);
    std::vector<double> x;
    const CgResult res = cg_solve(sys.a, b, x, 1e-12, 10 * 20 * 20);
    CHECK(res.rel_residual <= 1e-12);
    const std::vector<double> ax = sys.a.apply(x);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i) {
        num += (ax[i] - b[i]) * (ax[i] - b[i]);
        den += b[i] * b[i];
    }
    CHECK(std::sqrt(num / den) <= 1e-12);
    CHECK_THROWS_AS(cg_solve(sys.a, b, x, 1e-12, 2), SolverError);
}

TEST_CASE("boundary and interior masks partition the lattice") {
    const GridSpec grid = GridSpec::vertex(7);
    const Tensor<double> b = boundary_mask<double>(grid);
    const Tensor<double> in = interior_mask<double>(grid);
    int boundary_count = 0;
    for (int i = 0; i < 7; ++i)
        for (int j = 0; j < 7; ++j) {
            CHECK(b.at(0, i, j) + in.at(0, i, j) == 1.0);
            CHECK(b.at(0, i, j) * in.at(0, i, j) == 0.0);
            boundary_count += b.at(0, i, j) != 0.0;
        }
    CHECK(boundary_count == 4 * (7 - 1));  // exactly the outermost ring
    CHECK_THROWS_AS(GridSpec::vertex(5, 0.0, 1.0, 0.0, 2.0), ConfigError);
}

TEST_CASE("norms: constant, zero, and single-node errors") {
    const GridSpec grid = GridSpec::vertex(9);
    Tensor<double> zero(1, 9, 9);
    Tensor<double> c(1, 9, 9, -0.3);
    CHECK(norm_2h(zero, c, grid) == doctest::Approx(grid.h * 9.0 * 0.3));
    CHECK(norm_inf(zero, c) == doctest::Approx(0.3));
    CHECK(norm_2h(zero, zero, grid) == 0.0);
    CHECK(norm_inf(zero, zero) == 0.0);
    Tensor<double> one_node(1, 9, 9);
    one_node.at(0, 4, 7) = 2.0;
    CHECK(norm_2h(zero, one_node, grid) == doctest::Approx(grid.h * 2.0));
}
