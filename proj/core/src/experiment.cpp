#include "fdnet/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <mutex>
#include <thread>

#include "fdnet/io.hpp"
#include "fdnet/sparse.hpp"
#include "fdnet/stencil.hpp"
#include "fdnet/train.hpp"

namespace fdnet {

namespace {

GridSpec make_grid(const ExperimentConfig& cfg, const ProblemSpec& problem, int n) {
    if (cfg.grid_convention == "vertex") return problem.vertex_grid(n);
    if (cfg.grid_convention == "cell") return problem.cell_grid(n);
    throw ConfigError("grid convention must be 'vertex' or 'cell', got '" +
                      cfg.grid_convention + "'");
}

std::string run_tag(const ExperimentConfig& cfg, int n, int depth, int steps,
                    std::uint64_t seed) {
    return cfg.problem + "_n" + std::to_string(n) + "_d" + std::to_string(depth) + "_m" +
           std::to_string(steps) + "_s" + std::to_string(seed);
}

std::string time_suffix(double t) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "_t%g", t);
    return buf;
}

Tensor<double> sample_exact(const ProblemSpec& p, const GridSpec& grid, double t) {
    return sample_field<double>(grid, [&](double x, double y) { return p.exact_u(x, y, t); });
}

void dump_fields(const std::string& dir, const std::string& tag,
                 const Tensor<double>& exact, const Tensor<double>& pred) {
    Tensor<double> diff(1, exact.rows, exact.cols);
    for (std::size_t i = 0; i < diff.data.size(); ++i)
        diff.data[i] = std::abs(exact.data[i] - pred.data[i]);
    for (const auto& [name, field] :
         {std::pair<const char*, const Tensor<double>&>{"exact", exact},
          {"pred", pred},
          {"diff", diff}}) {
        save_grid(dir + "/" + name + "_" + tag + ".nng", field);
        save_grid_csv(dir + "/" + name + "_" + tag + ".csv", field);
    }
}

struct RunPoint {
    int n, depth, steps;
    std::uint64_t seed;
};

std::vector<RunPoint> expand(const ExperimentConfig& cfg) {
    std::vector<RunPoint> pts;
    for (int n : cfg.grid_sizes)
        for (int d : cfg.depths)
            for (int m : cfg.step_budgets)
                for (std::uint64_t s : cfg.seeds) {
                    if (!cfg.full && n >= 128 && m > 4000) continue;  // desk scale
                    pts.push_back({n, d, m, s});
                }
    return pts;
}

template <typename T>
std::vector<ErrorReportRow> run_one(const ExperimentConfig& cfg, const RunPoint& pt) {
    const ProblemSpec problem = make_problem(cfg.problem);
    const GridSpec grid = make_grid(cfg, problem, pt.n);

    NetworkSpec net;
    net.depth = pt.depth;
    net.channels = cfg.channels;
    net.kernel_size = cfg.kernel_size;
    net.activation = activation_from_string(cfg.activation);
    net.input_rows = net.input_cols = grid.n;

    TrainConfig<T> tc;
    tc.lr = static_cast<T>(cfg.lr > 0 ? cfg.lr : (problem.time_dependent ? 1e-4 : 1e-3));
    tc.max_steps = pt.steps;
    tc.seed = pt.seed;
    tc.alpha = cfg.alpha;
    tc.normalize_input = cfg.normalize_input;

    const std::string tag = run_tag(cfg, pt.n, pt.depth, pt.steps, pt.seed);
    std::vector<ErrorReportRow> rows;

    ErrorReportRow base;
    base.problem = cfg.problem;
    base.n = pt.n;
    base.depth = pt.depth;
    base.steps = pt.steps;
    base.seed = pt.seed;
    base.param_count = param_count(net);

    if (!problem.time_dependent) {
        TrainResult<T> result = train_elliptic(problem, grid, net, tc);
        const Tensor<double> exact = sample_exact(problem, grid, problem.t0);
        const Tensor<double> pred = result.best_prediction.template cast<double>();
        ErrorReportRow row = base;
        row.norm_2h = norm_2h(exact, pred, grid);
        row.norm_inf = norm_inf(exact, pred);
        row.final_loss = double(result.best_loss);
        row.wall_s = result.wall_seconds;
        rows.push_back(row);
        save_loss_history(cfg.out_dir + "/loss_" + tag + ".csv", result.loss_history,
                          result.wall_ms);
        dump_fields(cfg.out_dir, tag, exact, pred);
    } else {
        const int n_steps = static_cast<int>(std::llround(cfg.t_final / cfg.tau));
        auto steps = train_parabolic(problem, grid, net, tc, cfg.tau, n_steps,
                                     cfg.first_step_iters);
        double wall = 0.0;
        std::vector<T> history;
        for (const auto& s : steps) {
            wall += s.wall_seconds;
            history.insert(history.end(), s.loss_history.begin(), s.loss_history.end());
        }
        save_loss_history(cfg.out_dir + "/loss_" + tag + ".csv", history, {});
        for (double t_report : cfg.effective_report_times()) {
            const int step_idx = static_cast<int>(std::llround(t_report / cfg.tau));
            if (step_idx < 1 || step_idx > n_steps) continue;
            const auto& s = steps[step_idx - 1];
            const double t = problem.t0 + step_idx * cfg.tau;
            const Tensor<double> exact = sample_exact(problem, grid, t);
            const Tensor<double> pred = s.best_prediction.template cast<double>();
            ErrorReportRow row = base;
            row.t = t;
            row.norm_2h = norm_2h(exact, pred, grid);
            row.norm_inf = norm_inf(exact, pred);
            row.final_loss = double(s.best_loss);
            row.wall_s = wall;
            rows.push_back(row);
            dump_fields(cfg.out_dir, tag + time_suffix(t), exact, pred);
        }
    }
    return rows;
}

std::vector<ErrorReportRow> baseline_one(const ExperimentConfig& cfg, int n) {
    const ProblemSpec problem = make_problem(cfg.problem);
    const GridSpec grid = make_grid(cfg, problem, n);
    const std::string tag = cfg.problem + "_n" + std::to_string(n) + "_fd";
    std::vector<ErrorReportRow> rows;
    ErrorReportRow base;
    base.problem = cfg.problem;
    base.n = n;

    const auto t_start = std::chrono::steady_clock::now();
    auto elapsed = [&] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
            .count();
    };

    if (!problem.time_dependent) {
        const Tensor<double> u_h = solve_elliptic(problem, grid);
        const Tensor<double> exact = sample_exact(problem, grid, problem.t0);
        ErrorReportRow row = base;
        row.norm_2h = norm_2h(exact, u_h, grid);
        row.norm_inf = norm_inf(exact, u_h);
        row.wall_s = elapsed();
        rows.push_back(row);
        dump_fields(cfg.out_dir, tag, exact, u_h);
    } else {
        const int n_steps = static_cast<int>(std::llround(cfg.t_final / cfg.tau));
        const auto report_times = cfg.effective_report_times();
        solve_parabolic(problem, grid, cfg.tau, n_steps,
                        [&](int step, const Tensor<double>& u) {
                            const double t = problem.t0 + step * cfg.tau;
                            const bool wanted =
                                std::any_of(report_times.begin(), report_times.end(),
                                            [&](double rt) {
                                                return std::llround(rt / cfg.tau) == step;
                                            });
                            if (!wanted) return;
                            const Tensor<double> exact = sample_exact(problem, grid, t);
                            ErrorReportRow row = base;
                            row.t = t;
                            row.norm_2h = norm_2h(exact, u, grid);
                            row.norm_inf = norm_inf(exact, u);
                            row.wall_s = elapsed();
                            rows.push_back(row);
                            dump_fields(cfg.out_dir, tag + time_suffix(t), exact, u);
                        });
    }
    return rows;
}

template <typename Fn>
ErrorReport run_pool(const ExperimentConfig& cfg, std::size_t n_items, Fn&& item) {
    std::filesystem::create_directories(cfg.out_dir);
    ErrorReport report;
    std::mutex mu;
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;

    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n_items) return;
            try {
                auto rows = item(i);
                std::lock_guard<std::mutex> lock(mu);
                report.rows.insert(report.rows.end(), rows.begin(), rows.end());
            } catch (...) {
                std::lock_guard<std::mutex> lock(mu);
                if (!failure) failure = std::current_exception();
                return;
            }
        }
    };

    const int jobs = std::max(1, cfg.jobs);
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        for (int j = 0; j < jobs; ++j) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }
    if (failure) std::rethrow_exception(failure);

    // deterministic report order regardless of worker interleaving
    std::stable_sort(report.rows.begin(), report.rows.end(),
                     [](const ErrorReportRow& a, const ErrorReportRow& b) {
                         return std::tie(a.problem, a.n, a.depth, a.steps, a.seed, a.t) <
                                std::tie(b.problem, b.n, b.depth, b.steps, b.seed, b.t);
                     });
    write_report_csv(cfg.out_dir + "/report.csv", report);
    return report;
}

}  // namespace

void ExperimentConfig::validate() const {
    if (grid_sizes.empty() || depths.empty() || step_budgets.empty() || seeds.empty())
        throw ConfigError("experiment: every axis (n, depth, steps, seeds) needs at least "
                          "one value");
    if (precision != "single" && precision != "double")
        throw ConfigError("experiment: precision must be 'single' or 'double'");
    if (grid_convention != "vertex" && grid_convention != "cell")
        throw ConfigError("experiment: grid convention must be 'vertex' or 'cell'");
    make_problem(problem);  // validates the name
    activation_from_string(activation);
    if (!(tau > 0.0)) throw ConfigError("experiment: tau must be > 0");
    for (double t : effective_report_times()) {
        const double steps = t / tau;
        if (std::abs(steps - std::llround(steps)) > 1e-9)
            throw ConfigError("experiment: report time " + std::to_string(t) +
                              " is not a multiple of tau");
    }
}

std::vector<double> ExperimentConfig::effective_report_times() const {
    return report_times.empty() ? std::vector<double>{t_final} : report_times;
}

ErrorReport run_experiment(const ExperimentConfig& config) {
    config.validate();
    const std::vector<RunPoint> pts = expand(config);
    return run_pool(config, pts.size(), [&](std::size_t i) {
        return config.precision == "double" ? run_one<double>(config, pts[i])
                                            : run_one<float>(config, pts[i]);
    });
}

ErrorReport run_baseline(const ExperimentConfig& config) {
    config.validate();
    return run_pool(config, config.grid_sizes.size(), [&](std::size_t i) {
        return baseline_one(config, config.grid_sizes[i]);
    });
}

void write_report_csv(const std::string& path, const ErrorReport& report) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw FormatError(path + ": cannot open for writing");
    std::fprintf(f, "problem,n,depth,steps,seed,t,norm_2h,norm_inf,final_loss,wall_s,"
                    "param_count\n");
    for (const auto& r : report.rows)
        std::fprintf(f, "%s,%d,%d,%d,%llu,%.17g,%.17g,%.17g,%.17g,%.17g,%zu\n",
                     r.problem.c_str(), r.n, r.depth, r.steps,
                     static_cast<unsigned long long>(r.seed), r.t, r.norm_2h, r.norm_inf,
                     r.final_loss, r.wall_s, r.param_count);
    std::fclose(f);
}

ErrorReport read_report_csv(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "r");
    if (!f) throw FormatError(path + ": cannot open");
    ErrorReport report;
    char line[1024];
    bool header = true;
    while (std::fgets(line, sizeof(line), f)) {
        if (header) {
            header = false;
            continue;
        }
        ErrorReportRow r;
        char name[256];
        unsigned long long seed = 0;
        std::size_t params = 0;
        const int got = std::sscanf(line, "%255[^,],%d,%d,%d,%llu,%lg,%lg,%lg,%lg,%lg,%zu",
                                    name, &r.n, &r.depth, &r.steps, &seed, &r.t,
                                    &r.norm_2h, &r.norm_inf, &r.final_loss, &r.wall_s,
                                    &params);
        if (got != 11) {
            std::fclose(f);
            throw FormatError(path + ": malformed report row '" + line + "'");
        }
        r.problem = name;
        r.seed = seed;
        r.param_count = params;
        report.rows.push_back(r);
    }
    std::fclose(f);
    return report;
}

bool run_verification(bool verbose) {
    int failures = 0;
    auto check = [&](const std::string& name, bool ok, const std::string& detail) {
        if (!ok) ++failures;
        if (verbose || !ok)
            std::printf("[%s] %s%s%s\n", ok ? "PASS" : "FAIL", name.c_str(),
                        detail.empty() ? "" : ": ", detail.c_str());
        return ok;
    };
    char buf[128];

    // hand-coded source terms vs high-order finite differences
    for (const char* name : {"bubble", "peak", "exptrig", "trig1", "trig4", "gaussian"}) {
        const ProblemSpec p = make_problem(name);
        const GridSpec grid = p.vertex_grid(24);
        double max_f = 0.0;
        for (int i = 0; i < grid.n; ++i)
            for (int j = 0; j < grid.n; ++j)
                max_f = std::max(max_f,
                                 std::abs(p.source_f(grid.x(i), grid.y(j),
                                                     p.time_dependent ? p.t0 + 0.3 : p.t0)));
        const double res = verify_source(p, grid);
        const double tol = std::max(1e-6, 1e-4 * max_f);
        std::snprintf(buf, sizeof(buf), "max residual %.3e (tol %.3e)", res, tol);
        check(std::string("source_consistency/") + name, res <= tol, buf);
    }

    // conv-form residuals vs assembled operators on random fields; the
    // boundary ring rides along through the Dirichlet-eliminated rhs
    Rng rng(20240811);
    for (int n : {8, 16, 32}) {
        const GridSpec grid = GridSpec::vertex(n);
        double worst_rel = 0.0;
        const EllipticSystem sys_c = assemble_elliptic(Tensor<double>{}, grid);
        for (int trial = 0; trial < 20; ++trial) {
            Tensor<double> u(1, n, n), f(1, n, n), kappa(1, n, n);
            for (auto& v : u.data) v = rng.next_symmetric(1.0);
            for (auto& v : f.data) v = rng.next_symmetric(1.0);
            for (auto& v : kappa.data) v = 0.1 + rng.next_unit() * 4.0;
            const EllipticSystem sys_v = assemble_elliptic(kappa, grid);

            std::vector<double> ui(static_cast<std::size_t>(n - 2) * (n - 2));
            for (int i = 1; i <= n - 2; ++i)
                for (int j = 1; j <= n - 2; ++j)
                    ui[(i - 1) * (n - 2) + (j - 1)] = u.at(0, i, j);

            // residual(u, f) == A u_int - rhs(f, g=u) for both discretizations
            const Tensor<double> r_conv = residual_const(u, f, grid);
            const Tensor<double> r_var =
                residual_nonconst(u, kappa_to_dual(kappa), f, grid);
            const std::vector<double> au = sys_c.a.apply(ui);
            const std::vector<double> av = sys_v.a.apply(ui);
            const std::vector<double> bu = sys_c.rhs(f, u);
            const std::vector<double> bv = sys_v.rhs(f, u);
            for (int i = 0; i < n - 2; ++i)
                for (int j = 0; j < n - 2; ++j) {
                    const int row = i * (n - 2) + j;
                    const double mc = au[row] - bu[row];
                    const double mv = av[row] - bv[row];
                    const double scale =
                        std::max({std::abs(mc), std::abs(mv), 1.0 / (grid.h * grid.h)});
                    worst_rel = std::max(
                        {worst_rel, std::abs(r_conv.at(0, i, j) - mc) / scale,
                         std::abs(r_var.at(0, i, j) - mv) / scale});
                }
        }
        std::snprintf(buf, sizeof(buf), "max relative discrepancy %.3e", worst_rel);
        check("oracle_equivalence/n" + std::to_string(n), worst_rel <= 1e-13, buf);
    }

    // dual-grid construction and the checkerboard exponent
    {
        Tensor<double> kappa(1, 2, 2, 1.0);
        kappa.at(0, 1, 1) = 3.0;
        const Tensor<double> dual = kappa_to_dual(kappa);
        const bool ok = dual.at(0, 0, 1) == 1.0 && dual.at(0, 1, 0) == 1.0 &&
                        dual.at(0, 1, 2) == 1.5 && dual.at(0, 2, 1) == 1.5 &&
                        dual.at(0, 0, 0) == 0.0 && dual.at(0, 1, 1) == 0.0;
        check("dual_grid/harmonic_means", ok, "");

        const KelloggSolution sol = solve_kellogg_coefficients({5.0, 1.0, 5.0, 1.0});
        std::snprintf(buf, sizeof(buf), "beta %.6f", sol.beta);
        check("kellogg/beta", std::abs(sol.beta - 0.5354) <= 1e-3, buf);
        double worst = 0.0;
        const double quarter = 3.14159265358979323846 / 2.0;
        for (int i = 1; i <= 4; ++i) {
            const double before = i * quarter - 1e-9;
            const double after = i < 4 ? i * quarter + 1e-9 : 1e-9;
            worst = std::max(worst, std::abs(sol.mu(before) - sol.mu(after)));
        }
        std::snprintf(buf, sizeof(buf), "max interface jump %.3e", worst);
        check("kellogg/continuity", worst <= 1e-6, buf);
    }

    std::printf("%s (%d failure%s)\n", failures ? "VERIFICATION FAILED" : "verification ok",
                failures, failures == 1 ? "" : "s");
    return failures == 0;
}

}  // namespace fdnet
