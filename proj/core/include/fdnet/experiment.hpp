#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fdnet/tensor.hpp"

namespace fdnet {

/// Axes of an experiment sweep; runs execute over the Cartesian product of
/// grid_sizes x depths x step_budgets x seeds.
struct ExperimentConfig {
    std::string problem = "bubble";
    std::vector<int> grid_sizes = {32};
    std::vector<int> depths = {3};
    std::vector<int> step_budgets = {4000};
    std::vector<std::uint64_t> seeds = {0};
    std::string activation = "identity";
    int channels = 32;
    int kernel_size = 5;
    double lr = -1.0;     // negative: 1e-3 steady / 1e-4 parabolic
    double alpha = -1.0;  // negative: h^2/4
    bool normalize_input = false;
    std::string precision = "single";  // or "double"
    // time-dependent axes
    double tau = 0.1;
    double t_final = 0.5;
    std::vector<double> report_times;  // defaults to {t_final}
    int first_step_iters = 1000;
    // node layout: "vertex" (N nodes per side) or "cell" (N cells per side)
    std::string grid_convention = "vertex";
    std::string out_dir = "out";
    bool full = false;  // include the heaviest sweep points
    int jobs = 1;

    void validate() const;
    std::vector<double> effective_report_times() const;
};

struct ErrorReportRow {
    std::string problem;
    int n = 0;
    int depth = 0;
    int steps = 0;
    std::uint64_t seed = 0;
    double t = 0.0;  // 0 for steady problems
    double norm_2h = 0.0;
    double norm_inf = 0.0;
    double final_loss = 0.0;
    double wall_s = 0.0;
    std::size_t param_count = 0;
};

struct ErrorReport {
    std::vector<ErrorReportRow> rows;
};

/// Train over the config product; per run writes loss_<tag>.csv and
/// {exact,pred,diff}_<tag>.nng/.csv dumps under out_dir, then report.csv.
ErrorReport run_experiment(const ExperimentConfig& config);

/// Same report produced by the classical solvers instead of training
/// (param_count 0, loss column 0).
ErrorReport run_baseline(const ExperimentConfig& config);

void write_report_csv(const std::string& path, const ErrorReport& report);
ErrorReport read_report_csv(const std::string& path);

/// Consistency suites behind the `verify` CLI subcommand: hand-coded source
/// terms vs high-order finite differences, convolution residuals vs
/// assembled operators, the dual-grid construction, and the checkerboard
/// singular exponent. Prints one line per check; returns false on any
/// failure.
bool run_verification(bool verbose);

}  // namespace fdnet
