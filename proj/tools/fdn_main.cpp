// fdn: train small linear convolutional networks against finite difference
// residuals, run the classical reference solvers, and render result grids.
//
//   fdn train    --problem bubble --n 32 --depth 3 --steps 4000
//   fdn baseline --problem peak --n 32 --n 64 --grid cell
//   fdn render   out/pred_bubble_n32_d3_m4000_s0.nng heatmap.png
//   fdn verify
//
// Every flag can also come from an INI config file (--config) with one
// section per subcommand ([train], [baseline]); command-line values win.

#include <cstdio>
#include <exception>

#include <CLI11.hpp>

#include "fdnet/experiment.hpp"
#include "fdnet/io.hpp"

namespace {

void print_report(const fdnet::ErrorReport& report) {
    std::printf("%-10s %5s %3s %6s %5s %6s %12s %12s %12s %9s %9s\n", "problem", "n", "d",
                "steps", "seed", "t", "norm_2h", "norm_inf", "loss", "wall_s", "params");
    for (const auto& r : report.rows)
        std::printf("%-10s %5d %3d %6d %5llu %6.2f %12.4e %12.4e %12.4e %9.2f %9zu\n",
                    r.problem.c_str(), r.n, r.depth, r.steps,
                    static_cast<unsigned long long>(r.seed), r.t, r.norm_2h, r.norm_inf,
                    r.final_loss, r.wall_s, r.param_count);
}

void add_common_flags(CLI::App* cmd, fdnet::ExperimentConfig& cfg) {
    cmd->add_option("--problem", cfg.problem, "benchmark problem name");
    cmd->add_option("--n", cfg.grid_sizes, "grid size(s)");
    cmd->add_option("--tau", cfg.tau, "time step (parabolic)");
    cmd->add_option("--t-final", cfg.t_final, "final time (parabolic)");
    cmd->add_option("--report-times", cfg.report_times,
                    "times to report errors at (default: t-final)");
    cmd->add_option("--grid", cfg.grid_convention,
                    "node layout: vertex (N nodes/side) or cell (N cells/side)");
    cmd->add_option("--out", cfg.out_dir, "output directory");
    cmd->add_option("--jobs", cfg.jobs, "parallel runs");
    cmd->add_flag("--full", cfg.full, "include the heaviest sweep points");
    cmd->fallthrough(true);  // lets --config appear after the subcommand
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"finite-difference networks workbench"};
    app.require_subcommand(1);
    app.set_config("--config", "",
                   "INI config file, one section per subcommand; command line wins");
    app.allow_config_extras(CLI::config_extras_mode::ignore);

    fdnet::ExperimentConfig train_cfg;
    CLI::App* train = app.add_subcommand("train", "run the unsupervised training sweep");
    add_common_flags(train, train_cfg);
    train->add_option("--depth", train_cfg.depths, "U-Net depth(s)");
    train->add_option("--steps", train_cfg.step_budgets, "optimization step budget(s)");
    train->add_option("--seed", train_cfg.seeds, "seed(s)");
    train->add_option("--lr", train_cfg.lr, "learning rate (default 1e-3/1e-4)");
    train->add_option("--alpha", train_cfg.alpha, "loss weight (default h^2/4)");
    train->add_option("--activation", train_cfg.activation,
                      "identity|relu|tanh|swish");
    train->add_option("--channels", train_cfg.channels, "feature channels per layer");
    train->add_option("--precision", train_cfg.precision, "single|double");
    train->add_option("--first-step-iters", train_cfg.first_step_iters,
                      "optimization steps in the first time step");
    train->add_flag("--normalize-input", train_cfg.normalize_input,
                    "rescale the input field to [-1,1]");

    fdnet::ExperimentConfig base_cfg;
    CLI::App* baseline =
        app.add_subcommand("baseline", "classical finite difference reference errors");
    add_common_flags(baseline, base_cfg);

    CLI::App* render = app.add_subcommand("render", "grid dump -> heatmap image");
    std::string grid_path, image_path;
    render->add_option("grid", grid_path, "input .nng grid dump")->required();
    render->add_option("image", image_path, "output .png path")->required();

    CLI::App* verify =
        app.add_subcommand("verify", "source-term and operator consistency suites");
    bool quiet = false;
    verify->add_flag("--quiet", quiet, "print failures only");

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) {
            print_report(fdnet::run_experiment(train_cfg));
            std::printf("report written to %s/report.csv\n", train_cfg.out_dir.c_str());
        } else if (baseline->parsed()) {
            print_report(fdnet::run_baseline(base_cfg));
            std::printf("report written to %s/report.csv\n", base_cfg.out_dir.c_str());
        } else if (render->parsed()) {
            fdnet::render_heatmap(grid_path, image_path);
            std::printf("wrote %s (+ .txt sidecar)\n", image_path.c_str());
        } else if (verify->parsed()) {
            if (!fdnet::run_verification(!quiet)) return 1;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
