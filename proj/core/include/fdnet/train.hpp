#pragma once

#include <cstdint>
#include <vector>

#include "fdnet/grid.hpp"
#include "fdnet/loss.hpp"
#include "fdnet/problems.hpp"
#include "fdnet/unet.hpp"

namespace fdnet {

/// How the two sum-of-squares loss terms combine into the training
/// objective: `sum` weighs the raw sums (the written form of the loss),
/// `mean` divides each term by its node count first. Training uses `mean`
/// by default; it is what the reference results are reproducible with.
enum class LossReduction { sum, mean };

/// Optimizer settings. Defaults follow the training protocol: Adam with
/// lr 1e-3 (elliptic) or 1e-4 (parabolic), L2 penalty 1e-7 folded into the
/// gradient, and the global gradient norm clipped to 1e-2.
template <typename T>
struct TrainConfig {
    T lr = T(1e-3);
    T beta1 = T(0.9);
    T beta2 = T(0.999);
    T eps = T(1e-7);
    T l2_penalty = T(1e-7);
    T grad_clip_norm = T(1e-2);
    int max_steps = 4000;
    std::uint64_t seed = 0;
    /// Negative means "use h^2/4 for the training grid".
    double alpha = -1.0;
    LossReduction reduction = LossReduction::mean;
    /// Rescale the elliptic input field to [-1,1] by its max magnitude.
    /// Off by default: the raw source is the faithful input.
    bool normalize_input = false;

    void validate() const {
        if (!(lr > T(0))) throw ConfigError("train: lr must be > 0");
        if (!(beta1 >= T(0) && beta1 < T(1)) || !(beta2 >= T(0) && beta2 < T(1)))
            throw ConfigError("train: Adam betas must lie in [0,1)");
        if (!(grad_clip_norm > T(0))) throw ConfigError("train: grad clip must be > 0");
        if (max_steps < 1) throw ConfigError("train: max_steps must be >= 1");
    }
};

/// Per-parameter Adam moments, shaped like the network parameters.
template <typename T>
struct AdamState {
    NetworkParams<T> m;
    NetworkParams<T> v;
    std::int64_t t = 0;

    static AdamState init(const NetworkParams<T>& params) {
        return {params.zeros_like(), params.zeros_like(), 0};
    }
};

template <typename T>
struct TrainResult {
    Tensor<T> best_prediction;
    T best_loss = T(0);
    std::vector<T> loss_history;
    std::vector<double> wall_ms;  // cumulative per iteration
    double wall_seconds = 0.0;
};

/// L2 penalty then global-norm clipping, in place:
/// g += 2*l2*theta; if ||g||_2 > clip, g *= clip/||g||_2 (norm over every
/// gradient entry of every layer).
template <typename T>
void clip_and_regularize(NetworkParams<T>& grads, const NetworkParams<T>& params,
                         const TrainConfig<T>& cfg);

/// One Adam update with bias correction; increments state.t.
template <typename T>
void adam_step(NetworkParams<T>& params, const NetworkParams<T>& grads,
               AdamState<T>& state, const TrainConfig<T>& cfg);

/// Steady-state training loop: feed f, minimize the unsupervised loss,
/// track the best prediction by loss value. Aborts with TrainingError on a
/// non-finite loss.
template <typename T>
TrainResult<T> train_elliptic(const ProblemSpec& problem, const GridSpec& grid,
                              const NetworkSpec& net_spec, const TrainConfig<T>& cfg);

/// Time marching: one inner optimization per step with the previous best
/// prediction as input and backward-Euler loss; weights warm-start across
/// steps (no reinitialization after the first step).
template <typename T>
std::vector<TrainResult<T>> train_parabolic(const ProblemSpec& problem,
                                            const GridSpec& grid,
                                            const NetworkSpec& net_spec,
                                            const TrainConfig<T>& cfg, double tau,
                                            int n_steps, int first_step_iters);

}  // namespace fdnet
