#include "fdnet/train.hpp"

#include <chrono>
#include <cmath>

#include "fdnet/stencil.hpp"

namespace fdnet {

namespace {

template <typename T, typename Fn>
void for_each_array(NetworkParams<T>& p, Fn&& fn) {
    for (auto& l : p.layers) {
        fn(l.weights.data.data(), l.weights.data.size());
        fn(l.bias.data(), l.bias.size());
    }
}

template <typename T, typename Fn>
void for_each_array(NetworkParams<T>& a, const NetworkParams<T>& b, Fn&& fn) {
    for (std::size_t i = 0; i < a.layers.size(); ++i) {
        fn(a.layers[i].weights.data.data(), b.layers[i].weights.data.data(),
           a.layers[i].weights.data.size());
        fn(a.layers[i].bias.data(), b.layers[i].bias.data(), a.layers[i].bias.size());
    }
}

double now_ms() {
    using namespace std::chrono;
    return duration<double, std::milli>(steady_clock::now().time_since_epoch()).count();
}

template <typename T>
double alpha_for(const TrainConfig<T>& cfg, const GridSpec& grid) {
    return cfg.alpha >= 0.0 ? cfg.alpha : grid.h * grid.h / 4.0;
}

/// Training objective from the raw term pair. The mean form divides each
/// term by its node count, which is what makes the optimizer reach the
/// reference accuracy; the sum form is the loss exactly as written.
template <typename T>
typename Tape<T>::Var combine_terms(Tape<T>& tape, const LossTerms<T>& terms,
                                    const GridSpec& grid, T alpha,
                                    LossReduction reduction) {
    if (reduction == LossReduction::sum) return terms.total;
    const T n_int = static_cast<T>((grid.n - 2) * (grid.n - 2));
    const T n_bnd = static_cast<T>(4 * (grid.n - 1));
    return tape.scale_add(terms.interior, terms.boundary, alpha / n_int,
                          (T(1) - alpha) / n_bnd);
}

}  // namespace

template <typename T>
void clip_and_regularize(NetworkParams<T>& grads, const NetworkParams<T>& params,
                         const TrainConfig<T>& cfg) {
    if (cfg.l2_penalty != T(0)) {
        auto& g = grads;
        for (std::size_t i = 0; i < g.layers.size(); ++i) {
            const auto& pw = params.layers[i].weights.data;
            auto& gw = g.layers[i].weights.data;
            for (std::size_t k = 0; k < gw.size(); ++k)
                gw[k] += T(2) * cfg.l2_penalty * pw[k];
            const auto& pb = params.layers[i].bias;
            auto& gb = g.layers[i].bias;
            for (std::size_t k = 0; k < gb.size(); ++k)
                gb[k] += T(2) * cfg.l2_penalty * pb[k];
        }
    }
    double norm_sq = 0.0;
    for_each_array(grads, [&](T* g, std::size_t n) {
        for (std::size_t k = 0; k < n; ++k) norm_sq += double(g[k]) * double(g[k]);
    });
    const double norm = std::sqrt(norm_sq);
    if (norm > double(cfg.grad_clip_norm)) {
        const T scale = static_cast<T>(double(cfg.grad_clip_norm) / norm);
        for_each_array(grads, [&](T* g, std::size_t n) {
            for (std::size_t k = 0; k < n; ++k) g[k] *= scale;
        });
    }
}

template <typename T>
void adam_step(NetworkParams<T>& params, const NetworkParams<T>& grads,
               AdamState<T>& state, const TrainConfig<T>& cfg) {
    state.t += 1;
    const T bc1 = T(1) - static_cast<T>(std::pow(double(cfg.beta1), double(state.t)));
    const T bc2 = T(1) - static_cast<T>(std::pow(double(cfg.beta2), double(state.t)));
    for (std::size_t i = 0; i < params.layers.size(); ++i) {
        auto update = [&](T* p, const T* g, T* m, T* v, std::size_t n) {
            for (std::size_t k = 0; k < n; ++k) {
                m[k] = cfg.beta1 * m[k] + (T(1) - cfg.beta1) * g[k];
                v[k] = cfg.beta2 * v[k] + (T(1) - cfg.beta2) * g[k] * g[k];
                const T m_hat = m[k] / bc1;
                const T v_hat = v[k] / bc2;
                p[k] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
            }
        };
        update(params.layers[i].weights.data.data(), grads.layers[i].weights.data.data(),
               state.m.layers[i].weights.data.data(), state.v.layers[i].weights.data.data(),
               params.layers[i].weights.data.size());
        update(params.layers[i].bias.data(), grads.layers[i].bias.data(),
               state.m.layers[i].bias.data(), state.v.layers[i].bias.data(),
               params.layers[i].bias.size());
    }
}

namespace {

/// Shared inner loop of both training algorithms: repeated forward, loss,
/// backward, clip, Adam; best-by-loss tracking.
template <typename T, typename LossBuilder>
TrainResult<T> run_loop(const NetworkSpec& net_spec, NetworkParams<T>& params,
                        NetworkParams<T>& grads, AdamState<T>& state,
                        const TrainConfig<T>& cfg, int iters, const Tensor<T>& input,
                        LossBuilder&& build_loss, const char* label) {
    TrainResult<T> result;
    result.best_loss = std::numeric_limits<T>::infinity();
    result.loss_history.reserve(iters);
    result.wall_ms.reserve(iters);
    const double start = now_ms();

    for (int k = 0; k < iters; ++k) {
        Tape<T> tape;
        auto in = tape.leaf(input);
        auto u_hat = unet_forward(tape, net_spec, params, &grads, in);
        auto loss = build_loss(tape, u_hat);
        const T loss_value = tape.scalar(loss);
        if (!std::isfinite(double(loss_value)))
            throw TrainingError(std::string(label) + ": non-finite loss " +
                                std::to_string(double(loss_value)) + " at iteration " +
                                std::to_string(k));
        if (loss_value < result.best_loss) {
            result.best_loss = loss_value;
            result.best_prediction = tape.value(u_hat);
        }
        tape.backward(loss);
        clip_and_regularize(grads, params, cfg);
        adam_step(params, grads, state, cfg);
        grads.set_zero();
        result.loss_history.push_back(loss_value);
        result.wall_ms.push_back(now_ms() - start);
    }
    result.wall_seconds = (now_ms() - start) / 1000.0;
    return result;
}

}  // namespace

template <typename T>
TrainResult<T> train_elliptic(const ProblemSpec& problem, const GridSpec& grid,
                              const NetworkSpec& net_spec, const TrainConfig<T>& cfg) {
    if (problem.time_dependent)
        throw ConfigError("train_elliptic: '" + problem.name + "' is time-dependent");
    cfg.validate();
    NetworkSpec spec = net_spec;
    spec.input_rows = grid.n;
    spec.input_cols = grid.n;
    spec.validate();

    const double t = problem.t0;
    const Tensor<T> f = sample_field<T>(grid, [&](double x, double y) {
        return problem.source_f(x, y, t);
    });
    const Tensor<T> g = sample_field<T>(grid, [&](double x, double y) {
        return problem.exact_u(x, y, t);
    });

    Tensor<T> input = f;
    if (cfg.normalize_input) {
        T peak = T(0);
        for (const T& v : input.data) peak = std::max(peak, std::abs(v));
        if (peak > T(0))
            for (T& v : input.data) v /= peak;
    }

    const T alpha = static_cast<T>(alpha_for(cfg, grid));
    Tensor<T> kappa_dual;
    if (!problem.constant_diffusion()) {
        const Tensor<T> kappa = sample_field<T>(grid, problem.kappa);
        kappa_dual = kappa_to_dual(kappa);
    }

    NetworkParams<T> params = build_network<T>(spec, cfg.seed);
    NetworkParams<T> grads = params.zeros_like();
    AdamState<T> state = AdamState<T>::init(params);

    auto build_loss = [&](Tape<T>& tape, typename Tape<T>::Var u_hat) {
        const LossTerms<T> terms =
            problem.constant_diffusion()
                ? loss_elliptic_const(tape, u_hat, f, g, grid, alpha)
                : loss_elliptic_nonconst(tape, u_hat, kappa_dual, f, g, grid, alpha);
        return combine_terms(tape, terms, grid, alpha, cfg.reduction);
    };
    return run_loop(spec, params, grads, state, cfg, cfg.max_steps, input, build_loss,
                    "train_elliptic");
}

template <typename T>
std::vector<TrainResult<T>> train_parabolic(const ProblemSpec& problem,
                                            const GridSpec& grid,
                                            const NetworkSpec& net_spec,
                                            const TrainConfig<T>& cfg, double tau,
                                            int n_steps, int first_step_iters) {
    if (!problem.time_dependent)
        throw ConfigError("train_parabolic: '" + problem.name + "' is steady");
    if (!(tau > 0.0)) throw ConfigError("train_parabolic: tau must be > 0");
    if (n_steps < 1 || first_step_iters < 1)
        throw ConfigError("train_parabolic: step counts must be >= 1");
    cfg.validate();
    NetworkSpec spec = net_spec;
    spec.input_rows = grid.n;
    spec.input_cols = grid.n;
    spec.validate();

    const T alpha = static_cast<T>(alpha_for(cfg, grid));
    NetworkParams<T> params = build_network<T>(spec, cfg.seed);
    NetworkParams<T> grads = params.zeros_like();
    AdamState<T> state = AdamState<T>::init(params);

    Tensor<T> u_prev = sample_field<T>(grid, [&](double x, double y) {
        return problem.exact_u(x, y, problem.t0);
    });

    std::vector<TrainResult<T>> results;
    results.reserve(n_steps);
    for (int n = 1; n <= n_steps; ++n) {
        const double t = problem.t0 + n * tau;
        const Tensor<T> f = sample_field<T>(grid, [&](double x, double y) {
            return problem.source_f(x, y, t);
        });
        const Tensor<T> g = sample_field<T>(grid, [&](double x, double y) {
            return problem.exact_u(x, y, t);
        });
        auto build_loss = [&](Tape<T>& tape, typename Tape<T>::Var u_hat) {
            const LossTerms<T> terms = loss_parabolic(tape, u_hat, u_prev, f, g, grid,
                                                      alpha, static_cast<T>(tau));
            return combine_terms(tape, terms, grid, alpha, cfg.reduction);
        };
        const int iters = n == 1 ? first_step_iters : cfg.max_steps;
        TrainResult<T> step;
        try {
            step = run_loop(spec, params, grads, state, cfg, iters, u_prev, build_loss,
                            "train_parabolic");
        } catch (const TrainingError& e) {
            throw TrainingError(std::string(e.what()) + " (time step " +
                                std::to_string(n) + ")");
        }
        u_prev = step.best_prediction;
        results.push_back(std::move(step));
    }
    return results;
}

#define FDNET_INSTANTIATE(T)                                                            \
    template void clip_and_regularize(NetworkParams<T>&, const NetworkParams<T>&,       \
                                      const TrainConfig<T>&);                           \
    template void adam_step(NetworkParams<T>&, const NetworkParams<T>&, AdamState<T>&,  \
                            const TrainConfig<T>&);                                     \
    template TrainResult<T> train_elliptic(const ProblemSpec&, const GridSpec&,         \
                                           const NetworkSpec&, const TrainConfig<T>&);  \
    template std::vector<TrainResult<T>> train_parabolic(                               \
        const ProblemSpec&, const GridSpec&, const NetworkSpec&, const TrainConfig<T>&, \
        double, int, int);

FDNET_INSTANTIATE(float)
FDNET_INSTANTIATE(double)
#undef FDNET_INSTANTIATE

}  // namespace fdnet
