#pragma once

#include "fdnet/autodiff.hpp"
#include "fdnet/grid.hpp"
#include "fdnet/tensor.hpp"

namespace fdnet {

enum class LossVariant { elliptic_const, elliptic_nonconst, parabolic };

/// Weighting and variant selection for the unsupervised losses. The default
/// weight alpha = h^2/4 balances the h^-4 scaling of the squared stencil
/// residual against the boundary penalty.
template <typename T>
struct LossConfig {
    T alpha;
    LossVariant variant = LossVariant::elliptic_const;
    T tau = T(0);

    static T default_alpha(const GridSpec& grid) {
        return static_cast<T>(grid.h * grid.h / 4.0);
    }

    void validate() const {
        if (!(alpha > T(0)) || !(alpha < T(1)))
            throw ConfigError("loss: alpha must lie in (0,1)");
        if (variant == LossVariant::parabolic && !(tau > T(0)))
            throw ConfigError("loss: parabolic variant needs tau > 0");
    }
};

/// The weighted interior/boundary pair making up a loss value:
/// total = alpha * interior + (1 - alpha) * boundary. Both raw terms are
/// exposed so callers can re-weight without recomputation.
template <typename T>
struct LossTerms {
    typename Tape<T>::Var total;
    typename Tape<T>::Var interior;
    typename Tape<T>::Var boundary;
};

/// Sum-of-squares residual of the five-point scheme on the interior plus the
/// weighted boundary mismatch. All sums, not means. Differentiable in u_hat;
/// f and g enter as constants.
template <typename T>
LossTerms<T> loss_elliptic_const(Tape<T>& tape, typename Tape<T>::Var u_hat,
                                 const Tensor<T>& f, const Tensor<T>& g,
                                 const GridSpec& grid, T alpha);

/// Divergence-form variant: the interior residual runs through the dilation
/// and the stride-2 dual-grid kernels against kappa_dual (from
/// kappa_to_dual).
template <typename T>
LossTerms<T> loss_elliptic_nonconst(Tape<T>& tape, typename Tape<T>::Var u_hat,
                                    const Tensor<T>& kappa_dual, const Tensor<T>& f,
                                    const Tensor<T>& g, const GridSpec& grid, T alpha);

/// Backward Euler residual at one time step. u_prev is data, not
/// differentiated through.
template <typename T>
LossTerms<T> loss_parabolic(Tape<T>& tape, typename Tape<T>::Var u_hat_n,
                            const Tensor<T>& u_prev, const Tensor<T>& f_n,
                            const Tensor<T>& g_n, const GridSpec& grid, T alpha, T tau);

}  // namespace fdnet
