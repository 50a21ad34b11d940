#pragma once

#include "fdnet/grid.hpp"
#include "fdnet/tensor.hpp"

namespace fdnet {

/// Five-point Laplacian stencil as a 1-in/1-out 3x3 valid kernel:
/// (1/h^2) * [[0,-1,0],[-1,4,-1],[0,-1,0]].
template <typename T>
Kernel<T> laplacian_kernel(T h);

/// The eight 5x5 stride-2 kernels acting on dual-grid fields: difference
/// kernels T (up/left/down/right) and interface-coefficient pickers P.
template <typename T>
struct TpKernels {
    Kernel<T> t_up, t_left, t_down, t_right;
    Kernel<T> p_up, p_left, p_down, p_right;
};

template <typename T>
TpKernels<T> tp_kernels();

/// Embed an n x n field into the (2n-1) x (2n-1) dual grid, writing entries
/// at positions with both indices even and zeros elsewhere.
template <typename T>
Tensor<T> dilate_field(const Tensor<T>& u);

/// Map nodal diffusion values onto the dual grid: dilate, fill each
/// edge-midpoint with the harmonic mean of its two axial neighbours, then
/// zero the original-node positions. All inputs must be positive.
template <typename T>
Tensor<T> kappa_to_dual(const Tensor<T>& kappa);

/// (K_lap * u) - f restricted to interior nodes; shape (1, n-2, n-2).
template <typename T>
Tensor<T> residual_const(const Tensor<T>& u, const Tensor<T>& f, const GridSpec& grid);

/// Divergence-form residual for piecewise-constant diffusion, evaluated via
/// the dual grid: stride-2 T/P convolutions, Hadamard combination, minus f
/// on the interior. kappa_dual must be the (2n-1) x (2n-1) output of
/// kappa_to_dual.
template <typename T>
Tensor<T> residual_nonconst(const Tensor<T>& u, const Tensor<T>& kappa_dual,
                            const Tensor<T>& f, const GridSpec& grid);

/// h * sqrt(sum over all nodes (a-b)^2), accumulated in double.
template <typename T>
double norm_2h(const Tensor<T>& exact, const Tensor<T>& approx, const GridSpec& grid);

/// max over all nodes |a-b|.
template <typename T>
double norm_inf(const Tensor<T>& exact, const Tensor<T>& approx);

}  // namespace fdnet
