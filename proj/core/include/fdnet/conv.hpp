#pragma once

#include <vector>

#include "fdnet/tensor.hpp"

namespace fdnet {

struct ConvDims {
    int out_rows = 0;
    int out_cols = 0;
    int pad_r = 0;
    int pad_c = 0;
};

/// Output geometry of a convolution; throws DimensionError when the input
/// is too small for a valid window.
ConvDims conv_output_dims(int rows, int cols, int k_rows, int k_cols, int stride,
                          Padding padding);

/// Cross-correlation of a multi-channel input with a kernel bank:
///   out[oc](i,j) = sum_ic sum_pq K[oc][ic](p,q) * in[ic](i*s - pad + p, j*s - pad + q)
/// plus an optional per-output-channel bias. Out-of-range taps read zero
/// (same_zero padding) or are never touched (valid padding). Entries are
/// accumulated in a fixed order so repeated runs are bit-identical.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Kernel<T>& kernel,
                 const std::vector<T>* bias = nullptr);

/// Adjoint of conv2d with respect to the input.
template <typename T>
Tensor<T> conv2d_grad_input(const Tensor<T>& upstream, const Kernel<T>& kernel,
                            int in_rows, int in_cols);

/// Adjoint of conv2d with respect to the kernel (and bias); accumulates into
/// the provided sinks.
template <typename T>
void conv2d_grad_kernel(const Tensor<T>& upstream, const Tensor<T>& input,
                        const Kernel<T>& kernel, Kernel<T>& kernel_grad,
                        std::vector<T>* bias_grad);

}  // namespace fdnet
