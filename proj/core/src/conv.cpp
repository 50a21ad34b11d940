#include "fdnet/conv.hpp"

#include <algorithm>
#include <cstring>

#include <cblas.h>

extern "C" void openblas_set_num_threads(int);

namespace fdnet {

namespace {

// The GEMM shapes here are small enough that OpenBLAS thread handoff costs
// more than it saves; im2col is parallelized with OpenMP instead.
const bool kBlasSingleThread = [] {
    openblas_set_num_threads(1);
    return true;
}();

void gemm(int m, int n, int k, const float* a, const float* b, float* c, float beta) {
    cblas_sgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, m, n, k, 1.0f, a, k, b, n,
                beta, c, n);
}
void gemm(int m, int n, int k, const double* a, const double* b, double* c, double beta) {
    cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, m, n, k, 1.0, a, k, b, n,
                beta, c, n);
}
void gemm_bt(int m, int n, int k, const float* a, const float* b, float* c, float beta) {
    cblas_sgemm(CblasRowMajor, CblasNoTrans, CblasTrans, m, n, k, 1.0f, a, k, b, k,
                beta, c, n);
}
void gemm_bt(int m, int n, int k, const double* a, const double* b, double* c,
             double beta) {
    cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasTrans, m, n, k, 1.0, a, k, b, k,
                beta, c, n);
}

// Patch matrix for output rows [row0, row0+rows): entry ((ic,p,q), pos) holds
// the input tap feeding output position pos, zero when the tap falls outside.
// For stride 1 each (tap, output row) pair is one contiguous span of input,
// so the fill is memcpy-bound; strided convolutions take the scalar path.
template <typename T>
void im2col_rows(const Tensor<T>& in, int k_rows, int k_cols, int stride, int pad_r,
                 int pad_c, int out_rows, int out_cols, int row0, int rows,
                 std::vector<T>& buf) {
    const int taps = in.channels * k_rows * k_cols;
    const std::size_t count = static_cast<std::size_t>(rows) * out_cols;
    buf.resize(static_cast<std::size_t>(taps) * count);
    (void)out_rows;

#pragma omp parallel for schedule(static) if (taps >= 64)
    for (int tap = 0; tap < taps; ++tap) {
        const int ic = tap / (k_rows * k_cols);
        const int p = (tap / k_cols) % k_rows;
        const int q = tap % k_cols;
        const T* src = in.channel(ic);
        T* dst = buf.data() + static_cast<std::size_t>(tap) * count;
        if (stride == 1) {
            for (int r = 0; r < rows; ++r, dst += out_cols) {
                const int ir = row0 + r - pad_r + p;
                if (ir < 0 || ir >= in.rows) {
                    std::fill(dst, dst + out_cols, T(0));
                    continue;
                }
                // output column t reads input column t - pad_c + q
                const int lead = std::max(0, pad_c - q);
                const int tail_start = std::min(out_cols, in.cols + pad_c - q);
                if (lead > 0) std::fill(dst, dst + lead, T(0));
                if (tail_start > lead)
                    std::memcpy(dst + lead,
                                src + static_cast<std::size_t>(ir) * in.cols +
                                    (lead - pad_c + q),
                                sizeof(T) * (tail_start - lead));
                if (tail_start < out_cols)
                    std::fill(dst + std::max(lead, tail_start), dst + out_cols, T(0));
            }
        } else {
            for (int r = 0; r < rows; ++r, dst += out_cols) {
                const int ir = (row0 + r) * stride - pad_r + p;
                if (ir < 0 || ir >= in.rows) {
                    std::fill(dst, dst + out_cols, T(0));
                    continue;
                }
                const T* row_src = src + static_cast<std::size_t>(ir) * in.cols;
                for (int t = 0; t < out_cols; ++t) {
                    const int jc = t * stride - pad_c + q;
                    dst[t] = (jc >= 0 && jc < in.cols) ? row_src[jc] : T(0);
                }
            }
        }
    }
}

constexpr std::size_t kChunkBudget = 1u << 22;  // scratch entries per chunk

int rows_per_chunk(int taps, int out_cols) {
    return std::max(1, static_cast<int>(kChunkBudget / (static_cast<std::size_t>(taps) *
                                                        out_cols)));
}

}  // namespace

ConvDims conv_output_dims(int rows, int cols, int k_rows, int k_cols, int stride,
                          Padding padding) {
    ConvDims d;
    d.pad_r = padding == Padding::same_zero ? (k_rows - 1) / 2 : 0;
    d.pad_c = padding == Padding::same_zero ? (k_cols - 1) / 2 : 0;
    const int eff_rows = rows + 2 * d.pad_r;
    const int eff_cols = cols + 2 * d.pad_c;
    if (eff_rows < k_rows || eff_cols < k_cols)
        throw DimensionError("conv2d: input " + std::to_string(rows) + "x" +
                             std::to_string(cols) + " smaller than kernel " +
                             std::to_string(k_rows) + "x" + std::to_string(k_cols));
    d.out_rows = (eff_rows - k_rows) / stride + 1;
    d.out_cols = (eff_cols - k_cols) / stride + 1;
    return d;
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Kernel<T>& kernel,
                 const std::vector<T>* bias) {
    if (input.channels != kernel.in_channels)
        throw DimensionError("conv2d: input channels " + input.shape_str() +
                             " do not match kernel in_channels " +
                             std::to_string(kernel.in_channels));
    if (bias && static_cast<int>(bias->size()) != kernel.out_channels)
        throw DimensionError("conv2d: bias size " + std::to_string(bias->size()) +
                             " does not match out_channels " +
                             std::to_string(kernel.out_channels));
    const ConvDims d = conv_output_dims(input.rows, input.cols, kernel.k_rows,
                                        kernel.k_cols, kernel.stride, kernel.padding);
    Tensor<T> out(kernel.out_channels, d.out_rows, d.out_cols);

    const int taps = kernel.in_channels * kernel.k_rows * kernel.k_cols;
    const int chunk_rows = rows_per_chunk(taps, d.out_cols);

    static thread_local std::vector<T> scratch;
    static thread_local std::vector<T> block;
    for (int row0 = 0; row0 < d.out_rows; row0 += chunk_rows) {
        const int rows = std::min(chunk_rows, d.out_rows - row0);
        const int count = rows * d.out_cols;
        im2col_rows(input, kernel.k_rows, kernel.k_cols, kernel.stride, d.pad_r, d.pad_c,
                    d.out_rows, d.out_cols, row0, rows, scratch);
        block.resize(static_cast<std::size_t>(kernel.out_channels) * count);
        // out[oc, pos] = sum_tap W[oc, tap] * patch[tap, pos]
        gemm(kernel.out_channels, count, taps, kernel.data.data(), scratch.data(),
             block.data(), T(0));
        for (int oc = 0; oc < kernel.out_channels; ++oc)
            std::memcpy(out.channel(oc) + static_cast<std::size_t>(row0) * d.out_cols,
                        block.data() + static_cast<std::size_t>(oc) * count,
                        sizeof(T) * count);
    }
    if (bias) {
        const int total = d.out_rows * d.out_cols;
        for (int oc = 0; oc < kernel.out_channels; ++oc) {
            T* p = out.channel(oc);
            const T b = (*bias)[oc];
            for (int i = 0; i < total; ++i) p[i] += b;
        }
    }
    return out;
}

template <typename T>
Tensor<T> conv2d_grad_input(const Tensor<T>& upstream, const Kernel<T>& kernel,
                            int in_rows, int in_cols) {
    Tensor<T> grad(kernel.in_channels, in_rows, in_cols);
    const ConvDims d = conv_output_dims(in_rows, in_cols, kernel.k_rows, kernel.k_cols,
                                        kernel.stride, kernel.padding);
    if (upstream.channels != kernel.out_channels || upstream.rows != d.out_rows ||
        upstream.cols != d.out_cols)
        throw DimensionError("conv2d_grad_input: upstream " + upstream.shape_str() +
                             " does not match forward output shape");

    if (kernel.stride == 1) {
        // grad_in = correlation of upstream with the flipped, channel-swapped
        // kernel at complementary padding; expressed as another im2col GEMM.
        const int k = kernel.k_rows;
        const int kc = kernel.k_cols;
        static thread_local std::vector<T> flipped;
        flipped.resize(kernel.data.size());
        for (int oc = 0; oc < kernel.out_channels; ++oc)
            for (int ic = 0; ic < kernel.in_channels; ++ic)
                for (int p = 0; p < k; ++p)
                    for (int q = 0; q < kc; ++q)
                        flipped[((static_cast<std::size_t>(ic) * kernel.out_channels + oc) * k +
                                 (k - 1 - p)) * kc + (kc - 1 - q)] = kernel.at(oc, ic, p, q);

        const int pad_r = k - 1 - d.pad_r;
        const int pad_c = kc - 1 - d.pad_c;
        const int taps = kernel.out_channels * k * kc;
        const int chunk_rows = rows_per_chunk(taps, in_cols);
        static thread_local std::vector<T> scratch;
        static thread_local std::vector<T> block;
        for (int row0 = 0; row0 < in_rows; row0 += chunk_rows) {
            const int rows = std::min(chunk_rows, in_rows - row0);
            const int count = rows * in_cols;
            im2col_rows(upstream, k, kc, 1, pad_r, pad_c, in_rows, in_cols, row0, rows,
                        scratch);
            block.resize(static_cast<std::size_t>(kernel.in_channels) * count);
            gemm(kernel.in_channels, count, taps, flipped.data(), scratch.data(),
                 block.data(), T(0));
            for (int ic = 0; ic < kernel.in_channels; ++ic)
                std::memcpy(grad.channel(ic) + static_cast<std::size_t>(row0) * in_cols,
                            block.data() + static_cast<std::size_t>(ic) * count,
                            sizeof(T) * count);
        }
        return grad;
    }

    // Strided case: gather taps whose forward window touched each input cell.
    const int s = kernel.stride;
    for (int ic = 0; ic < kernel.in_channels; ++ic) {
        T* gp = grad.channel(ic);
        for (int ir = 0; ir < in_rows; ++ir) {
            for (int jc = 0; jc < in_cols; ++jc) {
                T acc = T(0);
                for (int p = 0; p < kernel.k_rows; ++p) {
                    const int num_r = ir + d.pad_r - p;
                    if (num_r < 0 || num_r % s) continue;
                    const int orow = num_r / s;
                    if (orow >= d.out_rows) continue;
                    for (int q = 0; q < kernel.k_cols; ++q) {
                        const int num_c = jc + d.pad_c - q;
                        if (num_c < 0 || num_c % s) continue;
                        const int ocol = num_c / s;
                        if (ocol >= d.out_cols) continue;
                        for (int oc = 0; oc < kernel.out_channels; ++oc)
                            acc += kernel.at(oc, ic, p, q) * upstream.at(oc, orow, ocol);
                    }
                }
                gp[static_cast<std::size_t>(ir) * in_cols + jc] = acc;
            }
        }
    }
    return grad;
}

template <typename T>
void conv2d_grad_kernel(const Tensor<T>& upstream, const Tensor<T>& input,
                        const Kernel<T>& kernel, Kernel<T>& kernel_grad,
                        std::vector<T>* bias_grad) {
    const ConvDims d = conv_output_dims(input.rows, input.cols, kernel.k_rows,
                                        kernel.k_cols, kernel.stride, kernel.padding);
    if (upstream.channels != kernel.out_channels || upstream.rows != d.out_rows ||
        upstream.cols != d.out_cols)
        throw DimensionError("conv2d_grad_kernel: upstream " + upstream.shape_str() +
                             " does not match forward output shape");

    const int taps = kernel.in_channels * kernel.k_rows * kernel.k_cols;
    const int chunk_rows = rows_per_chunk(taps, d.out_cols);
    static thread_local std::vector<T> scratch;
    static thread_local std::vector<T> up_block;
    for (int row0 = 0; row0 < d.out_rows; row0 += chunk_rows) {
        const int rows = std::min(chunk_rows, d.out_rows - row0);
        const int count = rows * d.out_cols;
        im2col_rows(input, kernel.k_rows, kernel.k_cols, kernel.stride, d.pad_r, d.pad_c,
                    d.out_rows, d.out_cols, row0, rows, scratch);
        up_block.resize(static_cast<std::size_t>(kernel.out_channels) * count);
        for (int oc = 0; oc < kernel.out_channels; ++oc)
            std::memcpy(up_block.data() + static_cast<std::size_t>(oc) * count,
                        upstream.channel(oc) + static_cast<std::size_t>(row0) * d.out_cols,
                        sizeof(T) * count);
        // grad_W[oc, tap] += sum_pos up[oc, pos] * patch[tap, pos]
        gemm_bt(kernel.out_channels, taps, count, up_block.data(), scratch.data(),
                kernel_grad.data.data(), T(1));
    }
    if (bias_grad) {
        const int total = d.out_rows * d.out_cols;
        for (int oc = 0; oc < kernel.out_channels; ++oc) {
            double acc = 0.0;  // reductions accumulate in double
            const T* p = upstream.channel(oc);
            for (int i = 0; i < total; ++i) acc += p[i];
            (*bias_grad)[oc] += static_cast<T>(acc);
        }
    }
}

template Tensor<float> conv2d(const Tensor<float>&, const Kernel<float>&,
                              const std::vector<float>*);
template Tensor<double> conv2d(const Tensor<double>&, const Kernel<double>&,
                               const std::vector<double>*);
template Tensor<float> conv2d_grad_input(const Tensor<float>&, const Kernel<float>&, int,
                                         int);
template Tensor<double> conv2d_grad_input(const Tensor<double>&, const Kernel<double>&,
                                          int, int);
template void conv2d_grad_kernel(const Tensor<float>&, const Tensor<float>&,
                                 const Kernel<float>&, Kernel<float>&,
                                 std::vector<float>*);
template void conv2d_grad_kernel(const Tensor<double>&, const Tensor<double>&,
                                 const Kernel<double>&, Kernel<double>&,
                                 std::vector<double>*);

}  // namespace fdnet
