#include "fdnet/stencil.hpp"

#include <cmath>
#include <stdexcept>

#include "fdnet/conv.hpp"

namespace fdnet {

template <typename T>
Kernel<T> laplacian_kernel(T h) {
    if (!(h > T(0))) throw std::domain_error("laplacian_kernel: spacing must be > 0");
    Kernel<T> k(1, 1, 3, 3, 1, Padding::valid);
    const T s = T(1) / (h * h);
    k.at(0, 0, 1, 1) = T(4) * s;
    k.at(0, 0, 0, 1) = -s;
    k.at(0, 0, 2, 1) = -s;
    k.at(0, 0, 1, 0) = -s;
    k.at(0, 0, 1, 2) = -s;
    return k;
}

template <typename T>
TpKernels<T> tp_kernels() {
    auto blank = [] { return Kernel<T>(1, 1, 5, 5, 2, Padding::valid); };
    TpKernels<T> k{blank(), blank(), blank(), blank(),
                   blank(), blank(), blank(), blank()};
    k.t_up.at(0, 0, 0, 2) = T(1);
    k.t_up.at(0, 0, 2, 2) = T(-1);
    k.p_up.at(0, 0, 1, 2) = T(1);
    // t_left = -transpose(t_up), p_left = transpose(p_up)
    k.t_left.at(0, 0, 2, 0) = T(-1);
    k.t_left.at(0, 0, 2, 2) = T(1);
    k.p_left.at(0, 0, 2, 1) = T(1);
    k.t_down.at(0, 0, 2, 2) = T(1);
    k.t_down.at(0, 0, 4, 2) = T(-1);
    k.p_down.at(0, 0, 3, 2) = T(1);
    // t_right = -transpose(t_down), p_right = transpose(p_down)
    k.t_right.at(0, 0, 2, 2) = T(-1);
    k.t_right.at(0, 0, 2, 4) = T(1);
    k.p_right.at(0, 0, 2, 3) = T(1);
    return k;
}

template <typename T>
Tensor<T> dilate_field(const Tensor<T>& u) {
    if (u.rows < 2 || u.cols < 2)
        throw DimensionError("dilate_field: input " + u.shape_str() +
                             " must be at least 2x2");
    Tensor<T> out(u.channels, 2 * u.rows - 1, 2 * u.cols - 1);
    for (int c = 0; c < u.channels; ++c)
        for (int r = 0; r < u.rows; ++r)
            for (int k = 0; k < u.cols; ++k)
                out.at(c, 2 * r, 2 * k) = u.at(c, r, k);
    return out;
}

template <typename T>
Tensor<T> kappa_to_dual(const Tensor<T>& kappa) {
    for (const T& v : kappa.data)
        if (!(v > T(0)))
            throw std::domain_error(
                "kappa_to_dual: diffusion values must be positive (harmonic mean "
                "undefined otherwise)");
    Tensor<T> dual = dilate_field(kappa);
    const int m = dual.rows;
    // edge midpoints have exactly one odd index; both axial neighbours are
    // original-node positions
    for (int r = 0; r < m; ++r) {
        for (int k = 0; k < dual.cols; ++k) {
            const bool r_odd = r % 2 != 0;
            const bool k_odd = k % 2 != 0;
            if (r_odd == k_odd) continue;
            const T a = r_odd ? dual.at(0, r - 1, k) : dual.at(0, r, k - 1);
            const T b = r_odd ? dual.at(0, r + 1, k) : dual.at(0, r, k + 1);
            dual.at(0, r, k) = T(2) / (T(1) / a + T(1) / b);
        }
    }
    for (int r = 0; r < m; r += 2)
        for (int k = 0; k < dual.cols; k += 2) dual.at(0, r, k) = T(0);
    return dual;
}

template <typename T>
Tensor<T> residual_const(const Tensor<T>& u, const Tensor<T>& f, const GridSpec& grid) {
    if (u.rows != grid.n || u.cols != grid.n)
        throw DimensionError("residual_const: field " + u.shape_str() +
                             " does not match grid n=" + std::to_string(grid.n));
    require_same_shape(u, f, "residual_const");
    const Kernel<T> k = laplacian_kernel<T>(static_cast<T>(grid.h));
    Tensor<T> r = conv2d(u, k);
    for (int i = 0; i < r.rows; ++i)
        for (int j = 0; j < r.cols; ++j) r.at(0, i, j) -= f.at(0, i + 1, j + 1);
    return r;
}

template <typename T>
Tensor<T> residual_nonconst(const Tensor<T>& u, const Tensor<T>& kappa_dual,
                            const Tensor<T>& f, const GridSpec& grid) {
    if (u.rows != grid.n || u.cols != grid.n)
        throw DimensionError("residual_nonconst: field " + u.shape_str() +
                             " does not match grid n=" + std::to_string(grid.n));
    require_same_shape(u, f, "residual_nonconst");
    if (kappa_dual.rows != 2 * grid.n - 1 || kappa_dual.cols != 2 * grid.n - 1)
        throw DimensionError("residual_nonconst: dual field " + kappa_dual.shape_str() +
                             " does not match grid n=" + std::to_string(grid.n));
    const TpKernels<T> k = tp_kernels<T>();
    const Tensor<T> d = dilate_field(u);
    const Tensor<T> tu = conv2d(d, k.t_up);
    const Tensor<T> td = conv2d(d, k.t_down);
    const Tensor<T> tr = conv2d(d, k.t_right);
    const Tensor<T> tl = conv2d(d, k.t_left);
    const Tensor<T> pu = conv2d(kappa_dual, k.p_up);
    const Tensor<T> pd = conv2d(kappa_dual, k.p_down);
    const Tensor<T> pr = conv2d(kappa_dual, k.p_right);
    const Tensor<T> pl = conv2d(kappa_dual, k.p_left);
    const T inv_h2 = T(1) / static_cast<T>(grid.h * grid.h);
    Tensor<T> out(1, grid.n - 2, grid.n - 2);
    for (int i = 0; i < out.rows; ++i)
        for (int j = 0; j < out.cols; ++j) {
            const T flux = tu.at(0, i, j) * pu.at(0, i, j) - td.at(0, i, j) * pd.at(0, i, j) +
                           tr.at(0, i, j) * pr.at(0, i, j) - tl.at(0, i, j) * pl.at(0, i, j);
            out.at(0, i, j) = -inv_h2 * flux - f.at(0, i + 1, j + 1);
        }
    return out;
}

template <typename T>
double norm_2h(const Tensor<T>& exact, const Tensor<T>& approx, const GridSpec& grid) {
    require_same_shape(exact, approx, "norm_2h");
    double acc = 0.0;
    for (std::size_t i = 0; i < exact.data.size(); ++i) {
        const double d = double(exact.data[i]) - double(approx.data[i]);
        acc += d * d;
    }
    return grid.h * std::sqrt(acc);
}

template <typename T>
double norm_inf(const Tensor<T>& exact, const Tensor<T>& approx) {
    require_same_shape(exact, approx, "norm_inf");
    double m = 0.0;
    for (std::size_t i = 0; i < exact.data.size(); ++i)
        m = std::max(m, std::abs(double(exact.data[i]) - double(approx.data[i])));
    return m;
}

#define FDNET_INSTANTIATE(T)                                                        \
    template Kernel<T> laplacian_kernel<T>(T);                                      \
    template TpKernels<T> tp_kernels<T>();                                          \
    template Tensor<T> dilate_field<T>(const Tensor<T>&);                           \
    template Tensor<T> kappa_to_dual<T>(const Tensor<T>&);                          \
    template Tensor<T> residual_const<T>(const Tensor<T>&, const Tensor<T>&,        \
                                         const GridSpec&);                          \
    template Tensor<T> residual_nonconst<T>(const Tensor<T>&, const Tensor<T>&,     \
                                            const Tensor<T>&, const GridSpec&);     \
    template double norm_2h<T>(const Tensor<T>&, const Tensor<T>&, const GridSpec&);\
    template double norm_inf<T>(const Tensor<T>&, const Tensor<T>&);

FDNET_INSTANTIATE(float)
FDNET_INSTANTIATE(double)
#undef FDNET_INSTANTIATE

}  // namespace fdnet
