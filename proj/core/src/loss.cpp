#include "fdnet/loss.hpp"

#include "fdnet/conv.hpp"
#include "fdnet/stencil.hpp"

namespace fdnet {

namespace {

template <typename T>
void check_field(const Tensor<T>& t, const GridSpec& grid, const char* what) {
    if (t.channels != 1 || t.rows != grid.n || t.cols != grid.n)
        throw DimensionError(std::string(what) + ": field " + t.shape_str() +
                             " does not match grid n=" + std::to_string(grid.n));
}

template <typename T>
Tensor<T> interior_of(const Tensor<T>& f) {
    Tensor<T> out(1, f.rows - 2, f.cols - 2);
    for (int i = 0; i < out.rows; ++i)
        for (int j = 0; j < out.cols; ++j) out.at(0, i, j) = f.at(0, i + 1, j + 1);
    return out;
}

/// (1 - alpha) * sum over the boundary ring of (u_hat - g)^2.
template <typename T>
typename Tape<T>::Var boundary_term(Tape<T>& tape, typename Tape<T>::Var u_hat,
                                    const Tensor<T>& g, const GridSpec& grid) {
    auto g_leaf = tape.leaf(g);
    auto mask = tape.leaf(boundary_mask<T>(grid));
    auto diff = tape.scale_add(u_hat, g_leaf, T(1), T(-1));
    return tape.sum_squares(diff, mask);
}

}  // namespace

template <typename T>
LossTerms<T> loss_elliptic_const(Tape<T>& tape, typename Tape<T>::Var u_hat,
                                 const Tensor<T>& f, const Tensor<T>& g,
                                 const GridSpec& grid, T alpha) {
    check_field(tape.value(u_hat), grid, "loss_elliptic_const");
    check_field(f, grid, "loss_elliptic_const f");
    check_field(g, grid, "loss_elliptic_const g");

    ConvRef<T> stencil;
    stencil.kernel = tape.hold_kernel(laplacian_kernel<T>(static_cast<T>(grid.h)));
    auto ku = tape.conv2d(u_hat, stencil);
    auto r = tape.scale_add(ku, tape.leaf(interior_of(f)), T(1), T(-1));
    auto interior = tape.sum_squares(r);
    auto boundary = boundary_term(tape, u_hat, g, grid);
    return {tape.scale_add(interior, boundary, alpha, T(1) - alpha), interior, boundary};
}

template <typename T>
LossTerms<T> loss_elliptic_nonconst(Tape<T>& tape, typename Tape<T>::Var u_hat,
                                    const Tensor<T>& kappa_dual, const Tensor<T>& f,
                                    const Tensor<T>& g, const GridSpec& grid, T alpha) {
    check_field(tape.value(u_hat), grid, "loss_elliptic_nonconst");
    check_field(f, grid, "loss_elliptic_nonconst f");
    check_field(g, grid, "loss_elliptic_nonconst g");
    if (kappa_dual.rows != 2 * grid.n - 1 || kappa_dual.cols != 2 * grid.n - 1)
        throw DimensionError("loss_elliptic_nonconst: dual field " +
                             kappa_dual.shape_str() + " does not match grid n=" +
                             std::to_string(grid.n));

    const TpKernels<T> tp = tp_kernels<T>();
    auto conv_const = [&](typename Tape<T>::Var x, Kernel<T> k) {
        ConvRef<T> ref;
        ref.kernel = tape.hold_kernel(std::move(k));
        return tape.conv2d(x, ref);
    };

    auto d = tape.dilate(u_hat);
    // interface coefficients are constants; evaluated off-tape
    auto pu = tape.leaf(conv2d(kappa_dual, tp.p_up));
    auto pd = tape.leaf(conv2d(kappa_dual, tp.p_down));
    auto pr = tape.leaf(conv2d(kappa_dual, tp.p_right));
    auto pl = tape.leaf(conv2d(kappa_dual, tp.p_left));

    auto flux_u = tape.hadamard(conv_const(d, tp.t_up), pu);
    auto flux_d = tape.hadamard(conv_const(d, tp.t_down), pd);
    auto flux_r = tape.hadamard(conv_const(d, tp.t_right), pr);
    auto flux_l = tape.hadamard(conv_const(d, tp.t_left), pl);

    auto vertical = tape.scale_add(flux_u, flux_d, T(1), T(-1));
    auto horizontal = tape.scale_add(flux_r, flux_l, T(1), T(-1));
    const T inv_h2 = T(1) / static_cast<T>(grid.h * grid.h);
    auto flux = tape.scale_add(vertical, horizontal, -inv_h2, -inv_h2);
    auto r = tape.scale_add(flux, tape.leaf(interior_of(f)), T(1), T(-1));
    auto interior = tape.sum_squares(r);
    auto boundary = boundary_term(tape, u_hat, g, grid);
    return {tape.scale_add(interior, boundary, alpha, T(1) - alpha), interior, boundary};
}

template <typename T>
LossTerms<T> loss_parabolic(Tape<T>& tape, typename Tape<T>::Var u_hat_n,
                            const Tensor<T>& u_prev, const Tensor<T>& f_n,
                            const Tensor<T>& g_n, const GridSpec& grid, T alpha, T tau) {
    check_field(tape.value(u_hat_n), grid, "loss_parabolic");
    check_field(u_prev, grid, "loss_parabolic u_prev");
    check_field(f_n, grid, "loss_parabolic f");
    check_field(g_n, grid, "loss_parabolic g");
    if (!(tau > T(0))) throw ConfigError("loss_parabolic: tau must be > 0");

    ConvRef<T> stencil;
    stencil.kernel = tape.hold_kernel(laplacian_kernel<T>(static_cast<T>(grid.h)));

    // r = u^n - (u^{n-1} + tau f^n) + tau * (K * u^n) on the interior
    Tensor<T> drift = interior_of(u_prev);
    {
        const Tensor<T> fi = interior_of(f_n);
        for (std::size_t i = 0; i < drift.data.size(); ++i)
            drift.data[i] += tau * fi.data[i];
    }
    auto u_int = tape.crop(u_hat_n, 1, 1, grid.n - 2, grid.n - 2);
    auto r0 = tape.scale_add(u_int, tape.leaf(std::move(drift)), T(1), T(-1));
    auto ku = tape.conv2d(u_hat_n, stencil);
    auto r = tape.scale_add(r0, ku, T(1), tau);
    auto interior = tape.sum_squares(r);
    auto boundary = boundary_term(tape, u_hat_n, g_n, grid);
    return {tape.scale_add(interior, boundary, alpha, T(1) - alpha), interior, boundary};
}

#define FDNET_INSTANTIATE(T)                                                          \
    template LossTerms<T> loss_elliptic_const(Tape<T>&, typename Tape<T>::Var,        \
                                              const Tensor<T>&, const Tensor<T>&,     \
                                              const GridSpec&, T);                    \
    template LossTerms<T> loss_elliptic_nonconst(                                     \
        Tape<T>&, typename Tape<T>::Var, const Tensor<T>&, const Tensor<T>&,          \
        const Tensor<T>&, const GridSpec&, T);                                        \
    template LossTerms<T> loss_parabolic(Tape<T>&, typename Tape<T>::Var,             \
                                         const Tensor<T>&, const Tensor<T>&,          \
                                         const Tensor<T>&, const GridSpec&, T, T);

FDNET_INSTANTIATE(float)
FDNET_INSTANTIATE(double)
#undef FDNET_INSTANTIATE

}  // namespace fdnet
