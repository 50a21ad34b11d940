#pragma once

#include "fdnet/tensor.hpp"

namespace fdnet {

/// Square lattice of n x n nodes over [x_min,x_max] x [y_min,y_max].
/// Row index i maps to x (first coordinate), column index j to y, so a field
/// tensor entry (0, i, j) holds the value at (x(i), y(j)). The boundary set
/// is exactly the outermost ring of nodes.
///
/// Two constructions are provided. `vertex(n)` spans the domain with n nodes
/// per side (h = L/(n-1)); this is the lattice the networks train on, since
/// they map n x n fields to n x n fields. `cells(n)` partitions the domain
/// into n x n cells (n+1 nodes per side, h = L/n), the classical layout used
/// by the reference elliptic solver tables.
struct GridSpec {
    double x_min = 0.0, x_max = 1.0;
    double y_min = 0.0, y_max = 1.0;
    int n = 0;       // nodes per side
    double h = 0.0;  // node spacing

    static GridSpec vertex(int n, double x0 = 0.0, double x1 = 1.0, double y0 = 0.0,
                           double y1 = 1.0);
    static GridSpec cells(int n_cells, double x0 = 0.0, double x1 = 1.0,
                          double y0 = 0.0, double y1 = 1.0);

    double x(int i) const { return x_min + i * h; }
    double y(int j) const { return y_min + j * h; }
    bool on_boundary(int i, int j) const {
        return i == 0 || j == 0 || i == n - 1 || j == n - 1;
    }
    int interior_per_side() const { return n - 2; }
};

/// 1 on the outermost node ring, 0 inside; shape (1, n, n).
template <typename T>
Tensor<T> boundary_mask(const GridSpec& grid) {
    Tensor<T> m(1, grid.n, grid.n);
    for (int i = 0; i < grid.n; ++i)
        for (int j = 0; j < grid.n; ++j)
            if (grid.on_boundary(i, j)) m.at(0, i, j) = T(1);
    return m;
}

template <typename T>
Tensor<T> interior_mask(const GridSpec& grid) {
    Tensor<T> m(1, grid.n, grid.n, T(1));
    for (int i = 0; i < grid.n; ++i)
        for (int j = 0; j < grid.n; ++j)
            if (grid.on_boundary(i, j)) m.at(0, i, j) = T(0);
    return m;
}

/// Sample a scalar field at every node; shape (1, n, n).
template <typename T, typename F>
Tensor<T> sample_field(const GridSpec& grid, F&& f) {
    Tensor<T> out(1, grid.n, grid.n);
    for (int i = 0; i < grid.n; ++i)
        for (int j = 0; j < grid.n; ++j)
            out.at(0, i, j) = static_cast<T>(f(grid.x(i), grid.y(j)));
    return out;
}

}  // namespace fdnet
