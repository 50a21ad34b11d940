#include "fdnet/grid.hpp"

#include <cmath>

namespace fdnet {

namespace {

void check_square(double x0, double x1, double y0, double y1) {
    if (!(x1 > x0) || !(y1 > y0))
        throw ConfigError("grid: empty domain");
    if (std::abs((x1 - x0) - (y1 - y0)) > 1e-12 * std::abs(x1 - x0))
        throw ConfigError("grid: domain must be square");
}

}  // namespace

GridSpec GridSpec::vertex(int n, double x0, double x1, double y0, double y1) {
    check_square(x0, x1, y0, y1);
    if (n < 2) throw ConfigError("grid: need at least 2 nodes per side");
    GridSpec g;
    g.x_min = x0; g.x_max = x1; g.y_min = y0; g.y_max = y1;
    g.n = n;
    g.h = (x1 - x0) / (n - 1);
    return g;
}

GridSpec GridSpec::cells(int n_cells, double x0, double x1, double y0, double y1) {
    check_square(x0, x1, y0, y1);
    if (n_cells < 1) throw ConfigError("grid: need at least 1 cell per side");
    GridSpec g;
    g.x_min = x0; g.x_max = x1; g.y_min = y0; g.y_max = y1;
    g.n = n_cells + 1;
    g.h = (x1 - x0) / n_cells;
    return g;
}

}  // namespace fdnet
