#pragma once

#include <string>
#include <vector>

#include "fdnet/tensor.hpp"

namespace fdnet {

/// Grid dump, binary: magic "NNG1", u32 rows, u32 cols, then row-major
/// little-endian f64 values. Single-channel fields only.
void save_grid(const std::string& path, const Tensor<double>& field);
Tensor<double> load_grid(const std::string& path);

/// One CSV row per grid row, "%.17g" per value (round-trips exactly).
void save_grid_csv(const std::string& path, const Tensor<double>& field);

/// Loss-history CSV with columns iteration,loss,best_loss,wall_ms.
void save_loss_history(const std::string& path, const std::vector<float>& losses,
                       const std::vector<double>& wall_ms);
void save_loss_history(const std::string& path, const std::vector<double>& losses,
                       const std::vector<double>& wall_ms);

/// False-color raster of a grid dump (fixed viridis map, PNG output) plus a
/// sidecar "<image>.txt" recording the data min/max at full precision.
void render_heatmap(const std::string& grid_dump_path,
                    const std::string& output_image_path);

}  // namespace fdnet
