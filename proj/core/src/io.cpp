#include "fdnet/io.hpp"

#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <limits>

namespace fdnet {

namespace {

constexpr char kGridMagic[4] = {'N', 'N', 'G', '1'};

void write_u32_le(std::FILE* f, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    std::fwrite(b, 1, 4, f);
}

struct FileCloser {
    std::FILE* f;
    ~FileCloser() {
        if (f) std::fclose(f);
    }
};

}  // namespace

void save_grid(const std::string& path, const Tensor<double>& field) {
    if (field.channels != 1)
        throw DimensionError("save_grid: expected a single-channel field, got " +
                             field.shape_str());
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw FormatError(path + ": cannot open for writing");
    FileCloser closer{f};
    std::fwrite(kGridMagic, 1, 4, f);
    write_u32_le(f, static_cast<std::uint32_t>(field.rows));
    write_u32_le(f, static_cast<std::uint32_t>(field.cols));
    // doubles are written natively; this code targets little-endian hosts
    std::fwrite(field.data.data(), sizeof(double), field.data.size(), f);
}

Tensor<double> load_grid(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw FormatError(path + ": cannot open");
    FileCloser closer{f};
    char magic[4];
    if (std::fread(magic, 1, 4, f) != 4 || std::memcmp(magic, kGridMagic, 4) != 0)
        throw FormatError(path + ": bad grid magic at byte offset 0");
    unsigned char dims[8];
    if (std::fread(dims, 1, 8, f) != 8)
        throw FormatError(path + ": truncated header at byte offset 4");
    auto u32 = [&](int o) {
        return std::uint32_t(dims[o]) | (std::uint32_t(dims[o + 1]) << 8) |
               (std::uint32_t(dims[o + 2]) << 16) | (std::uint32_t(dims[o + 3]) << 24);
    };
    const std::uint32_t rows = u32(0), cols = u32(4);
    if (rows == 0 || cols == 0 || rows > (1u << 20) || cols > (1u << 20))
        throw FormatError(path + ": implausible dimensions " + std::to_string(rows) + "x" +
                          std::to_string(cols) + " at byte offset 4");
    Tensor<double> field(1, static_cast<int>(rows), static_cast<int>(cols));
    const std::size_t got = std::fread(field.data.data(), sizeof(double),
                                       field.data.size(), f);
    if (got != field.data.size())
        throw FormatError(path + ": truncated payload at byte offset " +
                          std::to_string(12 + got * sizeof(double)));
    return field;
}

void save_grid_csv(const std::string& path, const Tensor<double>& field) {
    if (field.channels != 1)
        throw DimensionError("save_grid_csv: expected a single-channel field, got " +
                             field.shape_str());
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw FormatError(path + ": cannot open for writing");
    FileCloser closer{f};
    for (int r = 0; r < field.rows; ++r) {
        for (int c = 0; c < field.cols; ++c)
            std::fprintf(f, c ? ",%.17g" : "%.17g", field.at(0, r, c));
        std::fputc('\n', f);
    }
}

namespace {

template <typename T>
void write_history(const std::string& path, const std::vector<T>& losses,
                   const std::vector<double>& wall_ms) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw FormatError(path + ": cannot open for writing");
    FileCloser closer{f};
    std::fprintf(f, "iteration,loss,best_loss,wall_ms\n");
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < losses.size(); ++i) {
        best = std::min(best, double(losses[i]));
        const double ms = i < wall_ms.size() ? wall_ms[i] : 0.0;
        std::fprintf(f, "%zu,%.17g,%.17g,%.17g\n", i, double(losses[i]), best, ms);
    }
}

}  // namespace

void save_loss_history(const std::string& path, const std::vector<float>& losses,
                       const std::vector<double>& wall_ms) {
    write_history(path, losses, wall_ms);
}

void save_loss_history(const std::string& path, const std::vector<double>& losses,
                       const std::vector<double>& wall_ms) {
    write_history(path, losses, wall_ms);
}

}  // namespace fdnet
