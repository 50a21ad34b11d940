#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fdnet/errors.hpp"

namespace fdnet {

/// Dense channelized 2D array with shape (channels, rows, cols), row-major
/// within each channel. The single value type flowing through the network,
/// the finite difference operators, and the losses.
template <typename T>
struct Tensor {
    int channels = 0;
    int rows = 0;
    int cols = 0;
    std::vector<T> data;

    Tensor() = default;
    Tensor(int c, int r, int k, T fill = T(0))
        : channels(c), rows(r), cols(k),
          data(static_cast<std::size_t>(c) * r * k, fill) {}

    std::size_t size() const { return data.size(); }
    bool same_shape(const Tensor& o) const {
        return channels == o.channels && rows == o.rows && cols == o.cols;
    }
    std::string shape_str() const {
        return "(" + std::to_string(channels) + "," + std::to_string(rows) +
               "," + std::to_string(cols) + ")";
    }

    T& at(int c, int r, int k) {
        return data[(static_cast<std::size_t>(c) * rows + r) * cols + k];
    }
    const T& at(int c, int r, int k) const {
        return data[(static_cast<std::size_t>(c) * rows + r) * cols + k];
    }

    T* channel(int c) { return data.data() + static_cast<std::size_t>(c) * rows * cols; }
    const T* channel(int c) const {
        return data.data() + static_cast<std::size_t>(c) * rows * cols;
    }

    void fill(T v) { std::fill(data.begin(), data.end(), v); }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out(channels, rows, cols);
        for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
        return out;
    }
};

inline void require_same_shape_impl(bool ok, const std::string& what,
                                    const std::string& a, const std::string& b) {
    if (!ok) throw DimensionError(what + ": shape mismatch " + a + " vs " + b);
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* what) {
    require_same_shape_impl(a.same_shape(b), what, a.shape_str(), b.shape_str());
}

enum class Padding { valid, same_zero };

/// Convolution weights with shape (out_channels, in_channels, k_rows, k_cols).
/// Kernel extents must be odd so that outputs align with input lattice nodes.
template <typename T>
struct Kernel {
    int out_channels = 0;
    int in_channels = 0;
    int k_rows = 0;
    int k_cols = 0;
    int stride = 1;
    Padding padding = Padding::valid;
    std::vector<T> data;

    Kernel() = default;
    Kernel(int oc, int ic, int kr, int kc, int stride_ = 1,
           Padding pad = Padding::valid)
        : out_channels(oc), in_channels(ic), k_rows(kr), k_cols(kc),
          stride(stride_), padding(pad),
          data(static_cast<std::size_t>(oc) * ic * kr * kc, T(0)) {
        if (kr % 2 == 0 || kc % 2 == 0)
            throw ConfigError("kernel extents must be odd, got " +
                              std::to_string(kr) + "x" + std::to_string(kc));
        if (stride_ < 1) throw ConfigError("kernel stride must be >= 1");
    }

    std::size_t size() const { return data.size(); }

    T& at(int oc, int ic, int p, int q) {
        return data[((static_cast<std::size_t>(oc) * in_channels + ic) * k_rows + p) * k_cols + q];
    }
    const T& at(int oc, int ic, int p, int q) const {
        return data[((static_cast<std::size_t>(oc) * in_channels + ic) * k_rows + p) * k_cols + q];
    }

    template <typename U>
    Kernel<U> cast() const {
        Kernel<U> out(out_channels, in_channels, k_rows, k_cols, stride, padding);
        for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
        return out;
    }
};

/// Deterministic uniform generator used for all weight initialization.
/// Draws are derived from raw mt19937_64 output so that sequences are
/// identical across standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed ^ 0x9e3779b97f4a7c15ULL) {
        // splitmix64 warmup decorrelates small seeds
        for (int i = 0; i < 4; ++i) next_u64();
    }

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1).
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform in [-limit, limit).
    double next_symmetric(double limit) { return (2.0 * next_unit() - 1.0) * limit; }

private:
    std::uint64_t state_;
};

}  // namespace fdnet
