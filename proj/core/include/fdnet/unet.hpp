#pragma once

#include <cstdint>
#include <string>
#include <type_traits>
#include <vector>

#include "fdnet/autodiff.hpp"
#include "fdnet/tensor.hpp"

namespace fdnet {

/// Constant-width U-Net: `depth` downsamplings, the same channel count at
/// every resolution, two same-padded convolutions per block, bilinear
/// upsampling and channel concatenation on the decoder path.
struct NetworkSpec {
    int depth = 3;
    int channels = 32;
    int kernel_size = 5;
    Activation activation = Activation::identity;
    int input_rows = 0;
    int input_cols = 0;

    /// Throws ConfigError when the coarsest feature map would be too small
    /// for the convolution kernels (the feature entering the last
    /// downsampling must still cover one kernel).
    void validate() const;
};

template <typename T>
struct ConvLayer {
    Kernel<T> weights;
    std::vector<T> bias;
};

template <typename T>
struct NetworkParams {
    std::vector<ConvLayer<T>> layers;

    std::size_t count() const {
        std::size_t c = 0;
        for (const auto& l : layers) c += l.weights.size() + l.bias.size();
        return c;
    }

    /// Zero-filled structure mirroring every weight and bias, used as the
    /// gradient (and Adam moment) storage.
    NetworkParams<T> zeros_like() const {
        NetworkParams<T> g;
        g.layers.reserve(layers.size());
        for (const auto& l : layers) {
            ConvLayer<T> z;
            z.weights = Kernel<T>(l.weights.out_channels, l.weights.in_channels,
                                  l.weights.k_rows, l.weights.k_cols, l.weights.stride,
                                  l.weights.padding);
            z.bias.assign(l.bias.size(), T(0));
            g.layers.push_back(std::move(z));
        }
        return g;
    }

    void set_zero() {
        for (auto& l : layers) {
            std::fill(l.weights.data.begin(), l.weights.data.end(), T(0));
            std::fill(l.bias.begin(), l.bias.end(), T(0));
        }
    }
};

/// Total trainable parameter count for a spec, without building weights.
std::size_t param_count(const NetworkSpec& spec);

/// Glorot-uniform weights, zero biases; bit-identical for equal seeds.
template <typename T>
NetworkParams<T> build_network(const NetworkSpec& spec, std::uint64_t seed);

/// Runs the network on the tape. `grads` may be null for inference-only
/// forward passes; when provided, backward() accumulates parameter gradients
/// into it.
template <typename T>
typename Tape<T>::Var unet_forward(Tape<T>& tape, const NetworkSpec& spec,
                                   const NetworkParams<T>& params,
                                   std::type_identity_t<NetworkParams<T>*> grads,
                                   typename Tape<T>::Var input);

/// Checkpoint serialization (magic "NNP1").
template <typename T>
void save_checkpoint(const std::string& path, const NetworkParams<T>& params);
template <typename T>
NetworkParams<T> load_checkpoint(const std::string& path);

}  // namespace fdnet
