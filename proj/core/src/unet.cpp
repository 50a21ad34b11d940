#include "fdnet/unet.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>

#include "fdnet/errors.hpp"

namespace fdnet {

namespace {

// Layer order: encoder blocks shallow-to-deep (first block maps 1 -> C),
// bottleneck block, decoder blocks deep-to-shallow (first conv of each maps
// 2C -> C after concatenation), final projection C -> 1.
struct LayerDims {
    int in_ch, out_ch;
};

std::vector<LayerDims> layer_plan(const NetworkSpec& s) {
    std::vector<LayerDims> plan;
    const int c = s.channels;
    int in = 1;  // the 1 -> C projection is fused into the first block
    for (int d = 0; d < s.depth; ++d) {
        plan.push_back({in, c});
        plan.push_back({c, c});
        in = c;
    }
    plan.push_back({in, c});  // bottleneck
    plan.push_back({c, c});
    for (int d = 0; d < s.depth; ++d) {
        plan.push_back({2 * c, c});
        plan.push_back({c, c});
    }
    plan.push_back({c, 1});
    return plan;
}

}  // namespace

void NetworkSpec::validate() const {
    if (depth < 0) throw ConfigError("network: depth must be >= 0");
    if (channels < 1) throw ConfigError("network: channels must be >= 1");
    if (kernel_size < 1 || kernel_size % 2 == 0)
        throw ConfigError("network: kernel size must be odd and positive");
    if (input_rows < 1 || input_cols < 1)
        throw ConfigError("network: input shape is unset");
    // The feature entering the deepest downsampling must still cover one
    // kernel; equivalently rows / 2^(depth-1) >= kernel_size.
    int r = input_rows, c = input_cols;
    for (int d = 0; d < depth; ++d) {
        if (r < kernel_size || c < kernel_size)
            throw ConfigError("network: feature map " + std::to_string(r) + "x" +
                              std::to_string(c) + " ahead of downsampling " +
                              std::to_string(d + 1) + " is smaller than the " +
                              std::to_string(kernel_size) + "x" +
                              std::to_string(kernel_size) + " kernels (reduce depth)");
        r /= 2;
        c /= 2;
    }
    if (r < 1 || c < 1)
        throw ConfigError("network: depth " + std::to_string(depth) +
                          " collapses the input to nothing");
}

std::size_t param_count(const NetworkSpec& spec) {
    std::size_t total = 0;
    const std::size_t k2 = static_cast<std::size_t>(spec.kernel_size) * spec.kernel_size;
    for (const LayerDims& l : layer_plan(spec))
        total += k2 * l.in_ch * l.out_ch + l.out_ch;
    return total;
}

template <typename T>
NetworkParams<T> build_network(const NetworkSpec& spec, std::uint64_t seed) {
    spec.validate();
    Rng rng(seed);
    NetworkParams<T> params;
    const int k = spec.kernel_size;
    for (const LayerDims& l : layer_plan(spec)) {
        ConvLayer<T> layer;
        layer.weights = Kernel<T>(l.out_ch, l.in_ch, k, k, 1, Padding::same_zero);
        layer.bias.assign(l.out_ch, T(0));
        const double fan_in = double(l.in_ch) * k * k;
        const double fan_out = double(l.out_ch) * k * k;
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        for (T& w : layer.weights.data) w = static_cast<T>(rng.next_symmetric(limit));
        params.layers.push_back(std::move(layer));
    }
    return params;
}

template <typename T>
typename Tape<T>::Var unet_forward(Tape<T>& tape, const NetworkSpec& spec,
                                   const NetworkParams<T>& params,
                                   std::type_identity_t<NetworkParams<T>*> grads,
                                   typename Tape<T>::Var input) {
    spec.validate();
    if (params.layers.size() != layer_plan(spec).size())
        throw ConfigError("network: parameter set has " +
                          std::to_string(params.layers.size()) + " layers, spec needs " +
                          std::to_string(layer_plan(spec).size()));
    const Tensor<T>& in = tape.value(input);
    if (in.rows != spec.input_rows || in.cols != spec.input_cols || in.channels != 1)
        throw DimensionError("network: input " + in.shape_str() + " does not match spec (1," +
                             std::to_string(spec.input_rows) + "," +
                             std::to_string(spec.input_cols) + ")");

    std::size_t li = 0;
    auto conv = [&](typename Tape<T>::Var x) {
        ConvRef<T> ref;
        ref.kernel = &params.layers[li].weights;
        ref.bias = &params.layers[li].bias;
        if (grads) {
            ref.kernel_grad = &grads->layers[li].weights;
            ref.bias_grad = &grads->layers[li].bias;
        }
        ++li;
        return tape.conv2d(x, ref);
    };
    auto block = [&](typename Tape<T>::Var x) {
        x = tape.activation(conv(x), spec.activation);
        x = tape.activation(conv(x), spec.activation);
        return x;
    };

    std::vector<typename Tape<T>::Var> skips;
    typename Tape<T>::Var x = input;
    for (int d = 0; d < spec.depth; ++d) {
        x = block(x);
        skips.push_back(x);
        x = tape.avg_pool2(x);
    }
    x = block(x);
    for (int d = spec.depth - 1; d >= 0; --d) {
        const Tensor<T>& skip = tape.value(skips[d]);
        x = tape.upsample_bilinear2(x, skip.rows, skip.cols);
        x = tape.concat_channels(skips[d], x);
        x = block(x);
    }
    return conv(x);  // final projection, no activation
}

namespace {

constexpr char kCheckpointMagic[4] = {'N', 'N', 'P', '1'};

template <typename T>
constexpr std::uint32_t precision_flag() {
    return sizeof(T) == 4 ? 0u : 1u;
}

void write_u32(std::FILE* f, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    std::fwrite(b, 1, 4, f);
}

std::uint32_t read_u32(std::FILE* f, const std::string& path) {
    unsigned char b[4];
    if (std::fread(b, 1, 4, f) != 4)
        throw FormatError(path + ": truncated checkpoint");
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
           (std::uint32_t(b[3]) << 24);
}

}  // namespace

template <typename T>
void save_checkpoint(const std::string& path, const NetworkParams<T>& params) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw FormatError(path + ": cannot open for writing");
    std::fwrite(kCheckpointMagic, 1, 4, f);
    write_u32(f, static_cast<std::uint32_t>(params.layers.size()));
    for (const auto& l : params.layers) {
        write_u32(f, static_cast<std::uint32_t>(l.weights.out_channels));
        write_u32(f, static_cast<std::uint32_t>(l.weights.in_channels));
        write_u32(f, static_cast<std::uint32_t>(l.weights.k_rows));
        write_u32(f, static_cast<std::uint32_t>(l.weights.k_cols));
        write_u32(f, precision_flag<T>());
        std::fwrite(l.weights.data.data(), sizeof(T), l.weights.data.size(), f);
        std::fwrite(l.bias.data(), sizeof(T), l.bias.size(), f);
    }
    std::fclose(f);
}

template <typename T>
NetworkParams<T> load_checkpoint(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw FormatError(path + ": cannot open");
    char magic[4];
    if (std::fread(magic, 1, 4, f) != 4 || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
        std::fclose(f);
        throw FormatError(path + ": bad checkpoint magic (offset 0)");
    }
    NetworkParams<T> params;
    try {
        const std::uint32_t layers = read_u32(f, path);
        for (std::uint32_t i = 0; i < layers; ++i) {
            const std::uint32_t oc = read_u32(f, path);
            const std::uint32_t ic = read_u32(f, path);
            const std::uint32_t kr = read_u32(f, path);
            const std::uint32_t kc = read_u32(f, path);
            const std::uint32_t flag = read_u32(f, path);
            if (flag != precision_flag<T>())
                throw FormatError(path + ": checkpoint precision does not match (layer " +
                                  std::to_string(i) + ")");
            ConvLayer<T> l;
            l.weights = Kernel<T>(oc, ic, kr, kc, 1, Padding::same_zero);
            l.bias.assign(oc, T(0));
            if (std::fread(l.weights.data.data(), sizeof(T), l.weights.data.size(), f) !=
                    l.weights.data.size() ||
                std::fread(l.bias.data(), sizeof(T), l.bias.size(), f) != l.bias.size())
                throw FormatError(path + ": truncated checkpoint (layer " +
                                  std::to_string(i) + ")");
            params.layers.push_back(std::move(l));
        }
    } catch (...) {
        std::fclose(f);
        throw;
    }
    std::fclose(f);
    return params;
}

template NetworkParams<float> build_network(const NetworkSpec&, std::uint64_t);
template NetworkParams<double> build_network(const NetworkSpec&, std::uint64_t);
template Tape<float>::Var unet_forward(Tape<float>&, const NetworkSpec&,
                                       const NetworkParams<float>&, NetworkParams<float>*,
                                       Tape<float>::Var);
template Tape<double>::Var unet_forward(Tape<double>&, const NetworkSpec&,
                                        const NetworkParams<double>&,
                                        NetworkParams<double>*, Tape<double>::Var);
template void save_checkpoint(const std::string&, const NetworkParams<float>&);
template void save_checkpoint(const std::string&, const NetworkParams<double>&);
template NetworkParams<float> load_checkpoint(const std::string&);
template NetworkParams<double> load_checkpoint(const std::string&);

}  // namespace fdnet
