#include "fdnet/autodiff.hpp"

#include <cmath>
#include <utility>

namespace fdnet {

Activation activation_from_string(const std::string& name) {
    if (name == "identity") return Activation::identity;
    if (name == "relu") return Activation::relu;
    if (name == "tanh") return Activation::tanh;
    if (name == "swish") return Activation::swish;
    throw ConfigError("unknown activation '" + name +
                      "' (expected identity|relu|tanh|swish)");
}

const char* to_string(Activation a) {
    switch (a) {
        case Activation::identity: return "identity";
        case Activation::relu: return "relu";
        case Activation::tanh: return "tanh";
        case Activation::swish: return "swish";
    }
    return "?";
}

namespace {

template <typename T>
T sigmoid(T x) {
    return T(1) / (T(1) + std::exp(-x));
}

}  // namespace

template <typename T>
int Tape<T>::check(Var v) const {
    if (v.id < 0 || v.id >= static_cast<int>(nodes_.size()))
        throw TrainingError("tape: node " + std::to_string(v.id) + " not on tape");
    return v.id;
}

template <typename T>
typename Tape<T>::Var Tape<T>::push(Node n) {
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

template <typename T>
typename Tape<T>::Var Tape<T>::leaf(Tensor<T> value) {
    Node n;
    n.op = Op::leaf;
    n.value = std::move(value);
    n.needs_grad = false;
    return push(std::move(n));
}

template <typename T>
typename Tape<T>::Var Tape<T>::input(Tensor<T> value) {
    Node n;
    n.op = Op::leaf;
    n.value = std::move(value);
    n.needs_grad = true;
    return push(std::move(n));
}

template <typename T>
const Kernel<T>* Tape<T>::hold_kernel(Kernel<T> k) {
    held_kernels_.push_back(std::move(k));
    return &held_kernels_.back();
}

template <typename T>
typename Tape<T>::Var Tape<T>::conv2d(Var x, ConvRef<T> ref) {
    Node& xn = nodes_[check(x)];
    Node n;
    n.op = Op::conv;
    n.a = x.id;
    n.conv = ref;
    n.value = fdnet::conv2d(xn.value, *ref.kernel, ref.bias);
    n.needs_grad = xn.needs_grad || ref.kernel_grad != nullptr;
    return push(std::move(n));
}

template <typename T>
typename Tape<T>::Var Tape<T>::avg_pool2(Var x) {
    const Tensor<T>& in = nodes_[check(x)].value;
    if (in.rows < 2 || in.cols < 2)
        throw DimensionError("avg_pool2: input " + in.shape_str() +
                             " smaller than the 2x2 window");
    Node n;
    n.op = Op::avg_pool2;
    n.a = x.id;
    n.needs_grad = nodes_[x.id].needs_grad;
    n.value = Tensor<T>(in.channels, in.rows / 2, in.cols / 2);
    for (int c = 0; c < in.channels; ++c) {
        const T* src = in.channel(c);
        T* dst = n.value.channel(c);
        for (int r = 0; r < n.value.rows; ++r)
            for (int k = 0; k < n.value.cols; ++k) {
                const T* p = src + static_cast<std::size_t>(2 * r) * in.cols + 2 * k;
                dst[static_cast<std::size_t>(r) * n.value.cols + k] =
                    (p[0] + p[1] + p[in.cols] + p[in.cols + 1]) * T(0.25);
            }
    }
    return push(std::move(n));
}

template <typename T>
typename Tape<T>::Var Tape<T>::upsample_bilinear2(Var x, int target_rows,
                                                  int target_cols) {
    const Tensor<T>& in = nodes_[check(x)].value;
    if (target_rows < in.rows || target_cols < in.cols)
        throw DimensionError("upsample_bilinear2: target " + std::to_string(target_rows) +
                             "x" + std::to_string(target_cols) + " smaller than input " +
                             in.shape_str());
    Node n;
    n.op = Op::upsample;
    n.a = x.id;
    n.needs_grad = nodes_[x.id].needs_grad;
    n.arg0 = in.rows;
    n.arg1 = in.cols;
    n.value = Tensor<T>(in.channels, target_rows, target_cols);
    // align-corners: output corner samples coincide with input corners
    const double sr = target_rows > 1 ? double(in.rows - 1) / (target_rows - 1) : 0.0;
    const double sc = target_cols > 1 ? double(in.cols - 1) / (target_cols - 1) : 0.0;
    for (int c = 0; c < in.channels; ++c) {
        const T* src = in.channel(c);
        T* dst = n.value.channel(c);
        for (int r = 0; r < target_rows; ++r) {
            const double fr = r * sr;
            const int r0 = std::min(static_cast<int>(fr), in.rows - 1);
            const int r1 = std::min(r0 + 1, in.rows - 1);
            const T tr = static_cast<T>(fr - r0);
            for (int k = 0; k < target_cols; ++k) {
                const double fc = k * sc;
                const int c0 = std::min(static_cast<int>(fc), in.cols - 1);
                const int c1 = std::min(c0 + 1, in.cols - 1);
                const T tc = static_cast<T>(fc - c0);
                const T v00 = src[static_cast<std::size_t>(r0) * in.cols + c0];
                const T v01 = src[static_cast<std::size_t>(r0) * in.cols + c1];
                const T v10 = src[static_cast<std::size_t>(r1) * in.cols + c0];
                const T v11 = src[static_cast<std::size_t>(r1) * in.cols + c1];
                dst[static_cast<std::size_t>(r) * target_cols + k] =
                    (T(1) - tr) * ((T(1) - tc) * v00 + tc * v01) +
                    tr * ((T(1) - tc) * v10 + tc * v11);
            }
        }
    }
    return push(std::move(n));
}

template <typename T>
typename Tape<T>::Var Tape<T>::concat_channels(Var a, Var b) {
    const Tensor<T>& ta = nodes_[check(a)].value;
    const Tensor<T>& tb = nodes_[check(b)].value;
    if (ta.rows != tb.rows || ta.cols != tb.cols)
        throw DimensionError("concat_channels: spatial mismatch " + ta.shape_str() +
                             " vs " + tb.shape_str());
    Node n;
    n.op = Op::concat;
    n.a = a.id;
    n.b = b.id;
    n.needs_grad = nodes_[a.id].needs_grad || nodes_[b.id].needs_grad;
    n.arg0 = ta.channels;
    n.value = Tensor<T>(ta.channels + tb.channels, ta.rows, ta.cols);
    std::copy(ta.data.begin(), ta.data.end(), n.value.data.begin());
    std::copy(tb.data.begin(), tb.data.end(), n.value.data.begin() + ta.data.size());
    return push(std::move(n));
}

template <typename T>
typename Tape<T>::Var Tape<T>::slice_channels(Var x, int first, int count) {
    const Tensor<T>& in = nodes_[check(x)].value;
    if (first < 0 || count < 1 || first + count > in.channels)
        throw DimensionError("slice_channels: range [" + std::to_string(first) + "," +
                             std::to_string(first + count) + ") outside " + in.shape_str());
    Node n;
    n.op = Op::slice;
    n.a = x.id;
    n.needs_grad = nodes_[x.id].needs_grad;
    n.arg0 = first;
    n.value = Tensor<T>(count, in.rows, in.cols);
    std::copy(in.channel(first), in.channel(first) + n.value.size(),
              n.value.data.begin());
    return push(std::move(n));
}

template <typename T>
typename Tape<T>::Var Tape<T>::crop(Var x, int row0, int col0, int rows, int cols) {
    const Tensor<T>& in = nodes_[check(x)].value;
    if (row0 < 0 || col0 < 0 || rows < 1 || cols < 1 || row0 + rows > in.rows ||
        col0 + cols > in.cols)
        throw DimensionError("crop: window " + std::to_string(rows) + "x" +
                             std::to_string(cols) + "@(" + std::to_string(row0) + "," +
                             std::to_string(col0) + ") outside " + in.shape_str());
    Node n;
    n.op = Op::crop;
    n.a = x.id;
    n.needs_grad = nodes_[x.id].needs_grad;
    n.arg0 = row0;
    n.arg1 = col0;
    n.value = Tensor<T>(in.channels, rows, cols);
    for (int c = 0; c < in.channels; ++c)
        for (int r = 0; r < rows; ++r) {
            const T* src = in.channel(c) + static_cast<std::size_t>(row0 + r) * in.cols + col0;
            std::copy(src, src + cols, n.value.channel(c) + static_cast<std::size_t>(r) * cols);
        }
    return push(std::move(n));
}

template <typename T>
typename Tape<T>::Var Tape<T>::activation(Var x, Activation kind) {
    const Tensor<T>& in = nodes_[check(x)].value;
    Node n;
    n.op = Op::activation;
    n.a = x.id;
    n.needs_grad = nodes_[x.id].needs_grad;
    n.act = kind;
    n.value = in;
    switch (kind) {
        case Activation::identity:
            break;
        case Activation::relu:
            for (T& v : n.value.data) v = v > T(0) ? v : T(0);
            break;
        case Activation::tanh:
            for (T& v : n.value.data) v = std::tanh(v);
            break;
        case Activation::swish:
            for (T& v : n.value.data) v = v * sigmoid(v);
            break;
    }
    return push(std::move(n));
}

template <typename T>
typename Tape<T>::Var Tape<T>::hadamard(Var a, Var b) {
    const Tensor<T>& ta = nodes_[check(a)].value;
    const Tensor<T>& tb = nodes_[check(b)].value;
    require_same_shape(ta, tb, "hadamard");
    Node n;
    n.op = Op::hadamard;
    n.a = a.id;
    n.b = b.id;
    n.needs_grad = nodes_[a.id].needs_grad || nodes_[b.id].needs_grad;
    n.value = ta;
    for (std::size_t i = 0; i < tb.data.size(); ++i) n.value.data[i] *= tb.data[i];
    return push(std::move(n));
}

template <typename T>
typename Tape<T>::Var Tape<T>::scale_add(Var a, Var b, T alpha, T beta) {
    const Tensor<T>& ta = nodes_[check(a)].value;
    const Tensor<T>& tb = nodes_[check(b)].value;
    require_same_shape(ta, tb, "scale_add");
    Node n;
    n.op = Op::scale_add;
    n.a = a.id;
    n.b = b.id;
    n.needs_grad = nodes_[a.id].needs_grad || nodes_[b.id].needs_grad;
    n.alpha = alpha;
    n.beta = beta;
    n.value = Tensor<T>(ta.channels, ta.rows, ta.cols);
    for (std::size_t i = 0; i < ta.data.size(); ++i)
        n.value.data[i] = alpha * ta.data[i] + beta * tb.data[i];
    return push(std::move(n));
}

template <typename T>
typename Tape<T>::Var Tape<T>::dilate(Var x) {
    const Tensor<T>& in = nodes_[check(x)].value;
    if (in.rows < 2 || in.cols < 2)
        throw DimensionError("dilate: input " + in.shape_str() + " must be at least 2x2");
    Node n;
    n.op = Op::dilate;
    n.a = x.id;
    n.needs_grad = nodes_[x.id].needs_grad;
    n.value = Tensor<T>(in.channels, 2 * in.rows - 1, 2 * in.cols - 1);
    for (int c = 0; c < in.channels; ++c) {
        const T* src = in.channel(c);
        T* dst = n.value.channel(c);
        for (int r = 0; r < in.rows; ++r)
            for (int k = 0; k < in.cols; ++k)
                dst[static_cast<std::size_t>(2 * r) * n.value.cols + 2 * k] =
                    src[static_cast<std::size_t>(r) * in.cols + k];
    }
    return push(std::move(n));
}

template <typename T>
typename Tape<T>::Var Tape<T>::sum_squares(Var x, Var mask) {
    const Tensor<T>& in = nodes_[check(x)].value;
    if (mask.valid()) {
        const Tensor<T>& m = nodes_[check(mask)].value;
        require_same_shape(in, m, "sum_squares mask");
    }
    Node n;
    n.op = Op::sum_squares;
    n.a = x.id;
    n.b = mask.valid() ? mask.id : -1;
    n.needs_grad = nodes_[x.id].needs_grad;
    n.value = Tensor<T>(1, 1, 1);
    double acc = 0.0;  // reduction in double; the addends themselves carry T's rounding
    if (mask.valid()) {
        const Tensor<T>& m = nodes_[mask.id].value;
        for (std::size_t i = 0; i < in.data.size(); ++i)
            if (m.data[i] != T(0)) acc += double(in.data[i]) * double(in.data[i]);
    } else {
        for (std::size_t i = 0; i < in.data.size(); ++i)
            acc += double(in.data[i]) * double(in.data[i]);
    }
    n.value.data[0] = static_cast<T>(acc);
    return push(std::move(n));
}

template <typename T>
T Tape<T>::scalar(Var v) const {
    const Tensor<T>& t = nodes_[check(v)].value;
    if (t.size() != 1)
        throw DimensionError("scalar: node has shape " + t.shape_str());
    return t.data[0];
}

template <typename T>
Tensor<T>& Tape<T>::grad_buffer(int id) {
    if (grads_.size() != nodes_.size()) grads_.resize(nodes_.size());
    Tensor<T>& g = grads_[id];
    const Tensor<T>& v = nodes_[id].value;
    if (!g.same_shape(v)) g = Tensor<T>(v.channels, v.rows, v.cols);
    return g;
}

template <typename T>
void Tape<T>::accumulate(int id, const Tensor<T>& g) {
    if (id < 0 || !nodes_[id].needs_grad) return;
    Tensor<T>& dst = grad_buffer(id);
    for (std::size_t i = 0; i < g.data.size(); ++i) dst.data[i] += g.data[i];
}

template <typename T>
const Tensor<T>& Tape<T>::grad(Var v) const {
    const int id = check(v);
    if (grads_.size() != nodes_.size() || grads_[id].size() != nodes_[id].value.size())
        throw TrainingError("tape: no gradient recorded for node " + std::to_string(id) +
                            " (run backward first)");
    return grads_[id];
}

template <typename T>
void Tape<T>::backward(Var loss) {
    const Tensor<T>& v = nodes_[check(loss)].value;
    if (v.size() != 1)
        throw DimensionError("backward: loss must be scalar, got " + v.shape_str());
    Tensor<T> seed(1, 1, 1);
    seed.data[0] = T(1);
    backward_from(loss, seed);
}

template <typename T>
void Tape<T>::backward_from(Var node, const Tensor<T>& upstream) {
    const int id = check(node);
    require_same_shape(nodes_[id].value, upstream, "backward_from upstream");
    grads_.assign(nodes_.size(), Tensor<T>{});
    if (!nodes_[id].needs_grad) return;
    grad_buffer(id);
    for (std::size_t i = 0; i < upstream.data.size(); ++i)
        grads_[id].data[i] = upstream.data[i];
    run_backward(id);
}

template <typename T>
void Tape<T>::run_backward(int seed_id) {
    for (int id = seed_id; id >= 0; --id) {
        if (!nodes_[id].needs_grad) continue;
        if (grads_[id].size() != nodes_[id].value.size()) continue;  // unreached node
        backprop_node(id);
    }
}

template <typename T>
void Tape<T>::backprop_node(int id) {
    Node& n = nodes_[id];
    const Tensor<T>& up = grads_[id];
    switch (n.op) {
        case Op::leaf:
            break;
        case Op::conv: {
            const Tensor<T>& in = nodes_[n.a].value;
            if (n.conv.kernel_grad)
                conv2d_grad_kernel(up, in, *n.conv.kernel, *n.conv.kernel_grad,
                                   n.conv.bias_grad);
            if (nodes_[n.a].needs_grad)
                accumulate(n.a, conv2d_grad_input(up, *n.conv.kernel, in.rows, in.cols));
            break;
        }
        case Op::avg_pool2: {
            if (!nodes_[n.a].needs_grad) break;
            const Tensor<T>& in = nodes_[n.a].value;
            Tensor<T> g(in.channels, in.rows, in.cols);
            for (int c = 0; c < up.channels; ++c) {
                const T* u = up.channel(c);
                T* dst = g.channel(c);
                for (int r = 0; r < up.rows; ++r)
                    for (int k = 0; k < up.cols; ++k) {
                        const T w = u[static_cast<std::size_t>(r) * up.cols + k] * T(0.25);
                        T* p = dst + static_cast<std::size_t>(2 * r) * in.cols + 2 * k;
                        p[0] += w;
                        p[1] += w;
                        p[in.cols] += w;
                        p[in.cols + 1] += w;
                    }
            }
            accumulate(n.a, g);
            break;
        }
        case Op::upsample: {
            if (!nodes_[n.a].needs_grad) break;
            const int in_rows = n.arg0, in_cols = n.arg1;
            Tensor<T> g(up.channels, in_rows, in_cols);
            const double sr = up.rows > 1 ? double(in_rows - 1) / (up.rows - 1) : 0.0;
            const double sc = up.cols > 1 ? double(in_cols - 1) / (up.cols - 1) : 0.0;
            for (int c = 0; c < up.channels; ++c) {
                const T* u = up.channel(c);
                T* dst = g.channel(c);
                for (int r = 0; r < up.rows; ++r) {
                    const double fr = r * sr;
                    const int r0 = std::min(static_cast<int>(fr), in_rows - 1);
                    const int r1 = std::min(r0 + 1, in_rows - 1);
                    const T tr = static_cast<T>(fr - r0);
                    for (int k = 0; k < up.cols; ++k) {
                        const double fc = k * sc;
                        const int c0 = std::min(static_cast<int>(fc), in_cols - 1);
                        const int c1 = std::min(c0 + 1, in_cols - 1);
                        const T tc = static_cast<T>(fc - c0);
                        const T w = u[static_cast<std::size_t>(r) * up.cols + k];
                        dst[static_cast<std::size_t>(r0) * in_cols + c0] += (T(1) - tr) * (T(1) - tc) * w;
                        dst[static_cast<std::size_t>(r0) * in_cols + c1] += (T(1) - tr) * tc * w;
                        dst[static_cast<std::size_t>(r1) * in_cols + c0] += tr * (T(1) - tc) * w;
                        dst[static_cast<std::size_t>(r1) * in_cols + c1] += tr * tc * w;
                    }
                }
            }
            accumulate(n.a, g);
            break;
        }
        case Op::concat: {
            const int ca = n.arg0;
            if (nodes_[n.a].needs_grad) {
                Tensor<T> g(ca, up.rows, up.cols);
                std::copy(up.data.begin(), up.data.begin() + g.size(), g.data.begin());
                accumulate(n.a, g);
            }
            if (n.b >= 0 && nodes_[n.b].needs_grad) {
                Tensor<T> g(up.channels - ca, up.rows, up.cols);
                std::copy(up.data.begin() + static_cast<std::size_t>(ca) * up.rows * up.cols,
                          up.data.end(), g.data.begin());
                accumulate(n.b, g);
            }
            break;
        }
        case Op::slice: {
            if (!nodes_[n.a].needs_grad) break;
            const Tensor<T>& in = nodes_[n.a].value;
            Tensor<T> g(in.channels, in.rows, in.cols);
            std::copy(up.data.begin(), up.data.end(), g.channel(n.arg0));
            accumulate(n.a, g);
            break;
        }
        case Op::crop: {
            if (!nodes_[n.a].needs_grad) break;
            const Tensor<T>& in = nodes_[n.a].value;
            Tensor<T> g(in.channels, in.rows, in.cols);
            for (int c = 0; c < up.channels; ++c)
                for (int r = 0; r < up.rows; ++r)
                    std::copy(up.channel(c) + static_cast<std::size_t>(r) * up.cols,
                              up.channel(c) + static_cast<std::size_t>(r) * up.cols + up.cols,
                              g.channel(c) + static_cast<std::size_t>(n.arg0 + r) * in.cols + n.arg1);
            accumulate(n.a, g);
            break;
        }
        case Op::activation: {
            if (!nodes_[n.a].needs_grad) break;
            const Tensor<T>& in = nodes_[n.a].value;
            Tensor<T> g = up;
            switch (n.act) {
                case Activation::identity:
                    break;
                case Activation::relu:
                    for (std::size_t i = 0; i < g.data.size(); ++i)
                        if (in.data[i] <= T(0)) g.data[i] = T(0);
                    break;
                case Activation::tanh:
                    for (std::size_t i = 0; i < g.data.size(); ++i) {
                        const T th = n.value.data[i];
                        g.data[i] *= (T(1) - th * th);
                    }
                    break;
                case Activation::swish:
                    for (std::size_t i = 0; i < g.data.size(); ++i) {
                        const T s = sigmoid(in.data[i]);
                        g.data[i] *= s * (T(1) + in.data[i] * (T(1) - s));
                    }
                    break;
            }
            accumulate(n.a, g);
            break;
        }
        case Op::hadamard: {
            if (nodes_[n.a].needs_grad) {
                Tensor<T> g = up;
                const Tensor<T>& tb = nodes_[n.b].value;
                for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] *= tb.data[i];
                accumulate(n.a, g);
            }
            if (nodes_[n.b].needs_grad) {
                Tensor<T> g = up;
                const Tensor<T>& ta = nodes_[n.a].value;
                for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] *= ta.data[i];
                accumulate(n.b, g);
            }
            break;
        }
        case Op::scale_add: {
            if (nodes_[n.a].needs_grad) {
                Tensor<T> g = up;
                for (T& v : g.data) v *= n.alpha;
                accumulate(n.a, g);
            }
            if (nodes_[n.b].needs_grad) {
                Tensor<T> g = up;
                for (T& v : g.data) v *= n.beta;
                accumulate(n.b, g);
            }
            break;
        }
        case Op::dilate: {
            if (!nodes_[n.a].needs_grad) break;
            const Tensor<T>& in = nodes_[n.a].value;
            Tensor<T> g(in.channels, in.rows, in.cols);
            for (int c = 0; c < in.channels; ++c) {
                const T* u = up.channel(c);
                T* dst = g.channel(c);
                for (int r = 0; r < in.rows; ++r)
                    for (int k = 0; k < in.cols; ++k)
                        dst[static_cast<std::size_t>(r) * in.cols + k] =
                            u[static_cast<std::size_t>(2 * r) * up.cols + 2 * k];
            }
            accumulate(n.a, g);
            break;
        }
        case Op::sum_squares: {
            if (!nodes_[n.a].needs_grad) break;
            const T u = up.data[0];
            const Tensor<T>& in = nodes_[n.a].value;
            Tensor<T> g(in.channels, in.rows, in.cols);
            if (n.b >= 0) {
                const Tensor<T>& m = nodes_[n.b].value;
                for (std::size_t i = 0; i < in.data.size(); ++i)
                    if (m.data[i] != T(0)) g.data[i] = T(2) * u * in.data[i];
            } else {
                for (std::size_t i = 0; i < in.data.size(); ++i)
                    g.data[i] = T(2) * u * in.data[i];
            }
            accumulate(n.a, g);
            break;
        }
    }
}

template class Tape<float>;
template class Tape<double>;

}  // namespace fdnet
