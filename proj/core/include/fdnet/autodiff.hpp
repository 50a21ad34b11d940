#pragma once

#include <cstdint>
#include <deque>
#include <vector>

#include "fdnet/conv.hpp"
#include "fdnet/tensor.hpp"

namespace fdnet {

enum class Activation : std::uint8_t { identity, relu, tanh, swish };

Activation activation_from_string(const std::string& name);
const char* to_string(Activation a);

/// Binding of a conv node to externally owned weights. Gradient sinks may be
/// null, in which case the weights are treated as constants (loss stencils).
template <typename T>
struct ConvRef {
    const Kernel<T>* kernel = nullptr;
    const std::vector<T>* bias = nullptr;
    Kernel<T>* kernel_grad = nullptr;
    std::vector<T>* bias_grad = nullptr;
};

/// Define-by-run reverse-mode differentiation record. A tape is rebuilt for
/// every forward pass; saved activations live until backward() completes.
/// Single-owner, single-threaded; independent tapes may run concurrently.
template <typename T>
class Tape {
public:
    struct Var {
        int id = -1;
        bool valid() const { return id >= 0; }
    };

    /// Constant leaf: no gradient is tracked through it.
    Var leaf(Tensor<T> value);
    /// Differentiable leaf (network input under test, or any probe point).
    Var input(Tensor<T> value);
    /// Takes ownership of a constant kernel, returning a pointer that stays
    /// valid for the tape's lifetime (for ConvRef bindings).
    const Kernel<T>* hold_kernel(Kernel<T> k);

    Var conv2d(Var x, ConvRef<T> ref);
    Var avg_pool2(Var x);
    Var upsample_bilinear2(Var x, int target_rows, int target_cols);
    Var concat_channels(Var a, Var b);
    Var slice_channels(Var x, int first, int count);
    Var crop(Var x, int row0, int col0, int rows, int cols);
    Var activation(Var x, Activation kind);
    Var hadamard(Var a, Var b);
    Var scale_add(Var a, Var b, T alpha, T beta);
    Var dilate(Var x);
    /// Masked sum of squared entries; result is a 1x1x1 scalar tensor.
    /// An invalid mask var means "all nodes".
    Var sum_squares(Var x, Var mask = Var{});

    const Tensor<T>& value(Var v) const { return nodes_[check(v)].value; }
    /// Scalar payload of a 1x1x1 tensor.
    T scalar(Var v) const;

    /// Reverse pass from a scalar loss node (seed gradient 1). Parameter
    /// gradients accumulate into the ConvRef sinks.
    void backward(Var loss);
    /// Reverse pass seeded with an arbitrary upstream gradient at `node`.
    void backward_from(Var node, const Tensor<T>& upstream);

    /// Gradient w.r.t. any differentiable node after a backward pass.
    const Tensor<T>& grad(Var v) const;

    std::size_t node_count() const { return nodes_.size(); }

private:
    enum class Op : std::uint8_t {
        leaf,
        conv,
        avg_pool2,
        upsample,
        concat,
        slice,
        crop,
        activation,
        hadamard,
        scale_add,
        dilate,
        sum_squares,
    };

    struct Node {
        Op op = Op::leaf;
        int a = -1;
        int b = -1;
        bool needs_grad = false;
        Tensor<T> value;
        ConvRef<T> conv;
        Activation act = Activation::identity;
        T alpha = T(0), beta = T(0);
        int arg0 = 0, arg1 = 0, arg2 = 0, arg3 = 0;  // op-specific geometry
    };

    int check(Var v) const;
    Var push(Node n);
    Tensor<T>& grad_buffer(int id);
    void accumulate(int id, const Tensor<T>& g);
    void backprop_node(int id);
    void run_backward(int seed_id);

    std::vector<Node> nodes_;
    std::vector<Tensor<T>> grads_;
    std::deque<Kernel<T>> held_kernels_;
};

using TapeF = Tape<float>;
using TapeD = Tape<double>;

}  // namespace fdnet
