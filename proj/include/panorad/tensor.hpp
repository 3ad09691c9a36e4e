#pragma once

// Minimal dense NCHW tensor with reverse-mode gradients.
//
// Every op returns a fresh node holding its value and, when any input needs
// a gradient, a closure that pushes the node's gradient into its parents.
// Parameters are long-lived leaves; activations die with the last handle.

#include "panorad/random.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace panorad::nn {

using Shape = std::vector<int>;

class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class UsageError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

inline Eigen::Index numel(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), Eigen::Index(1),
                           [](Eigen::Index a, int b) { return a * b; });
}

inline std::string shape_string(const Shape& shape) {
    std::string s = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        s += (i ? ", " : "") + std::to_string(shape[i]);
    }
    return s + ")";
}

namespace detail {

// Records the branch taken by every piecewise op (ReLU family, |x|) while
// active. Finite-difference checks compare these hashes to detect
// perturbations that cross a kink, where central differences are invalid.
struct PatternRecorder {
    bool active = false;
    std::uint64_t hash = 0;
};

inline PatternRecorder& pattern_recorder() {
    thread_local PatternRecorder recorder;
    return recorder;
}

template <typename Derived>
void record_signs(const Eigen::ArrayBase<Derived>& x) {
    PatternRecorder& rec = pattern_recorder();
    if (!rec.active) {
        return;
    }
    std::uint64_t word = 0;
    int bits = 0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        word = (word << 1) | static_cast<std::uint64_t>(x[i] > 0);
        if (++bits == 64) {
            rec.hash = mix64(rec.hash ^ word);
            word = 0;
            bits = 0;
        }
    }
    rec.hash = mix64(rec.hash ^ word ^ (static_cast<std::uint64_t>(x.size()) << 1));
}

}  // namespace detail

template <typename Scalar>
struct Node {
    using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

    Shape shape;
    Array value;
    Array grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward;

    void ensure_grad() {
        if (grad.size() != value.size()) {
            grad = Array::Zero(value.size());
        }
    }
};

template <typename Scalar>
class TensorT {
public:
    using NodeType = Node<Scalar>;
    using Array = typename NodeType::Array;

    TensorT() = default;
    explicit TensorT(std::shared_ptr<NodeType> node) : node_(std::move(node)) {}

    static TensorT constant(Shape shape, Array value) {
        if (nn::numel(shape) != value.size()) {
            throw ShapeError("tensor: value size " + std::to_string(value.size()) +
                             " does not match shape " + shape_string(shape));
        }
        auto node = std::make_shared<NodeType>();
        node->shape = std::move(shape);
        node->value = std::move(value);
        return TensorT(std::move(node));
    }

    static TensorT zeros(Shape shape) {
        const Eigen::Index n = nn::numel(shape);
        return constant(std::move(shape), Array::Zero(n));
    }

    static TensorT full(Shape shape, Scalar v) {
        const Eigen::Index n = nn::numel(shape);
        return constant(std::move(shape), Array::Constant(n, v));
    }

    /// Leaf that accumulates gradients across backward passes.
    static TensorT parameter(Shape shape, Array value) {
        TensorT t = constant(std::move(shape), std::move(value));
        t.node_->requires_grad = true;
        return t;
    }

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    int dim(int i) const { return node_->shape.at(static_cast<std::size_t>(i)); }
    int rank() const { return static_cast<int>(node_->shape.size()); }
    Eigen::Index numel() const { return node_->value.size(); }
    bool requires_grad() const { return node_->requires_grad; }

    const Array& value() const { return node_->value; }
    Array& mutable_value() { return node_->value; }

    const Array& grad() const {
        node_->ensure_grad();
        return node_->grad;
    }
    Array& mutable_grad() {
        node_->ensure_grad();
        return node_->grad;
    }
    void zero_grad() {
        if (node_->grad.size() > 0) {
            node_->grad.setZero();
        }
    }

    Scalar item() const {
        if (numel() != 1) {
            throw UsageError("tensor: item() on a tensor of shape " + shape_string(shape()));
        }
        return node_->value[0];
    }

    NodeType* node() const { return node_.get(); }
    const std::shared_ptr<NodeType>& node_ptr() const { return node_; }

private:
    std::shared_ptr<NodeType> node_;
};

using Tensor = TensorT<float>;
using Tensord = TensorT<double>;

/// Creates an op result; records parents and the backward closure only when
/// some input requires a gradient.
template <typename Scalar>
TensorT<Scalar> make_result(Shape shape, typename Node<Scalar>::Array value,
                            std::vector<TensorT<Scalar>> inputs,
                            std::function<void(Node<Scalar>&)> backward) {
    auto node = std::make_shared<Node<Scalar>>();
    node->shape = std::move(shape);
    node->value = std::move(value);
    for (const auto& in : inputs) {
        if (in.defined() && in.requires_grad()) {
            node->requires_grad = true;
        }
    }
    if (node->requires_grad) {
        for (auto& in : inputs) {
            if (in.defined()) {
                node->parents.push_back(in.node_ptr());
            }
        }
        node->backward = std::move(backward);
    }
    return TensorT<Scalar>(std::move(node));
}

/// The nodes reachable from a root that need gradients, in topological order
/// (inputs before outputs).
template <typename Scalar>
class Graph {
public:
    explicit Graph(const TensorT<Scalar>& root) : root_(root) {
        if (!root.requires_grad()) {
            return;
        }
        std::unordered_set<Node<Scalar>*> visited;
        std::vector<std::pair<Node<Scalar>*, std::size_t>> stack{{root.node(), 0}};
        visited.insert(root.node());
        while (!stack.empty()) {
            auto& [node, next] = stack.back();
            if (next < node->parents.size()) {
                Node<Scalar>* parent = node->parents[next++].get();
                if (parent->requires_grad && visited.insert(parent).second) {
                    stack.emplace_back(parent, 0);
                }
            } else {
                order_.push_back(node);
                stack.pop_back();
            }
        }
    }

    const std::vector<Node<Scalar>*>& nodes() const { return order_; }

    /// Seeds d(root)/d(root) = 1 and propagates to every recorded node once.
    void backward() {
        if (root_.numel() != 1) {
            throw UsageError("backward: loss must be a scalar, got shape " +
                             shape_string(root_.shape()));
        }
        if (order_.empty()) {
            return;
        }
        root_.node()->ensure_grad();
        root_.node()->grad[0] += Scalar(1);
        for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
            Node<Scalar>* node = *it;
            if (node->backward) {
                node->ensure_grad();
                node->backward(*node);
            }
        }
    }

private:
    TensorT<Scalar> root_;
    std::vector<Node<Scalar>*> order_;
};

template <typename Scalar>
void backward(const TensorT<Scalar>& loss) {
    if (loss.numel() != 1) {
        throw UsageError("backward: loss must be a scalar, got shape " + shape_string(loss.shape()));
    }
    Graph<Scalar>(loss).backward();
}

// ---------------------------------------------------------------------------
// Element-wise ops

template <typename Scalar>
TensorT<Scalar> detach(const TensorT<Scalar>& x) {
    return TensorT<Scalar>::constant(x.shape(), x.value());
}

template <typename Scalar>
void require_same_shape(const TensorT<Scalar>& a, const TensorT<Scalar>& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
    }
}

template <typename Scalar>
TensorT<Scalar> operator+(const TensorT<Scalar>& a, const TensorT<Scalar>& b) {
    require_same_shape(a, b, "add");
    auto pa = a.node_ptr();
    auto pb = b.node_ptr();
    return make_result<Scalar>(a.shape(), a.value() + b.value(), {a, b}, [pa, pb](Node<Scalar>& out) {
        if (pa->requires_grad) {
            pa->ensure_grad();
            pa->grad += out.grad;
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            pb->grad += out.grad;
        }
    });
}

template <typename Scalar>
TensorT<Scalar> operator-(const TensorT<Scalar>& a, const TensorT<Scalar>& b) {
    require_same_shape(a, b, "sub");
    auto pa = a.node_ptr();
    auto pb = b.node_ptr();
    return make_result<Scalar>(a.shape(), a.value() - b.value(), {a, b}, [pa, pb](Node<Scalar>& out) {
        if (pa->requires_grad) {
            pa->ensure_grad();
            pa->grad += out.grad;
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            pb->grad -= out.grad;
        }
    });
}

template <typename Scalar>
TensorT<Scalar> operator*(Scalar s, const TensorT<Scalar>& x) {
    auto px = x.node_ptr();
    return make_result<Scalar>(x.shape(), s * x.value(), {x}, [px, s](Node<Scalar>& out) {
        px->ensure_grad();
        px->grad += s * out.grad;
    });
}

/// Element-wise product with a constant array of the same size.
template <typename Scalar>
TensorT<Scalar> mul_constant(const TensorT<Scalar>& x, const typename Node<Scalar>::Array& c) {
    if (c.size() != x.numel()) {
        throw ShapeError("mul_constant: size mismatch");
    }
    auto px = x.node_ptr();
    return make_result<Scalar>(x.shape(), x.value() * c, {x}, [px, c](Node<Scalar>& out) {
        px->ensure_grad();
        px->grad += out.grad * c;
    });
}

template <typename Scalar>
TensorT<Scalar> leaky_relu(const TensorT<Scalar>& x, Scalar slope = Scalar(0.2)) {
    detail::record_signs(x.value());
    auto px = x.node_ptr();
    typename Node<Scalar>::Array y = (x.value() > Scalar(0)).select(x.value(), slope * x.value());
    return make_result<Scalar>(x.shape(), std::move(y), {x}, [px, slope](Node<Scalar>& out) {
        px->ensure_grad();
        px->grad += (px->value > Scalar(0)).select(out.grad, slope * out.grad);
    });
}

template <typename Scalar>
TensorT<Scalar> relu(const TensorT<Scalar>& x) {
    return leaky_relu(x, Scalar(0));
}

template <typename Scalar>
TensorT<Scalar> sigmoid(const TensorT<Scalar>& x) {
    typename Node<Scalar>::Array y = Scalar(1) / (Scalar(1) + (-x.value()).exp());
    auto px = x.node_ptr();
    return make_result<Scalar>(x.shape(), y, {x}, [px, y](Node<Scalar>& out) {
        px->ensure_grad();
        px->grad += out.grad * y * (Scalar(1) - y);
    });
}

// ---------------------------------------------------------------------------
// Reductions and losses (scalar results have shape {})

template <typename Scalar>
TensorT<Scalar> sum(const TensorT<Scalar>& x) {
    typename Node<Scalar>::Array v(1);
    v[0] = x.value().sum();
    auto px = x.node_ptr();
    return make_result<Scalar>(Shape{}, std::move(v), {x}, [px](Node<Scalar>& out) {
        px->ensure_grad();
        px->grad += out.grad[0];
    });
}

template <typename Scalar>
TensorT<Scalar> mean(const TensorT<Scalar>& x) {
    return (Scalar(1) / static_cast<Scalar>(x.numel())) * sum(x);
}

/// Sum of x * c for a constant array c (a fixed random projection).
template <typename Scalar>
TensorT<Scalar> weighted_sum(const TensorT<Scalar>& x, const typename Node<Scalar>::Array& c) {
    return sum(mul_constant(x, c));
}

/// mean |a - b|
template <typename Scalar>
TensorT<Scalar> l1_loss(const TensorT<Scalar>& a, const TensorT<Scalar>& b) {
    require_same_shape(a, b, "l1_loss");
    const typename Node<Scalar>::Array diff = a.value() - b.value();
    detail::record_signs(diff);
    typename Node<Scalar>::Array v(1);
    v[0] = diff.abs().mean();
    const Scalar n = static_cast<Scalar>(diff.size());
    auto pa = a.node_ptr();
    auto pb = b.node_ptr();
    return make_result<Scalar>(Shape{}, std::move(v), {a, b}, [pa, pb, diff, n](Node<Scalar>& out) {
        const typename Node<Scalar>::Array g =
            (out.grad[0] / n) * diff.sign();
        if (pa->requires_grad) {
            pa->ensure_grad();
            pa->grad += g;
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            pb->grad -= g;
        }
    });
}

/// mean (a - b)^2
template <typename Scalar>
TensorT<Scalar> mse_loss(const TensorT<Scalar>& a, const TensorT<Scalar>& b) {
    require_same_shape(a, b, "mse_loss");
    const typename Node<Scalar>::Array diff = a.value() - b.value();
    typename Node<Scalar>::Array v(1);
    v[0] = diff.square().mean();
    const Scalar n = static_cast<Scalar>(diff.size());
    auto pa = a.node_ptr();
    auto pb = b.node_ptr();
    return make_result<Scalar>(Shape{}, std::move(v), {a, b}, [pa, pb, diff, n](Node<Scalar>& out) {
        const typename Node<Scalar>::Array g = (Scalar(2) * out.grad[0] / n) * diff;
        if (pa->requires_grad) {
            pa->ensure_grad();
            pa->grad += g;
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            pb->grad -= g;
        }
    });
}

/// mean (x - target)^2 against a constant target value.
template <typename Scalar>
TensorT<Scalar> mse_to(const TensorT<Scalar>& x, Scalar target) {
    return mse_loss(x, TensorT<Scalar>::full(x.shape(), target));
}

// ---------------------------------------------------------------------------
// Spatial ops on (B, C, H, W)

namespace detail {

template <typename Scalar>
void require_rank4(const TensorT<Scalar>& x, const char* op) {
    if (x.rank() != 4) {
        throw ShapeError(std::string(op) + ": expected (B, C, H, W), got " + shape_string(x.shape()));
    }
}

inline int wrap(int i, int n) {
    const int r = i % n;
    return r < 0 ? r + n : r;
}

}  // namespace detail

/// Concatenates along the channel axis.
template <typename Scalar>
TensorT<Scalar> concat_channels(const std::vector<TensorT<Scalar>>& parts) {
    if (parts.empty()) {
        throw UsageError("concat_channels: nothing to concatenate");
    }
    for (const auto& p : parts) {
        detail::require_rank4(p, "concat_channels");
    }
    const int batch = parts[0].dim(0);
    const int height = parts[0].dim(2);
    const int width = parts[0].dim(3);
    int channels = 0;
    for (const auto& p : parts) {
        if (p.dim(0) != batch || p.dim(2) != height || p.dim(3) != width) {
            throw ShapeError("concat_channels: spatial/batch mismatch");
        }
        channels += p.dim(1);
    }
    const Eigen::Index plane = Eigen::Index(height) * width;
    typename Node<Scalar>::Array v(Eigen::Index(batch) * channels * plane);
    for (int b = 0; b < batch; ++b) {
        Eigen::Index offset = Eigen::Index(b) * channels * plane;
        for (const auto& p : parts) {
            const Eigen::Index block = Eigen::Index(p.dim(1)) * plane;
            v.segment(offset, block) = p.value().segment(Eigen::Index(b) * block, block);
            offset += block;
        }
    }
    std::vector<std::shared_ptr<Node<Scalar>>> nodes;
    for (const auto& p : parts) {
        nodes.push_back(p.node_ptr());
    }
    return make_result<Scalar>(Shape{batch, channels, height, width}, std::move(v), parts,
                               [nodes, batch, channels, plane](Node<Scalar>& out) {
                                   for (int b = 0; b < batch; ++b) {
                                       Eigen::Index offset = Eigen::Index(b) * channels * plane;
                                       for (const auto& n : nodes) {
                                           const Eigen::Index block = Eigen::Index(n->shape[1]) * plane;
                                           if (n->requires_grad) {
                                               n->ensure_grad();
                                               n->grad.segment(Eigen::Index(b) * block, block) +=
                                                   out.grad.segment(offset, block);
                                           }
                                           offset += block;
                                       }
                                   }
                               });
}

/// Channels [first, first + count).
template <typename Scalar>
TensorT<Scalar> slice_channels(const TensorT<Scalar>& x, int first, int count) {
    detail::require_rank4(x, "slice_channels");
    const int batch = x.dim(0);
    const int channels = x.dim(1);
    if (first < 0 || count <= 0 || first + count > channels) {
        throw ShapeError("slice_channels: range outside channel axis");
    }
    const Eigen::Index plane = Eigen::Index(x.dim(2)) * x.dim(3);
    typename Node<Scalar>::Array v(Eigen::Index(batch) * count * plane);
    for (int b = 0; b < batch; ++b) {
        v.segment(Eigen::Index(b) * count * plane, count * plane) =
            x.value().segment((Eigen::Index(b) * channels + first) * plane, count * plane);
    }
    auto px = x.node_ptr();
    return make_result<Scalar>(Shape{batch, count, x.dim(2), x.dim(3)}, std::move(v), {x},
                               [px, batch, channels, first, count, plane](Node<Scalar>& out) {
                                   px->ensure_grad();
                                   for (int b = 0; b < batch; ++b) {
                                       px->grad.segment((Eigen::Index(b) * channels + first) * plane,
                                                        count * plane) +=
                                           out.grad.segment(Eigen::Index(b) * count * plane,
                                                            count * plane);
                                   }
                               });
}

/// Nearest-neighbour 2x upsampling.
template <typename Scalar>
TensorT<Scalar> upsample2x(const TensorT<Scalar>& x) {
    detail::require_rank4(x, "upsample2x");
    const int planes = x.dim(0) * x.dim(1);
    const int height = x.dim(2);
    const int width = x.dim(3);
    typename Node<Scalar>::Array v(Eigen::Index(planes) * 4 * height * width);
    for (int p = 0; p < planes; ++p) {
        const Scalar* src = x.value().data() + Eigen::Index(p) * height * width;
        Scalar* dst = v.data() + Eigen::Index(p) * 4 * height * width;
        for (int i = 0; i < 2 * height; ++i) {
            for (int j = 0; j < 2 * width; ++j) {
                dst[Eigen::Index(i) * 2 * width + j] = src[Eigen::Index(i / 2) * width + j / 2];
            }
        }
    }
    auto px = x.node_ptr();
    return make_result<Scalar>(Shape{x.dim(0), x.dim(1), 2 * height, 2 * width}, std::move(v), {x},
                               [px, planes, height, width](Node<Scalar>& out) {
                                   px->ensure_grad();
                                   for (int p = 0; p < planes; ++p) {
                                       Scalar* g = px->grad.data() + Eigen::Index(p) * height * width;
                                       const Scalar* go =
                                           out.grad.data() + Eigen::Index(p) * 4 * height * width;
                                       for (int i = 0; i < 2 * height; ++i) {
                                           for (int j = 0; j < 2 * width; ++j) {
                                               g[Eigen::Index(i / 2) * width + j / 2] +=
                                                   go[Eigen::Index(i) * 2 * width + j];
                                           }
                                       }
                                   }
                               });
}

/// 2x2 average pooling; height and width must be even.
template <typename Scalar>
TensorT<Scalar> avg_pool2x(const TensorT<Scalar>& x) {
    detail::require_rank4(x, "avg_pool2x");
    const int planes = x.dim(0) * x.dim(1);
    const int height = x.dim(2);
    const int width = x.dim(3);
    if (height % 2 || width % 2) {
        throw ShapeError("avg_pool2x: spatial size must be even, got " + shape_string(x.shape()));
    }
    const int oh = height / 2;
    const int ow = width / 2;
    typename Node<Scalar>::Array v(Eigen::Index(planes) * oh * ow);
    for (int p = 0; p < planes; ++p) {
        const Scalar* src = x.value().data() + Eigen::Index(p) * height * width;
        Scalar* dst = v.data() + Eigen::Index(p) * oh * ow;
        for (int i = 0; i < oh; ++i) {
            for (int j = 0; j < ow; ++j) {
                const Scalar* r0 = src + Eigen::Index(2 * i) * width + 2 * j;
                const Scalar* r1 = r0 + width;
                dst[Eigen::Index(i) * ow + j] = Scalar(0.25) * ((r0[0] + r0[1]) + (r1[0] + r1[1]));
            }
        }
    }
    auto px = x.node_ptr();
    return make_result<Scalar>(Shape{x.dim(0), x.dim(1), oh, ow}, std::move(v), {x},
                               [px, planes, height, width, oh, ow](Node<Scalar>& out) {
                                   px->ensure_grad();
                                   for (int p = 0; p < planes; ++p) {
                                       Scalar* g = px->grad.data() + Eigen::Index(p) * height * width;
                                       const Scalar* go = out.grad.data() + Eigen::Index(p) * oh * ow;
                                       for (int i = 0; i < height; ++i) {
                                           for (int j = 0; j < width; ++j) {
                                               g[Eigen::Index(i) * width + j] +=
                                                   Scalar(0.25) * go[Eigen::Index(i / 2) * ow + j / 2];
                                           }
                                       }
                                   }
                               });
}

namespace detail {

/// Positions per im2col tile: one 64-byte vector of scalars.
template <typename Scalar>
inline constexpr Eigen::Index kConvTile = 64 / sizeof(Scalar);

template <typename Scalar>
struct ConvVector;
template <>
struct ConvVector<float> {
    typedef float type __attribute__((vector_size(64)));
};
template <>
struct ConvVector<double> {
    typedef double type __attribute__((vector_size(64)));
};

/// Output channels accumulated together in registers.
inline constexpr int kConvBlock = 8;

/// out[co][p] = sum_kk w[co][kk] * cols[p][kk] for one tile of positions,
/// where `cols` holds the tile as (kdim, kConvTile) and `w` is zero-padded
/// to a whole number of channel blocks. Each lane of the vector is one
/// output position, so every position runs the identical operation sequence.
template <typename Scalar>
void conv_tile(const Scalar* cols, const Scalar* w, Eigen::Index kdim, int cout_padded, Scalar* out) {
    using Vec = typename ConvVector<Scalar>::type;
    constexpr Eigen::Index lanes = kConvTile<Scalar>;
    for (int co0 = 0; co0 < cout_padded; co0 += kConvBlock) {
        Vec acc[kConvBlock];
        for (auto& a : acc) {
            a = Vec{} * Scalar(0);
        }
        const Scalar* wb = w + Eigen::Index(co0) * kdim;
        for (Eigen::Index kk = 0; kk < kdim; ++kk) {
            Vec c;
            std::memcpy(&c, cols + kk * lanes, sizeof(Vec));
            for (int b = 0; b < kConvBlock; ++b) {
                acc[b] += wb[Eigen::Index(b) * kdim + kk] * c;
            }
        }
        for (int b = 0; b < kConvBlock; ++b) {
            std::memcpy(out + Eigen::Index(co0 + b) * lanes, &acc[b], sizeof(Vec));
        }
    }
}

}  // namespace detail

/// 2-D convolution (cross-correlation) with circular padding of k/2 columns
/// along the width (longitude) axis and `pad_v` zero rows along the height.
///
/// weight: (C_out, C_in, k, k) with k odd; bias: (C_out) or undefined.
/// Output: (B, C_out, (H + 2 pad_v - k) / stride + 1, W / stride).
template <typename Scalar>
TensorT<Scalar> conv2d(const TensorT<Scalar>& x, const TensorT<Scalar>& weight,
                       const TensorT<Scalar>& bias, int stride, int pad_v) {
    using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    using ConstRowMap = Eigen::Map<const RowMatrix>;
    using RowMap = Eigen::Map<RowMatrix>;
    constexpr Eigen::Index lanes = detail::kConvTile<Scalar>;

    detail::require_rank4(x, "conv2d");
    detail::require_rank4(weight, "conv2d weight");
    const int batch = x.dim(0);
    const int cin = x.dim(1);
    const int height = x.dim(2);
    const int width = x.dim(3);
    const int cout = weight.dim(0);
    const int k = weight.dim(2);
    if (weight.dim(1) != cin) {
        throw ShapeError("conv2d: weight expects " + std::to_string(weight.dim(1)) +
                         " input channels, got " + std::to_string(cin));
    }
    if (weight.dim(3) != k || k % 2 == 0) {
        throw ShapeError("conv2d: kernel must be square with odd size");
    }
    if (stride != 1 && stride != 2) {
        throw ShapeError("conv2d: stride must be 1 or 2");
    }
    if (width % stride != 0) {
        throw ShapeError("conv2d: width " + std::to_string(width) + " not divisible by stride " +
                         std::to_string(stride));
    }
    if (bias.defined() && bias.numel() != cout) {
        throw ShapeError("conv2d: bias size mismatch");
    }
    const int out_h = (height + 2 * pad_v - k) / stride + 1;
    const int out_w = width / stride;
    if (out_h < 1 || pad_v < 0) {
        throw ShapeError("conv2d: kernel taller than padded input");
    }
    const int pad_w = k / 2;
    const Eigen::Index kdim = Eigen::Index(cin) * k * k;
    const Eigen::Index out_plane = Eigen::Index(out_h) * out_w;
    const Eigen::Index positions = Eigen::Index(batch) * out_plane;
    const Eigen::Index in_plane = Eigen::Index(height) * width;
    const Eigen::Index tiles = (positions + lanes - 1) / lanes;

    // Positions p = (b, oh, ow) are processed in tiles of `lanes`; each tile
    // is expanded on demand into a (kdim, lanes) im2col block whose row
    // kk = (ci, kh, kw) holds the input sample under kernel tap kk.
    struct Geometry {
        std::vector<Eigen::Index> batch_offset;  // per position: b * C_in * H * W
        std::vector<int> row;                    // per position: oh * stride - pad_v
        std::vector<int> col;                    // per position: ow
        std::vector<int> wrapped;                // (kw, ow) -> input column
    };
    auto geo = std::make_shared<Geometry>();
    geo->batch_offset.resize(static_cast<std::size_t>(tiles * lanes), 0);
    geo->row.resize(static_cast<std::size_t>(tiles * lanes), -(1 << 29));
    geo->col.resize(static_cast<std::size_t>(tiles * lanes), 0);
    for (Eigen::Index p = 0; p < positions; ++p) {
        const Eigen::Index n = p / out_plane;
        const Eigen::Index r = p - n * out_plane;
        geo->batch_offset[static_cast<std::size_t>(p)] = n * cin * in_plane;
        geo->row[static_cast<std::size_t>(p)] = static_cast<int>(r / out_w) * stride - pad_v;
        geo->col[static_cast<std::size_t>(p)] = static_cast<int>(r % out_w);
    }
    geo->wrapped.resize(static_cast<std::size_t>(k) * out_w);
    for (int kw = 0; kw < k; ++kw) {
        for (int ow = 0; ow < out_w; ++ow) {
            geo->wrapped[static_cast<std::size_t>(kw) * out_w + ow] = detail::wrap(ow * stride - pad_w + kw, width);
        }
    }
    // Input offset of tap (kh, kw) for position p, or -1 in the zero padding.
    const auto tap = [geo, k, out_w, height, width](Eigen::Index p, int kh, int kw) -> Eigen::Index {
        const int ih = geo->row[static_cast<std::size_t>(p)] + kh;
        if (ih < 0 || ih >= height) {
            return -1;
        }
        return geo->batch_offset[static_cast<std::size_t>(p)] + Eigen::Index(ih) * width +
               geo->wrapped[static_cast<std::size_t>(kw) * out_w + geo->col[static_cast<std::size_t>(p)]];
    };
    // Input offsets of every tap for positions [p0, p0 + ld): entry
    // (kh * k + kw) * ld + j, with -1 for zero padding and absent positions.
    const Eigen::Index span = tiles * lanes;
    const auto tap_offsets = [tap, k, span](Eigen::Index p0, Eigen::Index ld, Eigen::Index* offs) {
        const Eigen::Index n = std::min(ld, span - p0);
        for (int kh = 0; kh < k; ++kh) {
            for (int kw = 0; kw < k; ++kw) {
                Eigen::Index* row = offs + (Eigen::Index(kh) * k + kw) * ld;
                for (Eigen::Index j = 0; j < n; ++j) {
                    row[j] = tap(p0 + j, kh, kw);
                }
                std::fill(row + n, row + ld, Eigen::Index(-1));
            }
        }
    };
    // (kdim, ld) row-major im2col block from precomputed offsets.
    const auto gather = [cin, k, in_plane](const Scalar* xv, const Eigen::Index* offs, Eigen::Index ld,
                                           Scalar* block) {
        for (int ci = 0; ci < cin; ++ci) {
            const Scalar* xc = xv + Eigen::Index(ci) * in_plane;
            for (int kk2 = 0; kk2 < k * k; ++kk2) {
                const Eigen::Index* o = offs + Eigen::Index(kk2) * ld;
                Scalar* dst = block + (Eigen::Index(ci) * k * k + kk2) * ld;
                for (Eigen::Index j = 0; j < ld; ++j) {
                    dst[j] = o[j] < 0 ? Scalar(0) : xc[o[j]];
                }
            }
        }
    };

    const int cout_padded = (cout + detail::kConvBlock - 1) / detail::kConvBlock * detail::kConvBlock;
    std::vector<Scalar> wpad(static_cast<std::size_t>(Eigen::Index(cout_padded) * kdim), Scalar(0));
    std::copy(weight.value().data(), weight.value().data() + weight.numel(), wpad.begin());
    std::vector<Scalar> block(static_cast<std::size_t>(kdim * lanes));
    std::vector<Eigen::Index> offs(static_cast<std::size_t>(k * k * lanes));
    std::vector<Scalar> tile_out(static_cast<std::size_t>(Eigen::Index(cout_padded) * lanes));
    typename Node<Scalar>::Array v(Eigen::Index(batch) * cout * out_plane);
    for (Eigen::Index t = 0; t < tiles; ++t) {
        tap_offsets(t * lanes, lanes, offs.data());
        gather(x.value().data(), offs.data(), lanes, block.data());
        detail::conv_tile(block.data(), wpad.data(), kdim, cout_padded, tile_out.data());
        const Eigen::Index end = std::min(lanes, positions - t * lanes);
        for (int co = 0; co < cout; ++co) {
            const Scalar b_co = bias.defined() ? bias.value()[co] : Scalar(0);
            for (Eigen::Index j = 0; j < end; ++j) {
                const Eigen::Index p = t * lanes + j;
                const Eigen::Index n = p / out_plane;
                v[(n * cout + co) * out_plane + (p - n * out_plane)] =
                    tile_out[static_cast<std::size_t>(Eigen::Index(co) * lanes + j)] + b_co;
            }
        }
    }

    auto px = x.node_ptr();
    auto pw = weight.node_ptr();
    auto pb = bias.defined() ? bias.node_ptr() : nullptr;
    return make_result<Scalar>(
        Shape{batch, cout, out_h, out_w}, std::move(v), {x, weight, bias},
        [=](Node<Scalar>& out) {
            const bool need_w = pw->requires_grad;
            const bool need_x = px->requires_grad;
            if (need_w) {
                pw->ensure_grad();
            }
            if (need_x) {
                px->ensure_grad();
            }
            if (pb && pb->requires_grad) {
                pb->ensure_grad();
                for (int b = 0; b < batch; ++b) {
                    for (int co = 0; co < cout; ++co) {
                        pb->grad[co] += out.grad.segment((Eigen::Index(b) * cout + co) * out_plane, out_plane).sum();
                    }
                }
            }
            if (!need_w && !need_x) {
                return;
            }
            // Gradients are formed over chunks of several tiles at a time.
            constexpr Eigen::Index chunk_tiles = 16;
            const Eigen::Index chunk = chunk_tiles * lanes;
            const ConstRowMap wmat(pw->value.data(), cout, kdim);
            RowMatrix dw = RowMatrix::Zero(need_w ? cout : 0, need_w ? kdim : 0);
            RowMatrix dy(cout, chunk);
            RowMatrix cols(kdim, chunk);
            RowMatrix dcols(kdim, chunk);
            std::vector<Eigen::Index> offs(static_cast<std::size_t>(k * k * chunk));
            for (Eigen::Index t0 = 0; t0 < tiles; t0 += chunk_tiles) {
                const Eigen::Index p0 = t0 * lanes;
                const Eigen::Index end = std::min(chunk, positions - p0);
                tap_offsets(p0, chunk, offs.data());
                dy.setZero();
                for (Eigen::Index j = 0; j < end; ++j) {
                    const Eigen::Index p = p0 + j;
                    const Eigen::Index n = p / out_plane;
                    for (int co = 0; co < cout; ++co) {
                        dy(co, j) = out.grad[(n * cout + co) * out_plane + (p - n * out_plane)];
                    }
                }
                if (need_w) {
                    gather(px->value.data(), offs.data(), chunk, cols.data());
                    dw.noalias() += dy * cols.transpose();
                }
                if (need_x) {
                    dcols.noalias() = wmat.transpose() * dy;
                    for (int ci = 0; ci < cin; ++ci) {
                        Scalar* gc = px->grad.data() + Eigen::Index(ci) * in_plane;
                        for (int kk2 = 0; kk2 < k * k; ++kk2) {
                            const Eigen::Index* o = offs.data() + Eigen::Index(kk2) * chunk;
                            const Scalar* src = dcols.data() + (Eigen::Index(ci) * k * k + kk2) * chunk;
                            for (Eigen::Index j = 0; j < end; ++j) {
                                if (o[j] >= 0) {
                                    gc[o[j]] += src[j];
                                }
                            }
                        }
                    }
                }
            }
            if (need_w) {
                RowMap(pw->grad.data(), cout, kdim) += dw;
            }
        });
}

/// Nearest 2x upsampling followed by a stride-1 convolution.
template <typename Scalar>
TensorT<Scalar> upsample_conv(const TensorT<Scalar>& x, const TensorT<Scalar>& weight,
                              const TensorT<Scalar>& bias, int pad_v) {
    return conv2d(upsample2x(x), weight, bias, 1, pad_v);
}

/// Circular shift along the width axis: column w of the result is column
/// (w - shift) mod W of the input. Value-only (no gradient).
template <typename Scalar>
TensorT<Scalar> roll_width(const TensorT<Scalar>& x, int shift) {
    detail::require_rank4(x, "roll_width");
    const int rows = x.dim(0) * x.dim(1) * x.dim(2);
    const int width = x.dim(3);
    typename Node<Scalar>::Array v(x.numel());
    for (int r = 0; r < rows; ++r) {
        for (int w = 0; w < width; ++w) {
            v[Eigen::Index(r) * width + w] =
                x.value()[Eigen::Index(r) * width + detail::wrap(w - shift, width)];
        }
    }
    return TensorT<Scalar>::constant(x.shape(), std::move(v));
}

}  // namespace panorad::nn
