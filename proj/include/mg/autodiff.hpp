#pragma once

#include "mg/image.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <memory>
#include <numeric>
#include <unordered_set>
#include <vector>

namespace mg::ad {

template <class S>
using Arr = Eigen::Array<S, Eigen::Dynamic, 1>;
template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// One tensor in the computation graph. Shape is a dimension list; value
/// and gradient are flat row-major arrays of the same length.
template <class S>
struct Node {
    std::vector<int> shape;
    Arr<S> value;
    Arr<S> grad;
    bool requires_grad = true;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;

    Eigen::Index numel() const { return value.size(); }
};

template <class S>
using NodePtr = std::shared_ptr<Node<S>>;

template <class S>
Eigen::Index shape_numel(const std::vector<int>& shape) {
    Eigen::Index n = 1;
    for (int d : shape) n *= d;
    return n;
}

template <class S>
NodePtr<S> make_leaf(std::vector<int> shape, Arr<S> value, bool requires_grad = true) {
    auto n = std::make_shared<Node<S>>();
    if (value.size() != shape_numel<S>(shape))
        throw ShapeError("make_leaf: value size does not match shape");
    n->shape = std::move(shape);
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    return n;
}

template <class S>
NodePtr<S> make_constant(std::vector<int> shape, Arr<S> value) {
    return make_leaf<S>(std::move(shape), std::move(value), false);
}

template <class S>
NodePtr<S> make_op(std::vector<int> shape, Arr<S> value,
                   std::vector<NodePtr<S>> parents, std::function<void(Node<S>&)> bw) {
    auto n = make_leaf<S>(std::move(shape), std::move(value));
    bool any = false;
    for (const auto& p : parents) any = any || p->requires_grad;
    n->requires_grad = any;
    n->parents = std::move(parents);
    n->backward_fn = std::move(bw);
    if (!n->value.allFinite()) throw NumericError("op produced non-finite values");
    return n;
}

/// Reverse pass from a scalar node. Zeroes gradients of all reachable nodes
/// first, then accumulates; repeated calls on disjoint graphs are independent.
template <class S>
void backward(const NodePtr<S>& loss) {
    if (loss->numel() != 1) throw ShapeError("backward: loss must be scalar");
    std::vector<Node<S>*> order;
    std::unordered_set<Node<S>*> seen;
    std::vector<std::pair<Node<S>*, std::size_t>> stack;
    stack.emplace_back(loss.get(), 0);
    seen.insert(loss.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node<S>* p = node->parents[next++].get();
            if (seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    for (Node<S>* n : order) n->grad = Arr<S>::Zero(n->numel());
    loss->grad[0] = S(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node<S>* n = *it;
        if (n->backward_fn && n->requires_grad) n->backward_fn(*n);
    }
}

namespace detail {
template <class S>
void check_same_shape(const NodePtr<S>& a, const NodePtr<S>& b, const char* op) {
    if (a->shape != b->shape) throw ShapeError(std::string(op) + ": shape mismatch");
}
}  // namespace detail

template <class S>
NodePtr<S> add(const NodePtr<S>& a, const NodePtr<S>& b) {
    detail::check_same_shape(a, b, "add");
    return make_op<S>(a->shape, a->value + b->value, {a, b}, [a, b](Node<S>& n) {
        if (a->requires_grad) a->grad += n.grad;
        if (b->requires_grad) b->grad += n.grad;
    });
}

template <class S>
NodePtr<S> mul_elementwise(const NodePtr<S>& a, const NodePtr<S>& b) {
    detail::check_same_shape(a, b, "mul_elementwise");
    return make_op<S>(a->shape, a->value * b->value, {a, b}, [a, b](Node<S>& n) {
        if (a->requires_grad) a->grad += n.grad * b->value;
        if (b->requires_grad) b->grad += n.grad * a->value;
    });
}

template <class S>
NodePtr<S> scale(const NodePtr<S>& a, S c) {
    return make_op<S>(a->shape, a->value * c, {a}, [a, c](Node<S>& n) {
        if (a->requires_grad) a->grad += n.grad * c;
    });
}

template <class S>
NodePtr<S> leaky_relu(const NodePtr<S>& a, S slope) {
    Arr<S> v = a->value.max(S(0)) + a->value.min(S(0)) * slope;
    return make_op<S>(a->shape, std::move(v), {a}, [a, slope](Node<S>& n) {
        if (!a->requires_grad) return;
        a->grad += n.grad * (a->value > S(0)).select(Arr<S>::Constant(a->numel(), S(1)),
                                                     Arr<S>::Constant(a->numel(), slope));
    });
}

template <class S>
NodePtr<S> sigmoid(const NodePtr<S>& a) {
    Arr<S> v = (S(1) / (S(1) + (-a->value).exp()));
    return make_op<S>(a->shape, std::move(v), {a}, [a](Node<S>& n) {
        if (a->requires_grad) a->grad += n.grad * n.value * (S(1) - n.value);
    });
}

/// clamp(x, 0, 1); subgradient passes only where the input is strictly inside.
template <class S>
NodePtr<S> clamp01(const NodePtr<S>& a) {
    Arr<S> v = a->value.max(S(0)).min(S(1));
    return make_op<S>(a->shape, std::move(v), {a}, [a](Node<S>& n) {
        if (!a->requires_grad) return;
        a->grad += n.grad * ((a->value > S(0)) && (a->value < S(1)))
                                .select(Arr<S>::Constant(a->numel(), S(1)),
                                        Arr<S>::Constant(a->numel(), S(0)));
    });
}

/// Concatenates two {C,H,W} tensors along the channel axis.
template <class S>
NodePtr<S> concat_channels(const NodePtr<S>& a, const NodePtr<S>& b) {
    if (a->shape.size() != 3 || b->shape.size() != 3 || a->shape[1] != b->shape[1] ||
        a->shape[2] != b->shape[2])
        throw ShapeError("concat_channels: incompatible shapes");
    std::vector<int> shape{a->shape[0] + b->shape[0], a->shape[1], a->shape[2]};
    Arr<S> v(a->numel() + b->numel());
    v.head(a->numel()) = a->value;
    v.tail(b->numel()) = b->value;
    return make_op<S>(std::move(shape), std::move(v), {a, b}, [a, b](Node<S>& n) {
        if (a->requires_grad) a->grad += n.grad.head(a->numel());
        if (b->requires_grad) b->grad += n.grad.tail(b->numel());
    });
}

/// Nearest-neighbor 2x upsample of a {C,H,W} tensor.
template <class S>
NodePtr<S> nearest_upsample2x(const NodePtr<S>& a) {
    if (a->shape.size() != 3) throw ShapeError("nearest_upsample2x: expected {C,H,W}");
    const int C = a->shape[0], H = a->shape[1], W = a->shape[2];
    std::vector<int> shape{C, 2 * H, 2 * W};
    Arr<S> v(shape_numel<S>(shape));
    for (int c = 0; c < C; ++c)
        for (int i = 0; i < 2 * H; ++i)
            for (int j = 0; j < 2 * W; ++j)
                v[(static_cast<Eigen::Index>(c) * 2 * H + i) * 2 * W + j] =
                    a->value[(static_cast<Eigen::Index>(c) * H + i / 2) * W + j / 2];
    return make_op<S>(std::move(shape), std::move(v), {a}, [a, C, H, W](Node<S>& n) {
        if (!a->requires_grad) return;
        for (int c = 0; c < C; ++c)
            for (int i = 0; i < 2 * H; ++i)
                for (int j = 0; j < 2 * W; ++j)
                    a->grad[(static_cast<Eigen::Index>(c) * H + i / 2) * W + j / 2] +=
                        n.grad[(static_cast<Eigen::Index>(c) * 2 * H + i) * 2 * W + j];
    });
}

namespace detail {

/// im2col: patches of a {C,H,W} array into a (C*k*k) x (OH*OW) matrix.
template <class S>
Mat<S> im2col(const Arr<S>& input, int C, int H, int W, int k, int stride, int pad, int OH,
              int OW) {
    Mat<S> col = Mat<S>::Zero(static_cast<Eigen::Index>(C) * k * k,
                              static_cast<Eigen::Index>(OH) * OW);
    for (int c = 0; c < C; ++c) {
        for (int ki = 0; ki < k; ++ki) {
            for (int kj = 0; kj < k; ++kj) {
                const Eigen::Index row = (static_cast<Eigen::Index>(c) * k + ki) * k + kj;
                for (int oi = 0; oi < OH; ++oi) {
                    const int ii = oi * stride + ki - pad;
                    if (ii < 0 || ii >= H) continue;
                    for (int oj = 0; oj < OW; ++oj) {
                        const int jj = oj * stride + kj - pad;
                        if (jj < 0 || jj >= W) continue;
                        col(row, static_cast<Eigen::Index>(oi) * OW + oj) =
                            input[(static_cast<Eigen::Index>(c) * H + ii) * W + jj];
                    }
                }
            }
        }
    }
    return col;
}

/// Transpose of im2col: scatter-adds column gradients back onto the input.
template <class S>
void col2im_add(const Mat<S>& col, Arr<S>& grad, int C, int H, int W, int k, int stride,
                int pad, int OH, int OW) {
    for (int c = 0; c < C; ++c) {
        for (int ki = 0; ki < k; ++ki) {
            for (int kj = 0; kj < k; ++kj) {
                const Eigen::Index row = (static_cast<Eigen::Index>(c) * k + ki) * k + kj;
                for (int oi = 0; oi < OH; ++oi) {
                    const int ii = oi * stride + ki - pad;
                    if (ii < 0 || ii >= H) continue;
                    for (int oj = 0; oj < OW; ++oj) {
                        const int jj = oj * stride + kj - pad;
                        if (jj < 0 || jj >= W) continue;
                        grad[(static_cast<Eigen::Index>(c) * H + ii) * W + jj] +=
                            col(row, static_cast<Eigen::Index>(oi) * OW + oj);
                    }
                }
            }
        }
    }
}

}  // namespace detail

/// 2-D convolution. input {C,H,W}, weight {O,C,k,k}, bias {O}; output
/// {O,OH,OW} with OH = (H + 2*pad - k)/stride + 1. GEMM-backed via im2col.
template <class S>
NodePtr<S> conv2d(const NodePtr<S>& input, const NodePtr<S>& weight, const NodePtr<S>& bias,
                  int stride, int pad) {
    if (input->shape.size() != 3 || weight->shape.size() != 4 || bias->shape.size() != 1)
        throw ShapeError("conv2d: expected input {C,H,W}, weight {O,C,k,k}, bias {O}");
    const int C = input->shape[0], H = input->shape[1], W = input->shape[2];
    const int O = weight->shape[0], k = weight->shape[2];
    if (weight->shape[1] != C || weight->shape[3] != k || bias->shape[0] != O)
        throw ShapeError("conv2d: weight/bias shapes inconsistent with input");
    const int OH = (H + 2 * pad - k) / stride + 1;
    const int OW = (W + 2 * pad - k) / stride + 1;
    if (OH <= 0 || OW <= 0) throw ShapeError("conv2d: empty output");

    Mat<S> col = detail::im2col(input->value, C, H, W, k, stride, pad, OH, OW);
    using RowMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Eigen::Map<const RowMat> wmat(weight->value.data(), O,
                                  static_cast<Eigen::Index>(C) * k * k);
    Mat<S> out = wmat * col;
    out.colwise() += bias->value.matrix();

    std::vector<int> shape{O, OH, OW};
    Arr<S> v(shape_numel<S>(shape));
    Eigen::Map<RowMat>(v.data(), O, static_cast<Eigen::Index>(OH) * OW) = out;

    auto colp = std::make_shared<Mat<S>>(std::move(col));
    return make_op<S>(
        std::move(shape), std::move(v), {input, weight, bias},
        [input, weight, bias, colp, C, H, W, O, k, stride, pad, OH, OW](Node<S>& n) {
            Eigen::Map<const RowMat> dout(n.grad.data(), O,
                                          static_cast<Eigen::Index>(OH) * OW);
            if (weight->requires_grad) {
                Eigen::Map<RowMat> dw(weight->grad.data(), O,
                                      static_cast<Eigen::Index>(C) * k * k);
                dw += dout * colp->transpose();
            }
            if (bias->requires_grad) bias->grad += dout.rowwise().sum().array();
            if (input->requires_grad) {
                Eigen::Map<const RowMat> wmat(weight->value.data(), O,
                                              static_cast<Eigen::Index>(C) * k * k);
                Mat<S> dcol = wmat.transpose() * dout;
                detail::col2im_add(dcol, input->grad, C, H, W, k, stride, pad, OH, OW);
            }
        });
}

/// Mean squared error over all elements; returns a scalar node.
template <class S>
NodePtr<S> mse(const NodePtr<S>& a, const NodePtr<S>& b) {
    detail::check_same_shape(a, b, "mse");
    const S inv_n = S(1) / static_cast<S>(a->numel());
    Arr<S> d = a->value - b->value;
    Arr<S> v(1);
    v[0] = d.square().sum() * inv_n;
    return make_op<S>({1}, std::move(v), {a, b}, [a, b, inv_n](Node<S>& n) {
        const Arr<S> g = S(2) * inv_n * (a->value - b->value) * n.grad[0];
        if (a->requires_grad) a->grad += g;
        if (b->requires_grad) b->grad -= g;
    });
}

/// MSE restricted to mask pixels: sum over channels and masked pixels of the
/// squared difference, divided by channels * |mask|. mask is a flat {H*W}
/// 0/1 array broadcast over channels.
template <class S>
NodePtr<S> masked_mse(const NodePtr<S>& a, const NodePtr<S>& b, const Arr<S>& mask) {
    detail::check_same_shape(a, b, "masked_mse");
    if (a->shape.size() != 3 ||
        mask.size() != static_cast<Eigen::Index>(a->shape[1]) * a->shape[2])
        throw ShapeError("masked_mse: mask size must match spatial dims");
    const S msum = mask.sum();
    if (msum <= S(0)) throw ParamError("masked_mse: empty mask");
    const int C = a->shape[0];
    const Eigen::Index plane = mask.size();
    const S inv_n = S(1) / (static_cast<S>(C) * msum);
    Arr<S> v(1);
    S acc = S(0);
    for (int c = 0; c < C; ++c) {
        acc += (mask * (a->value.segment(c * plane, plane) -
                        b->value.segment(c * plane, plane)).square()).sum();
    }
    v[0] = acc * inv_n;
    auto maskp = std::make_shared<Arr<S>>(mask);
    return make_op<S>({1}, std::move(v), {a, b}, [a, b, maskp, inv_n, C, plane](Node<S>& n) {
        for (int c = 0; c < C; ++c) {
            const Arr<S> g = S(2) * inv_n * (*maskp) *
                             (a->value.segment(c * plane, plane) -
                              b->value.segment(c * plane, plane)) * n.grad[0];
            if (a->requires_grad) a->grad.segment(c * plane, plane) += g;
            if (b->requires_grad) b->grad.segment(c * plane, plane) -= g;
        }
    });
}

}  // namespace mg::ad
