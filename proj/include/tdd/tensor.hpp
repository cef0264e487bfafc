#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <string>
#include <unordered_set>
#include <vector>

#include "tdd/errors.hpp"

namespace tdd {

// N-dimensional tensor with reverse-mode autodiff. The operator set is the
// closed inventory the detection network needs; kernels are scalar loops so
// single-threaded runs are bit-reproducible. Scalar type S is float for
// training/inference and double for gradient-check test mode.

inline std::string shape_str(const std::vector<int>& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

inline int numel_of(const std::vector<int>& shape) {
    int n = 1;
    for (const int d : shape) {
        if (d < 1) throw ArgumentError("argument error: non-positive dimension in shape " + shape_str(shape));
        n *= d;
    }
    return n;
}

template <class S>
struct TensorNode {
    std::vector<int> shape;
    std::vector<S> val;
    std::vector<S> grad; // allocated lazily during backward
    bool requires_grad = false;
    bool is_param = false;
    std::vector<std::shared_ptr<TensorNode<S>>> inputs;
    std::function<void(TensorNode<S>&)> backfn;

    void ensure_grad() {
        if (grad.size() != val.size()) grad.assign(val.size(), S(0));
    }
};

// Debug switch: when on, every op validates that its output is finite.
inline bool& debug_check_finite() {
    static bool on = false;
    return on;
}

template <class S>
class Tensor {
public:
    using Node = TensorNode<S>;

    Tensor() = default;

    static Tensor zeros(std::vector<int> shape, bool requires_grad = false) {
        return filled(std::move(shape), S(0), requires_grad);
    }

    static Tensor filled(std::vector<int> shape, S value, bool requires_grad = false) {
        auto n = std::make_shared<Node>();
        const int count = numel_of(shape);
        n->shape = std::move(shape);
        n->val.assign(static_cast<std::size_t>(count), value);
        n->requires_grad = requires_grad;
        n->is_param = requires_grad;
        return Tensor(std::move(n));
    }

    static Tensor from(std::vector<int> shape, std::vector<S> values, bool requires_grad = false) {
        if (static_cast<std::size_t>(numel_of(shape)) != values.size())
            throw ArgumentError("argument error: " + std::to_string(values.size()) +
                                " values for shape " + shape_str(shape));
        auto n = std::make_shared<Node>();
        n->shape = std::move(shape);
        n->val = std::move(values);
        n->requires_grad = requires_grad;
        n->is_param = requires_grad;
        return Tensor(std::move(n));
    }

    explicit Tensor(std::shared_ptr<Node> n) : n_(std::move(n)) {}

    bool valid() const { return static_cast<bool>(n_); }
    const std::vector<int>& shape() const { return n_->shape; }
    int dim(int i) const { return n_->shape[static_cast<std::size_t>(i)]; }
    int ndim() const { return static_cast<int>(n_->shape.size()); }
    int numel() const { return static_cast<int>(n_->val.size()); }
    bool requires_grad() const { return n_->requires_grad; }

    std::vector<S>& values() { return n_->val; }
    const std::vector<S>& values() const { return n_->val; }
    const std::vector<S>& grad() const { return n_->grad; }
    void zero_grad() { n_->grad.assign(n_->val.size(), S(0)); }

    std::shared_ptr<Node>& node() { return n_; }
    const std::shared_ptr<Node>& node() const { return n_; }

private:
    std::shared_ptr<Node> n_;
};

namespace detail {

template <class S>
std::shared_ptr<TensorNode<S>> make_node(std::vector<int> shape, std::vector<std::shared_ptr<TensorNode<S>>> inputs,
                                         const char* op_name) {
    auto n = std::make_shared<TensorNode<S>>();
    n->shape = std::move(shape);
    n->val.assign(static_cast<std::size_t>(numel_of(n->shape)), S(0));
    n->inputs = std::move(inputs);
    for (const auto& in : n->inputs)
        if (in->requires_grad) n->requires_grad = true;
    (void)op_name;
    return n;
}

template <class S>
void finalize(const std::shared_ptr<TensorNode<S>>& n, const char* op_name) {
    if (debug_check_finite()) {
        for (const S v : n->val)
            if (!std::isfinite(static_cast<double>(v)))
                throw NumericError(std::string("numeric error: non-finite output of ") + op_name);
    }
}

inline void check_axis(int axis, int ndim) {
    if (axis < 0 || axis >= ndim)
        throw ArgumentError("argument error: axis " + std::to_string(axis) + " out of range for rank " +
                            std::to_string(ndim));
}

} // namespace detail

// ---------------------------------------------------------------------------
// elementwise ops

template <class S>
Tensor<S> relu(const Tensor<S>& x) {
    auto n = detail::make_node<S>(x.shape(), {x.node()}, "relu");
    const auto& xv = x.node()->val;
    for (std::size_t i = 0; i < xv.size(); ++i) n->val[i] = xv[i] > S(0) ? xv[i] : S(0);
    if (n->requires_grad) {
        auto xn = x.node().get();
        n->backfn = [xn](TensorNode<S>& self) {
            if (!xn->requires_grad) return;
            xn->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                if (xn->val[i] > S(0)) xn->grad[i] += self.grad[i]; // relu'(x<=0) = 0
        };
    }
    detail::finalize(n, "relu");
    return Tensor<S>(std::move(n));
}

template <class S>
Tensor<S> sigmoid(const Tensor<S>& x) {
    auto n = detail::make_node<S>(x.shape(), {x.node()}, "sigmoid");
    const auto& xv = x.node()->val;
    for (std::size_t i = 0; i < xv.size(); ++i) n->val[i] = S(1) / (S(1) + std::exp(-xv[i]));
    if (n->requires_grad) {
        auto xn = x.node().get();
        auto yn = n.get();
        n->backfn = [xn, yn](TensorNode<S>& self) {
            if (!xn->requires_grad) return;
            xn->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                const S y = yn->val[i];
                xn->grad[i] += self.grad[i] * y * (S(1) - y);
            }
        };
    }
    detail::finalize(n, "sigmoid");
    return Tensor<S>(std::move(n));
}

template <class S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
    if (a.shape() != b.shape())
        throw ArgumentError("argument error: add shape mismatch " + shape_str(a.shape()) + " vs " +
                            shape_str(b.shape()));
    auto n = detail::make_node<S>(a.shape(), {a.node(), b.node()}, "add");
    const auto& av = a.node()->val;
    const auto& bv = b.node()->val;
    for (std::size_t i = 0; i < av.size(); ++i) n->val[i] = av[i] + bv[i];
    if (n->requires_grad) {
        auto an = a.node().get();
        auto bn = b.node().get();
        n->backfn = [an, bn](TensorNode<S>& self) {
            for (auto* p : {an, bn}) {
                if (!p->requires_grad) continue;
                p->ensure_grad();
                for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i];
            }
        };
    }
    detail::finalize(n, "add");
    return Tensor<S>(std::move(n));
}

template <class S>
Tensor<S> scale(const Tensor<S>& x, S c) {
    auto n = detail::make_node<S>(x.shape(), {x.node()}, "scale");
    const auto& xv = x.node()->val;
    for (std::size_t i = 0; i < xv.size(); ++i) n->val[i] = xv[i] * c;
    if (n->requires_grad) {
        auto xn = x.node().get();
        n->backfn = [xn, c](TensorNode<S>& self) {
            if (!xn->requires_grad) return;
            xn->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) xn->grad[i] += self.grad[i] * c;
        };
    }
    detail::finalize(n, "scale");
    return Tensor<S>(std::move(n));
}

// ---------------------------------------------------------------------------
// structural ops

template <class S>
Tensor<S> reshape(const Tensor<S>& x, std::vector<int> new_shape) {
    if (numel_of(new_shape) != x.numel())
        throw ArgumentError("argument error: reshape " + shape_str(x.shape()) + " to " +
                            shape_str(new_shape) + " changes element count");
    auto n = detail::make_node<S>(new_shape, {x.node()}, "reshape");
    n->val = x.node()->val;
    if (n->requires_grad) {
        auto xn = x.node().get();
        n->backfn = [xn](TensorNode<S>& self) {
            if (!xn->requires_grad) return;
            xn->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) xn->grad[i] += self.grad[i];
        };
    }
    return Tensor<S>(std::move(n));
}

template <class S>
Tensor<S> transpose(const Tensor<S>& x) {
    if (x.ndim() != 2) throw ArgumentError("argument error: transpose needs rank 2, got " + shape_str(x.shape()));
    const int m = x.dim(0), k = x.dim(1);
    auto n = detail::make_node<S>({k, m}, {x.node()}, "transpose");
    const auto& xv = x.node()->val;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < k; ++j) n->val[static_cast<std::size_t>(j) * m + i] = xv[static_cast<std::size_t>(i) * k + j];
    if (n->requires_grad) {
        auto xn = x.node().get();
        n->backfn = [xn, m, k](TensorNode<S>& self) {
            if (!xn->requires_grad) return;
            xn->ensure_grad();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < k; ++j)
                    xn->grad[static_cast<std::size_t>(i) * k + j] += self.grad[static_cast<std::size_t>(j) * m + i];
        };
    }
    return Tensor<S>(std::move(n));
}

template <class S>
Tensor<S> concat(const std::vector<Tensor<S>>& xs, int axis) {
    if (xs.empty()) throw ArgumentError("argument error: concat of zero tensors");
    detail::check_axis(axis, xs[0].ndim());
    std::vector<int> out_shape = xs[0].shape();
    int axis_total = 0;
    for (const auto& x : xs) {
        if (x.ndim() != xs[0].ndim())
            throw ArgumentError("argument error: concat rank mismatch " + shape_str(x.shape()) + " vs " +
                                shape_str(xs[0].shape()));
        for (int d = 0; d < x.ndim(); ++d)
            if (d != axis && x.dim(d) != xs[0].dim(d))
                throw ArgumentError("argument error: concat shape mismatch " + shape_str(x.shape()) + " vs " +
                                    shape_str(xs[0].shape()));
        axis_total += x.dim(axis);
    }
    out_shape[static_cast<std::size_t>(axis)] = axis_total;

    int outer = 1, inner = 1;
    for (int d = 0; d < axis; ++d) outer *= out_shape[static_cast<std::size_t>(d)];
    for (int d = axis + 1; d < static_cast<int>(out_shape.size()); ++d) inner *= out_shape[static_cast<std::size_t>(d)];

    std::vector<std::shared_ptr<TensorNode<S>>> in_nodes;
    for (const auto& x : xs) in_nodes.push_back(x.node());
    auto n = detail::make_node<S>(out_shape, in_nodes, "concat");

    std::vector<int> axis_dims;
    for (const auto& x : xs) axis_dims.push_back(x.dim(axis));
    for (int o = 0; o < outer; ++o) {
        int off = 0;
        for (std::size_t t = 0; t < xs.size(); ++t) {
            const auto& xv = xs[t].node()->val;
            const int ad = axis_dims[t];
            for (int a = 0; a < ad; ++a)
                for (int i = 0; i < inner; ++i)
                    n->val[(static_cast<std::size_t>(o) * axis_total + off + a) * inner + i] =
                        xv[(static_cast<std::size_t>(o) * ad + a) * inner + i];
            off += ad;
        }
    }
    if (n->requires_grad) {
        std::vector<TensorNode<S>*> raw;
        for (const auto& x : xs) raw.push_back(x.node().get());
        n->backfn = [raw, axis_dims, outer, inner, axis_total](TensorNode<S>& self) {
            for (int o = 0; o < outer; ++o) {
                int off = 0;
                for (std::size_t t = 0; t < raw.size(); ++t) {
                    const int ad = axis_dims[t];
                    if (raw[t]->requires_grad) {
                        raw[t]->ensure_grad();
                        for (int a = 0; a < ad; ++a)
                            for (int i = 0; i < inner; ++i)
                                raw[t]->grad[(static_cast<std::size_t>(o) * ad + a) * inner + i] +=
                                    self.grad[(static_cast<std::size_t>(o) * axis_total + off + a) * inner + i];
                    }
                    off += ad;
                }
            }
        };
    }
    detail::finalize(n, "concat");
    return Tensor<S>(std::move(n));
}

template <class S>
Tensor<S> slice(const Tensor<S>& x, int axis, int start, int len) {
    detail::check_axis(axis, x.ndim());
    const int ad = x.dim(axis);
    if (start < 0 || len < 1 || start + len > ad)
        throw ArgumentError("argument error: slice [" + std::to_string(start) + "," +
                            std::to_string(start + len) + ") out of range for axis extent " + std::to_string(ad));
    std::vector<int> out_shape = x.shape();
    out_shape[static_cast<std::size_t>(axis)] = len;
    int outer = 1, inner = 1;
    for (int d = 0; d < axis; ++d) outer *= x.dim(d);
    for (int d = axis + 1; d < x.ndim(); ++d) inner *= x.dim(d);

    auto n = detail::make_node<S>(out_shape, {x.node()}, "slice");
    const auto& xv = x.node()->val;
    for (int o = 0; o < outer; ++o)
        for (int a = 0; a < len; ++a)
            for (int i = 0; i < inner; ++i)
                n->val[(static_cast<std::size_t>(o) * len + a) * inner + i] =
                    xv[(static_cast<std::size_t>(o) * ad + start + a) * inner + i];
    if (n->requires_grad) {
        auto xn = x.node().get();
        n->backfn = [xn, outer, inner, ad, start, len](TensorNode<S>& self) {
            if (!xn->requires_grad) return;
            xn->ensure_grad();
            for (int o = 0; o < outer; ++o)
                for (int a = 0; a < len; ++a)
                    for (int i = 0; i < inner; ++i)
                        xn->grad[(static_cast<std::size_t>(o) * ad + start + a) * inner + i] +=
                            self.grad[(static_cast<std::size_t>(o) * len + a) * inner + i];
        };
    }
    return Tensor<S>(std::move(n));
}

// ---------------------------------------------------------------------------
// linear algebra

template <class S>
Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b) {
    if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0))
        throw ArgumentError("argument error: matmul shape mismatch " + shape_str(a.shape()) + " vs " +
                            shape_str(b.shape()));
    const int m = a.dim(0), k = a.dim(1), p = b.dim(1);
    auto n = detail::make_node<S>({m, p}, {a.node(), b.node()}, "matmul");
    const auto& av = a.node()->val;
    const auto& bv = b.node()->val;
    for (int i = 0; i < m; ++i)
        for (int kk = 0; kk < k; ++kk) {
            const S aik = av[static_cast<std::size_t>(i) * k + kk];
            for (int j = 0; j < p; ++j)
                n->val[static_cast<std::size_t>(i) * p + j] += aik * bv[static_cast<std::size_t>(kk) * p + j];
        }
    if (n->requires_grad) {
        auto an = a.node().get();
        auto bn = b.node().get();
        n->backfn = [an, bn, m, k, p](TensorNode<S>& self) {
            if (an->requires_grad) {
                an->ensure_grad();
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < p; ++j) {
                        const S g = self.grad[static_cast<std::size_t>(i) * p + j];
                        for (int kk = 0; kk < k; ++kk)
                            an->grad[static_cast<std::size_t>(i) * k + kk] +=
                                g * bn->val[static_cast<std::size_t>(kk) * p + j];
                    }
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (int i = 0; i < m; ++i)
                    for (int kk = 0; kk < k; ++kk) {
                        const S av_ = an->val[static_cast<std::size_t>(i) * k + kk];
                        for (int j = 0; j < p; ++j)
                            bn->grad[static_cast<std::size_t>(kk) * p + j] +=
                                av_ * self.grad[static_cast<std::size_t>(i) * p + j];
                    }
            }
        };
    }
    detail::finalize(n, "matmul");
    return Tensor<S>(std::move(n));
}

template <class S>
Tensor<S> softmax(const Tensor<S>& x, int axis) {
    detail::check_axis(axis, x.ndim());
    const int ad = x.dim(axis);
    int outer = 1, inner = 1;
    for (int d = 0; d < axis; ++d) outer *= x.dim(d);
    for (int d = axis + 1; d < x.ndim(); ++d) inner *= x.dim(d);

    auto n = detail::make_node<S>(x.shape(), {x.node()}, "softmax");
    const auto& xv = x.node()->val;
    for (int o = 0; o < outer; ++o)
        for (int i = 0; i < inner; ++i) {
            const auto at = [&](int a) { return (static_cast<std::size_t>(o) * ad + a) * inner + i; };
            S mx = xv[at(0)];
            for (int a = 1; a < ad; ++a) mx = std::max(mx, xv[at(a)]);
            S sum = S(0);
            for (int a = 0; a < ad; ++a) {
                const S e = std::exp(xv[at(a)] - mx);
                n->val[at(a)] = e;
                sum += e;
            }
            for (int a = 0; a < ad; ++a) n->val[at(a)] /= sum;
        }
    if (n->requires_grad) {
        auto xn = x.node().get();
        auto yn = n.get();
        n->backfn = [xn, yn, outer, inner, ad](TensorNode<S>& self) {
            if (!xn->requires_grad) return;
            xn->ensure_grad();
            for (int o = 0; o < outer; ++o)
                for (int i = 0; i < inner; ++i) {
                    const auto at = [&](int a) { return (static_cast<std::size_t>(o) * ad + a) * inner + i; };
                    S dot = S(0);
                    for (int a = 0; a < ad; ++a) dot += self.grad[at(a)] * yn->val[at(a)];
                    for (int a = 0; a < ad; ++a)
                        xn->grad[at(a)] += yn->val[at(a)] * (self.grad[at(a)] - dot);
                }
        };
    }
    detail::finalize(n, "softmax");
    return Tensor<S>(std::move(n));
}

// ---------------------------------------------------------------------------
// spatial ops on [C, H, W] tensors

namespace detail {
inline void check_chw(const std::vector<int>& shape, const char* op) {
    if (shape.size() != 3)
        throw ArgumentError(std::string("argument error: ") + op + " needs [C,H,W], got " + shape_str(shape));
}
} // namespace detail

// 3x3-style convolution with "same" zero padding: output spatial size is
// ceil(in/stride); pad_total = (out-1)*stride + (k-1)*dilation + 1 - in,
// split floor/ceil between the leading/trailing edge.
template <class S>
Tensor<S> conv2d(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>* bias, int stride, int dilation) {
    detail::check_chw(x.shape(), "conv2d");
    if (w.ndim() != 4 || w.dim(1) != x.dim(0))
        throw ArgumentError("argument error: conv2d kernel " + shape_str(w.shape()) + " does not match input " +
                            shape_str(x.shape()));
    if (stride < 1 || dilation < 1) throw ArgumentError("argument error: conv2d stride/dilation must be >= 1");
    const int ci = x.dim(0), ih = x.dim(1), iw = x.dim(2);
    const int co = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    if (bias && (bias->ndim() != 1 || bias->dim(0) != co))
        throw ArgumentError("argument error: conv2d bias " + shape_str(bias->shape()) + " does not match " +
                            std::to_string(co) + " output channels");
    const int oh = (ih + stride - 1) / stride;
    const int ow = (iw + stride - 1) / stride;
    const int eff_kh = (kh - 1) * dilation + 1;
    const int eff_kw = (kw - 1) * dilation + 1;
    const int pad_h = std::max((oh - 1) * stride + eff_kh - ih, 0) / 2;
    const int pad_w = std::max((ow - 1) * stride + eff_kw - iw, 0) / 2;

    std::vector<std::shared_ptr<TensorNode<S>>> ins = {x.node(), w.node()};
    if (bias) ins.push_back(bias->node());
    auto n = detail::make_node<S>({co, oh, ow}, ins, "conv2d");

    const auto& xv = x.node()->val;
    const auto& wv = w.node()->val;
    for (int c = 0; c < co; ++c) {
        S* out_plane = n->val.data() + static_cast<std::size_t>(c) * oh * ow;
        if (bias) {
            const S b = bias->node()->val[static_cast<std::size_t>(c)];
            for (int i = 0; i < oh * ow; ++i) out_plane[i] = b;
        }
        for (int cc = 0; cc < ci; ++cc) {
            const S* in_plane = xv.data() + static_cast<std::size_t>(cc) * ih * iw;
            for (int ky = 0; ky < kh; ++ky)
                for (int kx = 0; kx < kw; ++kx) {
                    const S wval = wv[((static_cast<std::size_t>(c) * ci + cc) * kh + ky) * kw + kx];
                    for (int oy = 0; oy < oh; ++oy) {
                        const int iy = oy * stride - pad_h + ky * dilation;
                        if (iy < 0 || iy >= ih) continue;
                        for (int ox = 0; ox < ow; ++ox) {
                            const int ix = ox * stride - pad_w + kx * dilation;
                            if (ix < 0 || ix >= iw) continue;
                            out_plane[oy * ow + ox] += wval * in_plane[iy * iw + ix];
                        }
                    }
                }
        }
    }

    if (n->requires_grad) {
        auto xn = x.node().get();
        auto wn = w.node().get();
        auto bn = bias ? bias->node().get() : nullptr;
        n->backfn = [=](TensorNode<S>& self) {
            if (bn && bn->requires_grad) {
                bn->ensure_grad();
                for (int c = 0; c < co; ++c) {
                    S acc = S(0);
                    const S* g = self.grad.data() + static_cast<std::size_t>(c) * oh * ow;
                    for (int i = 0; i < oh * ow; ++i) acc += g[i];
                    bn->grad[static_cast<std::size_t>(c)] += acc;
                }
            }
            const bool need_dx = xn->requires_grad;
            const bool need_dw = wn->requires_grad;
            if (!need_dx && !need_dw) return;
            if (need_dx) xn->ensure_grad();
            if (need_dw) wn->ensure_grad();
            for (int c = 0; c < co; ++c) {
                const S* g = self.grad.data() + static_cast<std::size_t>(c) * oh * ow;
                for (int cc = 0; cc < ci; ++cc) {
                    const S* in_plane = xn->val.data() + static_cast<std::size_t>(cc) * ih * iw;
                    S* dx_plane = need_dx ? xn->grad.data() + static_cast<std::size_t>(cc) * ih * iw : nullptr;
                    for (int ky = 0; ky < kh; ++ky)
                        for (int kx = 0; kx < kw; ++kx) {
                            const std::size_t widx = ((static_cast<std::size_t>(c) * ci + cc) * kh + ky) * kw + kx;
                            const S wval = wn->val[widx];
                            S dw_acc = S(0);
                            for (int oy = 0; oy < oh; ++oy) {
                                const int iy = oy * stride - pad_h + ky * dilation;
                                if (iy < 0 || iy >= ih) continue;
                                for (int ox = 0; ox < ow; ++ox) {
                                    const int ix = ox * stride - pad_w + kx * dilation;
                                    if (ix < 0 || ix >= iw) continue;
                                    const S gv = g[oy * ow + ox];
                                    if (need_dw) dw_acc += gv * in_plane[iy * iw + ix];
                                    if (need_dx) dx_plane[iy * iw + ix] += gv * wval;
                                }
                            }
                            if (need_dw) wn->grad[widx] += dw_acc;
                        }
                }
            }
        };
    }
    detail::finalize(n, "conv2d");
    return Tensor<S>(std::move(n));
}

template <class S>
Tensor<S> conv2d(const Tensor<S>& x, const Tensor<S>& w, int stride = 1, int dilation = 1) {
    return conv2d(x, w, static_cast<const Tensor<S>*>(nullptr), stride, dilation);
}

template <class S>
Tensor<S> conv2d(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& bias, int stride = 1,
                 int dilation = 1) {
    return conv2d(x, w, &bias, stride, dilation);
}

// Max pooling with ceil-mode output ceil(in/stride); windows are clipped at
// the borders (max over valid pixels only). Ties resolve to the first pixel
// in scan order.
template <class S>
Tensor<S> maxpool2d(const Tensor<S>& x, int k, int stride) {
    detail::check_chw(x.shape(), "maxpool2d");
    if (k < 1 || stride < 1) throw ArgumentError("argument error: maxpool2d k/stride must be >= 1");
    const int c = x.dim(0), ih = x.dim(1), iw = x.dim(2);
    const int oh = (ih + stride - 1) / stride;
    const int ow = (iw + stride - 1) / stride;
    auto n = detail::make_node<S>({c, oh, ow}, {x.node()}, "maxpool2d");

    std::vector<int> argmax(static_cast<std::size_t>(c) * oh * ow);
    const auto& xv = x.node()->val;
    for (int cc = 0; cc < c; ++cc) {
        const S* in_plane = xv.data() + static_cast<std::size_t>(cc) * ih * iw;
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox) {
                const int y0 = oy * stride, x0 = ox * stride;
                const int y1 = std::min(y0 + k, ih), x1 = std::min(x0 + k, iw);
                S best = in_plane[y0 * iw + x0];
                int besti = y0 * iw + x0;
                for (int yy = y0; yy < y1; ++yy)
                    for (int xx = x0; xx < x1; ++xx) {
                        const int idx = yy * iw + xx;
                        if (in_plane[idx] > best) {
                            best = in_plane[idx];
                            besti = idx;
                        }
                    }
                const std::size_t oidx = (static_cast<std::size_t>(cc) * oh + oy) * ow + ox;
                n->val[oidx] = best;
                argmax[oidx] = besti;
            }
    }
    if (n->requires_grad) {
        auto xn = x.node().get();
        n->backfn = [xn, argmax = std::move(argmax), c, oh, ow, ih, iw](TensorNode<S>& self) {
            if (!xn->requires_grad) return;
            xn->ensure_grad();
            for (int cc = 0; cc < c; ++cc)
                for (int i = 0; i < oh * ow; ++i) {
                    const std::size_t oidx = static_cast<std::size_t>(cc) * oh * ow + i;
                    xn->grad[static_cast<std::size_t>(cc) * ih * iw + argmax[oidx]] += self.grad[oidx];
                }
        };
    }
    detail::finalize(n, "maxpool2d");
    return Tensor<S>(std::move(n));
}

// Bilinear resize with the half-pixel-center (align-corners-false) convention.
template <class S>
Tensor<S> bilinear_resize(const Tensor<S>& x, int out_h, int out_w) {
    detail::check_chw(x.shape(), "bilinear_resize");
    if (out_h < 1 || out_w < 1) throw ArgumentError("argument error: bilinear_resize target must be positive");
    const int c = x.dim(0), ih = x.dim(1), iw = x.dim(2);
    auto n = detail::make_node<S>({c, out_h, out_w}, {x.node()}, "bilinear_resize");

    struct Lerp {
        int i0, i1;
        S w1; // weight of i1; weight of i0 is 1-w1
    };
    const auto make_axis = [](int in, int out) {
        std::vector<Lerp> v(static_cast<std::size_t>(out));
        for (int o = 0; o < out; ++o) {
            double s = (o + 0.5) * static_cast<double>(in) / out - 0.5;
            s = std::clamp(s, 0.0, static_cast<double>(in - 1));
            const int i0 = static_cast<int>(std::floor(s));
            const int i1 = std::min(i0 + 1, in - 1);
            v[static_cast<std::size_t>(o)] = {i0, i1, static_cast<S>(s - i0)};
        }
        return v;
    };
    const auto ys = make_axis(ih, out_h);
    const auto xs = make_axis(iw, out_w);

    const auto& xv = x.node()->val;
    for (int cc = 0; cc < c; ++cc) {
        const S* in_plane = xv.data() + static_cast<std::size_t>(cc) * ih * iw;
        S* out_plane = n->val.data() + static_cast<std::size_t>(cc) * out_h * out_w;
        for (int oy = 0; oy < out_h; ++oy)
            for (int ox = 0; ox < out_w; ++ox) {
                const auto& ly = ys[static_cast<std::size_t>(oy)];
                const auto& lx = xs[static_cast<std::size_t>(ox)];
                const S v00 = in_plane[ly.i0 * iw + lx.i0], v01 = in_plane[ly.i0 * iw + lx.i1];
                const S v10 = in_plane[ly.i1 * iw + lx.i0], v11 = in_plane[ly.i1 * iw + lx.i1];
                const S top = v00 + lx.w1 * (v01 - v00);
                const S bot = v10 + lx.w1 * (v11 - v10);
                out_plane[oy * out_w + ox] = top + ly.w1 * (bot - top);
            }
    }
    if (n->requires_grad) {
        auto xn = x.node().get();
        n->backfn = [xn, ys, xs, c, ih, iw, out_h, out_w](TensorNode<S>& self) {
            if (!xn->requires_grad) return;
            xn->ensure_grad();
            for (int cc = 0; cc < c; ++cc) {
                S* dplane = xn->grad.data() + static_cast<std::size_t>(cc) * ih * iw;
                const S* g = self.grad.data() + static_cast<std::size_t>(cc) * out_h * out_w;
                for (int oy = 0; oy < out_h; ++oy)
                    for (int ox = 0; ox < out_w; ++ox) {
                        const auto& ly = ys[static_cast<std::size_t>(oy)];
                        const auto& lx = xs[static_cast<std::size_t>(ox)];
                        const S gv = g[oy * out_w + ox];
                        dplane[ly.i0 * iw + lx.i0] += gv * (S(1) - ly.w1) * (S(1) - lx.w1);
                        dplane[ly.i0 * iw + lx.i1] += gv * (S(1) - ly.w1) * lx.w1;
                        dplane[ly.i1 * iw + lx.i0] += gv * ly.w1 * (S(1) - lx.w1);
                        dplane[ly.i1 * iw + lx.i1] += gv * ly.w1 * lx.w1;
                    }
            }
        };
    }
    detail::finalize(n, "bilinear_resize");
    return Tensor<S>(std::move(n));
}

// ---------------------------------------------------------------------------
// fused windowed self-attention (the LAM core). For every center position,
// correlation logits are <x_c, F_hw>/sqrt(C) over a zero-padded window, the
// window is softmaxed, and the output is the weighted neighborhood average.
// If `weights_out` is given it receives the H*W*(wh*ww) softmax maps.
template <class S>
Tensor<S> local_attention(const Tensor<S>& x, int wh, int ww, std::vector<S>* weights_out = nullptr) {
    detail::check_chw(x.shape(), "local_attention");
    if (wh < 1 || ww < 1 || wh % 2 == 0 || ww % 2 == 0)
        throw ArgumentError("argument error: local_attention window must be odd, got " + std::to_string(wh) +
                            "x" + std::to_string(ww));
    const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    const int rh = wh / 2, rw = ww / 2, win = wh * ww;
    const S inv_sqrt_c = static_cast<S>(1.0 / std::sqrt(static_cast<double>(c)));

    auto n = detail::make_node<S>(x.shape(), {x.node()}, "local_attention");
    const auto& xv = x.node()->val;
    const auto at = [&](int ch, int row, int col) { return (static_cast<std::size_t>(ch) * h + row) * w + col; };

    std::vector<S> weights(static_cast<std::size_t>(h) * w * win);
    std::vector<S> logits(static_cast<std::size_t>(win));
    for (int cy = 0; cy < h; ++cy)
        for (int cx = 0; cx < w; ++cx) {
            for (int dy = -rh; dy <= rh; ++dy)
                for (int dx = -rw; dx <= rw; ++dx) {
                    const int k = (dy + rh) * ww + (dx + rw);
                    const int ny = cy + dy, nx = cx + dx;
                    if (ny < 0 || ny >= h || nx < 0 || nx >= w) {
                        logits[static_cast<std::size_t>(k)] = S(0); // dot with zero padding
                        continue;
                    }
                    S dot = S(0);
                    for (int ch = 0; ch < c; ++ch) dot += xv[at(ch, cy, cx)] * xv[at(ch, ny, nx)];
                    logits[static_cast<std::size_t>(k)] = dot * inv_sqrt_c;
                }
            S mx = logits[0];
            for (int k = 1; k < win; ++k) mx = std::max(mx, logits[static_cast<std::size_t>(k)]);
            S sum = S(0);
            S* m = weights.data() + (static_cast<std::size_t>(cy) * w + cx) * win;
            for (int k = 0; k < win; ++k) {
                m[k] = std::exp(logits[static_cast<std::size_t>(k)] - mx);
                sum += m[k];
            }
            for (int k = 0; k < win; ++k) m[k] /= sum;
            for (int dy = -rh; dy <= rh; ++dy)
                for (int dx = -rw; dx <= rw; ++dx) {
                    const int k = (dy + rh) * ww + (dx + rw);
                    const int ny = cy + dy, nx = cx + dx;
                    if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue; // zero vector contributes nothing
                    const S mk = m[k];
                    for (int ch = 0; ch < c; ++ch) n->val[at(ch, cy, cx)] += mk * xv[at(ch, ny, nx)];
                }
        }
    if (weights_out) *weights_out = weights;

    if (n->requires_grad) {
        auto xn = x.node().get();
        n->backfn = [xn, weights = std::move(weights), c, h, w, rh, rw, ww, win,
                     inv_sqrt_c](TensorNode<S>& self) {
            if (!xn->requires_grad) return;
            xn->ensure_grad();
            const auto at = [&](int ch, int row, int col) {
                return (static_cast<std::size_t>(ch) * h + row) * w + col;
            };
            std::vector<S> dm(static_cast<std::size_t>(win));
            std::vector<S> dl(static_cast<std::size_t>(win));
            for (int cy = 0; cy < h; ++cy)
                for (int cx = 0; cx < w; ++cx) {
                    const S* m = weights.data() + (static_cast<std::size_t>(cy) * w + cx) * win;
                    // dm_k = <dL/dout_c, F_k>;  dl = softmax backward;  then
                    // out = sum m_k F_k and l_k = <x_c, F_k>/sqrt(C) give
                    // dF_k += m_k*g + dl_k*x_c/sqrt(C), dx_c += sum dl_k*F_k/sqrt(C).
                    S mdot = S(0);
                    for (int dy = -rh, k = 0; dy <= rh; ++dy)
                        for (int dx = -rw; dx <= rw; ++dx, ++k) {
                            const int ny = cy + dy, nx = cx + dx;
                            if (ny < 0 || ny >= h || nx < 0 || nx >= w) {
                                dm[static_cast<std::size_t>(k)] = S(0);
                            } else {
                                S dot = S(0);
                                for (int ch = 0; ch < c; ++ch)
                                    dot += self.grad[at(ch, cy, cx)] * xn->val[at(ch, ny, nx)];
                                dm[static_cast<std::size_t>(k)] = dot;
                            }
                            mdot += m[k] * dm[static_cast<std::size_t>(k)];
                        }
                    for (int k = 0; k < win; ++k)
                        dl[static_cast<std::size_t>(k)] = m[k] * (dm[static_cast<std::size_t>(k)] - mdot);
                    for (int dy = -rh, k = 0; dy <= rh; ++dy)
                        for (int dx = -rw; dx <= rw; ++dx, ++k) {
                            const int ny = cy + dy, nx = cx + dx;
                            if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
                            const S dlk = dl[static_cast<std::size_t>(k)] * inv_sqrt_c;
                            for (int ch = 0; ch < c; ++ch) {
                                xn->grad[at(ch, ny, nx)] +=
                                    m[k] * self.grad[at(ch, cy, cx)] + dlk * xn->val[at(ch, cy, cx)];
                                xn->grad[at(ch, cy, cx)] += dlk * xn->val[at(ch, ny, nx)];
                            }
                        }
                }
        };
    }
    detail::finalize(n, "local_attention");
    return Tensor<S>(std::move(n));
}

// ---------------------------------------------------------------------------
// cross-entropy reduction against a constant target, mean over elements.
// Predictions are clamped to [eps, 1-eps]; gradient is zero where clamped.
template <class S>
Tensor<S> bce_mean(const Tensor<S>& pred, const std::vector<S>& target, S eps = S(1e-7)) {
    if (target.size() != pred.node()->val.size())
        throw ArgumentError("argument error: bce_mean target size " + std::to_string(target.size()) +
                            " vs prediction " + shape_str(pred.shape()));
    auto n = detail::make_node<S>({1}, {pred.node()}, "bce_mean");
    const auto& pv = pred.node()->val;
    const S lo = eps, hi = S(1) - eps;
    double acc = 0.0;
    for (std::size_t i = 0; i < pv.size(); ++i) {
        const S p = std::clamp(pv[i], lo, hi);
        const S t = target[i];
        acc += -(static_cast<double>(t) * std::log(static_cast<double>(p)) +
                 (1.0 - static_cast<double>(t)) * std::log(1.0 - static_cast<double>(p)));
    }
    n->val[0] = static_cast<S>(acc / static_cast<double>(pv.size()));
    if (n->requires_grad) {
        auto pn = pred.node().get();
        n->backfn = [pn, target, lo, hi](TensorNode<S>& self) {
            if (!pn->requires_grad) return;
            pn->ensure_grad();
            const S g = self.grad[0];
            const S inv_n = S(1) / static_cast<S>(pn->val.size());
            for (std::size_t i = 0; i < pn->val.size(); ++i) {
                const S p = pn->val[i];
                if (p <= lo || p >= hi) continue; // clamp region: zero gradient
                pn->grad[i] += g * inv_n * (-target[i] / p + (S(1) - target[i]) / (S(1) - p));
            }
        };
    }
    detail::finalize(n, "bce_mean");
    return Tensor<S>(std::move(n));
}

// ---------------------------------------------------------------------------
// reverse-mode sweep. Topologically orders the recorded graph under `loss`,
// seeds d(loss)/d(loss) = 1, and runs every node's backward in exact reverse
// order. Non-parameter gradients are freed afterwards.
template <class S>
void backward(const Tensor<S>& loss) {
    if (loss.numel() != 1) throw ArgumentError("argument error: backward needs a scalar loss, got " +
                                               shape_str(loss.shape()));
    using Node = TensorNode<S>;
    std::vector<Node*> topo;
    std::unordered_set<Node*> seen;
    // iterative post-order DFS
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(loss.node().get(), 0);
    seen.insert(loss.node().get());
    while (!stack.empty()) {
        Node* node = stack.back().first;
        const std::size_t next = stack.back().second;
        if (next < node->inputs.size()) {
            stack.back().second = next + 1;
            Node* child = node->inputs[next].get();
            if (child->requires_grad && !seen.count(child)) {
                seen.insert(child);
                stack.emplace_back(child, 0);
            }
        } else {
            topo.push_back(node);
            stack.pop_back();
        }
    }

    loss.node()->ensure_grad();
    loss.node()->grad[0] = S(1);
    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
        Node* node = *it;
        if (node->backfn && !node->grad.empty()) node->backfn(*node);
    }
    for (Node* node : topo)
        if (!node->is_param) node->grad.clear();
}

} // namespace tdd
