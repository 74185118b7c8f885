#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "foar/core/random.hpp"

namespace foar::core {

struct DimensionError : std::runtime_error {
    explicit DimensionError(const std::string& msg) : std::runtime_error(msg) {}
};

struct TrainingError : std::runtime_error {
    explicit TrainingError(const std::string& msg) : std::runtime_error(msg) {}
};

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "(";
    for (std::size_t i = 0; i < s.size(); ++i) {
        out += std::to_string(s[i]);
        if (i + 1 < s.size()) out += ",";
    }
    return out + ")";
}

template <class S>
struct TensorNode {
    Shape shape;
    std::vector<S> val;
    std::vector<S> grad;
    bool requires_grad = false;
    int visit_mark = 0;
    std::vector<std::shared_ptr<TensorNode>> parents;
    std::function<void(TensorNode&)> backprop;

    void ensure_grad() {
        if (grad.size() != val.size()) grad.assign(val.size(), S(0));
    }
};

/// Dense tensor handle with reverse-mode autodiff. Value semantics on the
/// handle; the node (data + graph edge) is shared.
template <class S>
class Tensor {
public:
    Tensor() : node_(std::make_shared<TensorNode<S>>()) {}

    explicit Tensor(Shape shape, S fill = S(0))
        : node_(std::make_shared<TensorNode<S>>()) {
        node_->shape = std::move(shape);
        node_->val.assign(shape_numel(node_->shape), fill);
    }

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape), S(0)); }
    static Tensor full(Shape shape, S v) { return Tensor(std::move(shape), v); }

    static Tensor from_vector(Shape shape, std::vector<S> values) {
        if (values.size() != shape_numel(shape))
            throw DimensionError("from_vector: element count does not match shape");
        Tensor t;
        t.node_->shape = std::move(shape);
        t.node_->val = std::move(values);
        return t;
    }

    static Tensor randu(Shape shape, Rng& rng, double lo, double hi) {
        Tensor t(std::move(shape));
        for (auto& v : t.node_->val) v = static_cast<S>(rng.uniform(lo, hi));
        return t;
    }

    static Tensor randn(Shape shape, Rng& rng, double mean = 0.0, double sigma = 1.0) {
        Tensor t(std::move(shape));
        for (auto& v : t.node_->val) v = static_cast<S>(rng.normal(mean, sigma));
        return t;
    }

    const Shape& shape() const { return node_->shape; }
    std::size_t numel() const { return node_->val.size(); }
    std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
    std::size_t rank() const { return node_->shape.size(); }

    const std::vector<S>& value() const { return node_->val; }
    std::vector<S>& value_mut() { return node_->val; }
    const std::vector<S>& grad() const { return node_->grad; }

    S item() const {
        if (numel() != 1) throw DimensionError("item: tensor is not a scalar");
        return node_->val[0];
    }

    S at(std::size_t i) const { return node_->val.at(i); }
    S at(std::size_t r, std::size_t c) const {
        return node_->val.at(r * node_->shape.at(1) + c);
    }

    bool requires_grad() const { return node_->requires_grad; }
    Tensor& set_requires_grad(bool on = true) {
        node_->requires_grad = on;
        if (on) node_->ensure_grad();
        return *this;
    }

    void zero_grad() {
        node_->ensure_grad();
        std::fill(node_->grad.begin(), node_->grad.end(), S(0));
    }

    std::shared_ptr<TensorNode<S>> node() const { return node_; }

    /// Reverse pass from a scalar root. Topological order is fixed by the
    /// construction order of parents, so repeat runs are bit-identical.
    void backward() const {
        if (numel() != 1) throw DimensionError("backward: root must be scalar");
        std::vector<TensorNode<S>*> topo;
        std::vector<std::pair<TensorNode<S>*, std::size_t>> stack;
        stack.emplace_back(node_.get(), 0);
        node_->visit_mark = 1;
        while (!stack.empty()) {
            auto& [n, idx] = stack.back();
            if (idx < n->parents.size()) {
                TensorNode<S>* p = n->parents[idx].get();
                ++idx;
                if (p->visit_mark == 0 && p->requires_grad) {
                    p->visit_mark = 1;
                    stack.emplace_back(p, 0);
                }
            } else {
                topo.push_back(n);
                stack.pop_back();
            }
        }
        for (auto* n : topo) {
            n->ensure_grad();
            n->visit_mark = 0;
        }
        node_->grad[0] = S(1);
        for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
            if ((*it)->backprop) (*it)->backprop(**it);
        }
    }

    bool all_finite() const {
        for (S v : node_->val)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

private:
    std::shared_ptr<TensorNode<S>> node_;
};

namespace detail {

template <class S>
Tensor<S> make_op(Shape shape, std::vector<const Tensor<S>*> inputs,
                  std::function<void(TensorNode<S>&)> backprop) {
    Tensor<S> out(std::move(shape));
    bool needs = false;
    for (const auto* in : inputs) needs = needs || in->requires_grad();
    if (needs) {
        auto node = out.node();
        node->requires_grad = true;
        for (const auto* in : inputs) node->parents.push_back(in->node());
        node->backprop = std::move(backprop);
    }
    return out;
}

// Raw matmul: C (m x n) = op(A) * op(B), optionally accumulating into C.
template <class S>
void gemm(S* c, const S* a, const S* b, std::size_t m, std::size_t n, std::size_t k,
          bool trans_a, bool trans_b, bool accumulate) {
    if (!accumulate) std::fill(c, c + m * n, S(0));
    if (!trans_a && !trans_b) {
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t p = 0; p < k; ++p) {
                S av = a[i * k + p];
                const S* brow = b + p * n;
                S* crow = c + i * n;
                for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
    } else if (!trans_a && trans_b) {
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                const S* arow = a + i * k;
                const S* brow = b + j * k;
                S acc = S(0);
                for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
                c[i * n + j] += acc;
            }
    } else if (trans_a && !trans_b) {
        for (std::size_t p = 0; p < k; ++p)
            for (std::size_t i = 0; i < m; ++i) {
                S av = a[p * m + i];
                const S* brow = b + p * n;
                S* crow = c + i * n;
                for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
    } else {
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                S acc = S(0);
                for (std::size_t p = 0; p < k; ++p) acc += a[p * m + i] * b[j * k + p];
                c[i * n + j] += acc;
            }
    }
}

template <class S>
void check_same_shape(const Tensor<S>& a, const Tensor<S>& b, const char* op) {
    if (a.shape() != b.shape())
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                             " vs " + shape_str(b.shape()));
}

}  // namespace detail

template <class S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
    detail::check_same_shape(a, b, "add");
    auto an = a.node(), bn = b.node();
    auto out = detail::make_op<S>(a.shape(), {&a, &b}, [an, bn](TensorNode<S>& o) {
        if (an->requires_grad) {
            an->ensure_grad();
            for (std::size_t i = 0; i < o.grad.size(); ++i) an->grad[i] += o.grad[i];
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (std::size_t i = 0; i < o.grad.size(); ++i) bn->grad[i] += o.grad[i];
        }
    });
    for (std::size_t i = 0; i < out.numel(); ++i)
        out.value_mut()[i] = an->val[i] + bn->val[i];
    return out;
}

template <class S>
Tensor<S> sub(const Tensor<S>& a, const Tensor<S>& b) {
    detail::check_same_shape(a, b, "sub");
    auto an = a.node(), bn = b.node();
    auto out = detail::make_op<S>(a.shape(), {&a, &b}, [an, bn](TensorNode<S>& o) {
        if (an->requires_grad) {
            an->ensure_grad();
            for (std::size_t i = 0; i < o.grad.size(); ++i) an->grad[i] += o.grad[i];
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (std::size_t i = 0; i < o.grad.size(); ++i) bn->grad[i] -= o.grad[i];
        }
    });
    for (std::size_t i = 0; i < out.numel(); ++i)
        out.value_mut()[i] = an->val[i] - bn->val[i];
    return out;
}

template <class S>
Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b) {
    detail::check_same_shape(a, b, "mul");
    auto an = a.node(), bn = b.node();
    auto out = detail::make_op<S>(a.shape(), {&a, &b}, [an, bn](TensorNode<S>& o) {
        if (an->requires_grad) {
            an->ensure_grad();
            for (std::size_t i = 0; i < o.grad.size(); ++i)
                an->grad[i] += o.grad[i] * bn->val[i];
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (std::size_t i = 0; i < o.grad.size(); ++i)
                bn->grad[i] += o.grad[i] * an->val[i];
        }
    });
    for (std::size_t i = 0; i < out.numel(); ++i)
        out.value_mut()[i] = an->val[i] * bn->val[i];
    return out;
}

template <class S>
Tensor<S> scale(const Tensor<S>& a, S c) {
    auto an = a.node();
    auto out = detail::make_op<S>(a.shape(), {&a}, [an, c](TensorNode<S>& o) {
        an->ensure_grad();
        for (std::size_t i = 0; i < o.grad.size(); ++i) an->grad[i] += c * o.grad[i];
    });
    for (std::size_t i = 0; i < out.numel(); ++i) out.value_mut()[i] = c * an->val[i];
    return out;
}

template <class S>
Tensor<S> add_const(const Tensor<S>& a, S c) {
    auto an = a.node();
    auto out = detail::make_op<S>(a.shape(), {&a}, [an](TensorNode<S>& o) {
        an->ensure_grad();
        for (std::size_t i = 0; i < o.grad.size(); ++i) an->grad[i] += o.grad[i];
    });
    for (std::size_t i = 0; i < out.numel(); ++i) out.value_mut()[i] = an->val[i] + c;
    return out;
}

/// out = s[0] * x for a (1)-shaped gate tensor s; differentiable in both.
template <class S>
Tensor<S> scale_by(const Tensor<S>& x, const Tensor<S>& s) {
    if (s.numel() != 1) throw DimensionError("scale_by: gate must be scalar");
    auto xn = x.node(), sn = s.node();
    auto out = detail::make_op<S>(x.shape(), {&x, &s}, [xn, sn](TensorNode<S>& o) {
        if (xn->requires_grad) {
            xn->ensure_grad();
            for (std::size_t i = 0; i < o.grad.size(); ++i)
                xn->grad[i] += sn->val[0] * o.grad[i];
        }
        if (sn->requires_grad) {
            sn->ensure_grad();
            S acc = S(0);
            for (std::size_t i = 0; i < o.grad.size(); ++i)
                acc += o.grad[i] * xn->val[i];
            sn->grad[0] += acc;
        }
    });
    for (std::size_t i = 0; i < out.numel(); ++i)
        out.value_mut()[i] = sn->val[0] * xn->val[i];
    return out;
}

/// 1 - s, elementwise.
template <class S>
Tensor<S> one_minus(const Tensor<S>& s) {
    auto sn = s.node();
    auto out = detail::make_op<S>(s.shape(), {&s}, [sn](TensorNode<S>& o) {
        sn->ensure_grad();
        for (std::size_t i = 0; i < o.grad.size(); ++i) sn->grad[i] -= o.grad[i];
    });
    for (std::size_t i = 0; i < out.numel(); ++i) out.value_mut()[i] = S(1) - sn->val[i];
    return out;
}

template <class S>
Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b, bool trans_a = false,
                 bool trans_b = false) {
    if (a.rank() != 2 || b.rank() != 2) throw DimensionError("matmul: rank-2 required");
    std::size_t m = trans_a ? a.dim(1) : a.dim(0);
    std::size_t ka = trans_a ? a.dim(0) : a.dim(1);
    std::size_t kb = trans_b ? b.dim(1) : b.dim(0);
    std::size_t n = trans_b ? b.dim(0) : b.dim(1);
    if (ka != kb)
        throw DimensionError("matmul: inner dims " + shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
    auto an = a.node(), bn = b.node();
    auto out = detail::make_op<S>(
        Shape{m, n}, {&a, &b}, [an, bn, m, n, ka, trans_a, trans_b](TensorNode<S>& o) {
            // dA and dB follow from transposing the forward product.
            if (an->requires_grad) {
                an->ensure_grad();
                if (!trans_a)
                    detail::gemm(an->grad.data(), o.grad.data(), bn->val.data(), m, ka, n,
                                 false, !trans_b, true);
                else
                    detail::gemm(an->grad.data(), bn->val.data(), o.grad.data(), ka, m, n,
                                 trans_b, true, true);
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                if (!trans_b)
                    detail::gemm(bn->grad.data(), an->val.data(), o.grad.data(), ka, n, m,
                                 !trans_a, false, true);
                else
                    detail::gemm(bn->grad.data(), o.grad.data(), an->val.data(), n, ka, m,
                                 true, trans_a, true);
            }
        });
    detail::gemm(out.value_mut().data(), an->val.data(), bn->val.data(), m, n, ka,
                 trans_a, trans_b, false);
    return out;
}

/// X (T,d) + row vector b (d) broadcast over rows.
template <class S>
Tensor<S> add_row_bias(const Tensor<S>& x, const Tensor<S>& b) {
    if (x.rank() != 2 || b.rank() != 1 || x.dim(1) != b.dim(0))
        throw DimensionError("add_row_bias: want (T,d) + (d)");
    std::size_t t = x.dim(0), d = x.dim(1);
    auto xn = x.node(), bn = b.node();
    auto out = detail::make_op<S>(x.shape(), {&x, &b}, [xn, bn, t, d](TensorNode<S>& o) {
        if (xn->requires_grad) {
            xn->ensure_grad();
            for (std::size_t i = 0; i < o.grad.size(); ++i) xn->grad[i] += o.grad[i];
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (std::size_t r = 0; r < t; ++r)
                for (std::size_t c = 0; c < d; ++c) bn->grad[c] += o.grad[r * d + c];
        }
    });
    for (std::size_t r = 0; r < t; ++r)
        for (std::size_t c = 0; c < d; ++c)
            out.value_mut()[r * d + c] = xn->val[r * d + c] + bn->val[c];
    return out;
}

template <class S>
Tensor<S> gelu(const Tensor<S>& x) {
    auto xn = x.node();
    auto out = detail::make_op<S>(x.shape(), {&x}, [xn](TensorNode<S>& o) {
        xn->ensure_grad();
        constexpr double inv_sqrt2 = 0.70710678118654752440;
        constexpr double inv_sqrt2pi = 0.39894228040143267794;
        for (std::size_t i = 0; i < o.grad.size(); ++i) {
            double v = static_cast<double>(xn->val[i]);
            double cdf = 0.5 * (1.0 + std::erf(v * inv_sqrt2));
            double pdf = inv_sqrt2pi * std::exp(-0.5 * v * v);
            xn->grad[i] += o.grad[i] * static_cast<S>(cdf + v * pdf);
        }
    });
    constexpr double inv_sqrt2 = 0.70710678118654752440;
    for (std::size_t i = 0; i < out.numel(); ++i) {
        double v = static_cast<double>(xn->val[i]);
        out.value_mut()[i] = static_cast<S>(v * 0.5 * (1.0 + std::erf(v * inv_sqrt2)));
    }
    return out;
}

template <class S>
Tensor<S> sigmoid(const Tensor<S>& x) {
    auto xn = x.node();
    auto out = detail::make_op<S>(x.shape(), {&x}, [xn](TensorNode<S>& o) {
        xn->ensure_grad();
        for (std::size_t i = 0; i < o.grad.size(); ++i) {
            double v = static_cast<double>(xn->val[i]);
            double y = v >= 0 ? 1.0 / (1.0 + std::exp(-v))
                              : std::exp(v) / (1.0 + std::exp(v));
            xn->grad[i] += o.grad[i] * static_cast<S>(y * (1.0 - y));
        }
    });
    for (std::size_t i = 0; i < out.numel(); ++i) {
        double v = static_cast<double>(xn->val[i]);
        out.value_mut()[i] = static_cast<S>(
            v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)));
    }
    return out;
}

/// Row-wise softmax with max-shift; gradient dy_i = y_i (g_i - sum_j g_j y_j).
template <class S>
Tensor<S> softmax_rows(const Tensor<S>& x) {
    if (x.rank() != 2) throw DimensionError("softmax_rows: rank-2 required");
    std::size_t t = x.dim(0), d = x.dim(1);
    auto xn = x.node();
    Tensor<S> out = detail::make_op<S>(x.shape(), {&x}, nullptr);
    auto on = out.node();
    for (std::size_t r = 0; r < t; ++r) {
        const S* row = xn->val.data() + r * d;
        S* orow = on->val.data() + r * d;
        S mx = row[0];
        for (std::size_t c = 1; c < d; ++c) mx = std::max(mx, row[c]);
        S sum = S(0);
        for (std::size_t c = 0; c < d; ++c) {
            orow[c] = static_cast<S>(std::exp(static_cast<double>(row[c] - mx)));
            sum += orow[c];
        }
        for (std::size_t c = 0; c < d; ++c) orow[c] /= sum;
    }
    if (on->requires_grad) {
        on->backprop = [xn, t, d](TensorNode<S>& o) {
            xn->ensure_grad();
            for (std::size_t r = 0; r < t; ++r) {
                const S* y = o.val.data() + r * d;
                const S* g = o.grad.data() + r * d;
                S dot = S(0);
                for (std::size_t c = 0; c < d; ++c) dot += g[c] * y[c];
                S* gx = xn->grad.data() + r * d;
                for (std::size_t c = 0; c < d; ++c) gx[c] += y[c] * (g[c] - dot);
            }
        };
    }
    return out;
}

/// Row-wise layer norm with learnable gain/bias.
template <class S>
Tensor<S> layer_norm_rows(const Tensor<S>& x, const Tensor<S>& gain, const Tensor<S>& bias,
                          double eps = 1e-5) {
    if (x.rank() != 2 || gain.rank() != 1 || bias.rank() != 1 || x.dim(1) != gain.dim(0) ||
        x.dim(1) != bias.dim(0))
        throw DimensionError("layer_norm_rows: want (T,d), (d), (d)");
    std::size_t t = x.dim(0), d = x.dim(1);
    auto xn = x.node(), gn = gain.node(), bn = bias.node();
    Tensor<S> out = detail::make_op<S>(x.shape(), {&x, &gain, &bias}, nullptr);
    auto on = out.node();
    // Cache per-row mean and inverse std for the backward pass.
    auto stats = std::make_shared<std::vector<double>>(2 * t);
    for (std::size_t r = 0; r < t; ++r) {
        const S* row = xn->val.data() + r * d;
        double mean = 0;
        for (std::size_t c = 0; c < d; ++c) mean += static_cast<double>(row[c]);
        mean /= static_cast<double>(d);
        double var = 0;
        for (std::size_t c = 0; c < d; ++c) {
            double dv = static_cast<double>(row[c]) - mean;
            var += dv * dv;
        }
        var /= static_cast<double>(d);
        double inv_std = 1.0 / std::sqrt(var + eps);
        (*stats)[2 * r] = mean;
        (*stats)[2 * r + 1] = inv_std;
        S* orow = on->val.data() + r * d;
        for (std::size_t c = 0; c < d; ++c) {
            double xhat = (static_cast<double>(row[c]) - mean) * inv_std;
            orow[c] = static_cast<S>(xhat) * gn->val[c] + bn->val[c];
        }
    }
    if (on->requires_grad) {
        on->backprop = [xn, gn, bn, stats, t, d](TensorNode<S>& o) {
            if (gn->requires_grad) gn->ensure_grad();
            if (bn->requires_grad) bn->ensure_grad();
            if (xn->requires_grad) xn->ensure_grad();
            for (std::size_t r = 0; r < t; ++r) {
                double mean = (*stats)[2 * r];
                double inv_std = (*stats)[2 * r + 1];
                const S* row = xn->val.data() + r * d;
                const S* g = o.grad.data() + r * d;
                double sum_dxhat = 0, sum_dxhat_xhat = 0;
                for (std::size_t c = 0; c < d; ++c) {
                    double xhat = (static_cast<double>(row[c]) - mean) * inv_std;
                    double dy = static_cast<double>(g[c]);
                    if (gn->requires_grad)
                        gn->grad[c] += static_cast<S>(dy * xhat);
                    if (bn->requires_grad) bn->grad[c] += g[c];
                    double dxhat = dy * static_cast<double>(gn->val[c]);
                    sum_dxhat += dxhat;
                    sum_dxhat_xhat += dxhat * xhat;
                }
                if (!xn->requires_grad) continue;
                double inv_d = 1.0 / static_cast<double>(d);
                S* gx = xn->grad.data() + r * d;
                for (std::size_t c = 0; c < d; ++c) {
                    double xhat = (static_cast<double>(row[c]) - mean) * inv_std;
                    double dxhat = static_cast<double>(g[c]) * static_cast<double>(gn->val[c]);
                    gx[c] += static_cast<S>(
                        inv_std * (dxhat - inv_d * sum_dxhat - xhat * inv_d * sum_dxhat_xhat));
                }
            }
        };
    }
    return out;
}

template <class S>
Tensor<S> concat_rows(const Tensor<S>& a, const Tensor<S>& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(1))
        throw DimensionError("concat_rows: column mismatch");
    std::size_t ra = a.dim(0), rb = b.dim(0), d = a.dim(1);
    auto an = a.node(), bn = b.node();
    auto out =
        detail::make_op<S>(Shape{ra + rb, d}, {&a, &b}, [an, bn, ra, rb, d](TensorNode<S>& o) {
            if (an->requires_grad) {
                an->ensure_grad();
                for (std::size_t i = 0; i < ra * d; ++i) an->grad[i] += o.grad[i];
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (std::size_t i = 0; i < rb * d; ++i) bn->grad[i] += o.grad[ra * d + i];
            }
        });
    std::copy(an->val.begin(), an->val.end(), out.value_mut().begin());
    std::copy(bn->val.begin(), bn->val.end(), out.value_mut().begin() + ra * d);
    return out;
}

template <class S>
Tensor<S> slice_rows(const Tensor<S>& x, std::size_t r0, std::size_t r1) {
    if (x.rank() != 2 || r1 > x.dim(0) || r0 >= r1)
        throw DimensionError("slice_rows: bad range");
    std::size_t d = x.dim(1);
    auto xn = x.node();
    auto out =
        detail::make_op<S>(Shape{r1 - r0, d}, {&x}, [xn, r0, r1, d](TensorNode<S>& o) {
            xn->ensure_grad();
            for (std::size_t i = 0; i < (r1 - r0) * d; ++i)
                xn->grad[r0 * d + i] += o.grad[i];
        });
    std::copy(xn->val.begin() + r0 * d, xn->val.begin() + r1 * d, out.value_mut().begin());
    return out;
}

template <class S>
Tensor<S> slice_cols(const Tensor<S>& x, std::size_t c0, std::size_t c1) {
    if (x.rank() != 2 || c1 > x.dim(1) || c0 >= c1)
        throw DimensionError("slice_cols: bad range");
    std::size_t t = x.dim(0), d = x.dim(1), w = c1 - c0;
    auto xn = x.node();
    auto out = detail::make_op<S>(Shape{t, w}, {&x}, [xn, t, d, c0, w](TensorNode<S>& o) {
        xn->ensure_grad();
        for (std::size_t r = 0; r < t; ++r)
            for (std::size_t c = 0; c < w; ++c)
                xn->grad[r * d + c0 + c] += o.grad[r * w + c];
    });
    for (std::size_t r = 0; r < t; ++r)
        for (std::size_t c = 0; c < w; ++c)
            out.value_mut()[r * w + c] = xn->val[r * d + c0 + c];
    return out;
}

template <class S>
Tensor<S> concat_cols(const std::vector<Tensor<S>>& parts) {
    if (parts.empty()) throw DimensionError("concat_cols: empty input");
    std::size_t t = parts[0].dim(0), total = 0;
    for (const auto& p : parts) {
        if (p.rank() != 2 || p.dim(0) != t) throw DimensionError("concat_cols: row mismatch");
        total += p.dim(1);
    }
    std::vector<const Tensor<S>*> ins;
    std::vector<std::shared_ptr<TensorNode<S>>> nodes;
    std::vector<std::size_t> widths;
    for (const auto& p : parts) {
        ins.push_back(&p);
        nodes.push_back(p.node());
        widths.push_back(p.dim(1));
    }
    auto out = detail::make_op<S>(Shape{t, total}, ins, [nodes, widths, t, total](TensorNode<S>& o) {
        std::size_t off = 0;
        for (std::size_t k = 0; k < nodes.size(); ++k) {
            auto& n = nodes[k];
            if (n->requires_grad) {
                n->ensure_grad();
                for (std::size_t r = 0; r < t; ++r)
                    for (std::size_t c = 0; c < widths[k]; ++c)
                        n->grad[r * widths[k] + c] += o.grad[r * total + off + c];
            }
            off += widths[k];
        }
    });
    std::size_t off = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        auto& n = nodes[k];
        for (std::size_t r = 0; r < t; ++r)
            for (std::size_t c = 0; c < widths[k]; ++c)
                out.value_mut()[r * total + off + c] = n->val[r * widths[k] + c];
        off += widths[k];
    }
    return out;
}

template <class S>
Tensor<S> gather_rows(const Tensor<S>& x, std::vector<std::size_t> idx) {
    if (x.rank() != 2) throw DimensionError("gather_rows: rank-2 required");
    std::size_t d = x.dim(1);
    auto xn = x.node();
    auto shared_idx = std::make_shared<std::vector<std::size_t>>(std::move(idx));
    auto out = detail::make_op<S>(Shape{shared_idx->size(), d}, {&x},
                                  [xn, shared_idx, d](TensorNode<S>& o) {
                                      xn->ensure_grad();
                                      for (std::size_t r = 0; r < shared_idx->size(); ++r) {
                                          std::size_t src = (*shared_idx)[r];
                                          for (std::size_t c = 0; c < d; ++c)
                                              xn->grad[src * d + c] += o.grad[r * d + c];
                                      }
                                  });
    for (std::size_t r = 0; r < shared_idx->size(); ++r) {
        std::size_t src = (*shared_idx)[r];
        if (src >= x.dim(0)) throw DimensionError("gather_rows: index out of range");
        for (std::size_t c = 0; c < d; ++c)
            out.value_mut()[r * d + c] = xn->val[src * d + c];
    }
    return out;
}

/// Mean of row groups: out[v] = mean over rows listed in groups[v]. Rows are
/// accumulated in the order given by the caller, which fixes the float sum.
template <class S>
Tensor<S> group_mean_rows(const Tensor<S>& x, const std::vector<std::vector<std::size_t>>& groups) {
    if (x.rank() != 2) throw DimensionError("group_mean_rows: rank-2 required");
    std::size_t d = x.dim(1);
    auto xn = x.node();
    auto shared_groups = std::make_shared<std::vector<std::vector<std::size_t>>>(groups);
    auto out = detail::make_op<S>(Shape{groups.size(), d}, {&x},
                                  [xn, shared_groups, d](TensorNode<S>& o) {
                                      xn->ensure_grad();
                                      for (std::size_t v = 0; v < shared_groups->size(); ++v) {
                                          const auto& g = (*shared_groups)[v];
                                          S inv = S(1) / static_cast<S>(g.size());
                                          for (std::size_t src : g)
                                              for (std::size_t c = 0; c < d; ++c)
                                                  xn->grad[src * d + c] += inv * o.grad[v * d + c];
                                      }
                                  });
    for (std::size_t v = 0; v < groups.size(); ++v) {
        const auto& g = groups[v];
        if (g.empty()) throw DimensionError("group_mean_rows: empty group");
        S inv = S(1) / static_cast<S>(g.size());
        for (std::size_t c = 0; c < d; ++c) {
            S acc = S(0);
            for (std::size_t src : g) acc += xn->val[src * d + c];
            out.value_mut()[v * d + c] = acc * inv;
        }
    }
    return out;
}

template <class S>
Tensor<S> reshape(const Tensor<S>& x, Shape new_shape) {
    if (shape_numel(new_shape) != x.numel())
        throw DimensionError("reshape: element count mismatch");
    auto xn = x.node();
    auto out = detail::make_op<S>(std::move(new_shape), {&x}, [xn](TensorNode<S>& o) {
        xn->ensure_grad();
        for (std::size_t i = 0; i < o.grad.size(); ++i) xn->grad[i] += o.grad[i];
    });
    std::copy(xn->val.begin(), xn->val.end(), out.value_mut().begin());
    return out;
}

template <class S>
Tensor<S> mean_all(const Tensor<S>& x) {
    auto xn = x.node();
    std::size_t n = x.numel();
    auto out = detail::make_op<S>(Shape{1}, {&x}, [xn, n](TensorNode<S>& o) {
        xn->ensure_grad();
        S g = o.grad[0] / static_cast<S>(n);
        for (std::size_t i = 0; i < n; ++i) xn->grad[i] += g;
    });
    S acc = S(0);
    for (std::size_t i = 0; i < n; ++i) acc += xn->val[i];
    out.value_mut()[0] = acc / static_cast<S>(n);
    return out;
}

template <class S>
Tensor<S> sum_all(const Tensor<S>& x) {
    auto xn = x.node();
    std::size_t n = x.numel();
    auto out = detail::make_op<S>(Shape{1}, {&x}, [xn, n](TensorNode<S>& o) {
        xn->ensure_grad();
        for (std::size_t i = 0; i < n; ++i) xn->grad[i] += o.grad[0];
    });
    S acc = S(0);
    for (std::size_t i = 0; i < n; ++i) acc += xn->val[i];
    out.value_mut()[0] = acc;
    return out;
}

/// Mean squared error against a constant target.
template <class S>
Tensor<S> mse_against(const Tensor<S>& pred, const std::vector<S>& target) {
    if (pred.numel() != target.size()) throw DimensionError("mse_against: size mismatch");
    auto pn = pred.node();
    auto shared_t = std::make_shared<std::vector<S>>(target);
    std::size_t n = pred.numel();
    auto out = detail::make_op<S>(Shape{1}, {&pred}, [pn, shared_t, n](TensorNode<S>& o) {
        pn->ensure_grad();
        S g = o.grad[0] * S(2) / static_cast<S>(n);
        for (std::size_t i = 0; i < n; ++i)
            pn->grad[i] += g * (pn->val[i] - (*shared_t)[i]);
    });
    double acc = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double d = static_cast<double>(pn->val[i]) - static_cast<double>((*shared_t)[i]);
        acc += d * d;
    }
    out.value_mut()[0] = static_cast<S>(acc / static_cast<double>(n));
    return out;
}

/// Mean binary cross-entropy on logits (numerically stable log1p form).
template <class S>
Tensor<S> bce_logits_mean(const Tensor<S>& logits, const std::vector<double>& labels) {
    if (logits.numel() != labels.size())
        throw DimensionError("bce_logits_mean: size mismatch");
    auto ln = logits.node();
    auto shared_y = std::make_shared<std::vector<double>>(labels);
    std::size_t n = logits.numel();
    auto out = detail::make_op<S>(Shape{1}, {&logits}, [ln, shared_y, n](TensorNode<S>& o) {
        ln->ensure_grad();
        S g = o.grad[0] / static_cast<S>(n);
        for (std::size_t i = 0; i < n; ++i) {
            double z = static_cast<double>(ln->val[i]);
            double p = z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
            ln->grad[i] += g * static_cast<S>(p - (*shared_y)[i]);
        }
    });
    double acc = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double z = static_cast<double>(ln->val[i]);
        double y = (*shared_y)[i];
        acc += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
    }
    out.value_mut()[0] = static_cast<S>(acc / static_cast<double>(n));
    return out;
}

/// 2D convolution on (C,H,W) with stride and zero padding.
template <class S>
Tensor<S> conv2d(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& b,
                 std::size_t stride, std::size_t pad) {
    if (x.rank() != 3 || w.rank() != 4 || b.rank() != 1)
        throw DimensionError("conv2d: want x(C,H,W), w(Co,Ci,kh,kw), b(Co)");
    std::size_t ci = x.dim(0), h = x.dim(1), wd = x.dim(2);
    std::size_t co = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    if (w.dim(1) != ci || b.dim(0) != co) throw DimensionError("conv2d: channel mismatch");
    std::size_t oh = (h + 2 * pad - kh) / stride + 1;
    std::size_t ow = (wd + 2 * pad - kw) / stride + 1;
    auto xn = x.node(), wn = w.node(), bn = b.node();
    auto out = detail::make_op<S>(
        Shape{co, oh, ow}, {&x, &w, &b},
        [xn, wn, bn, ci, h, wd, co, kh, kw, oh, ow, stride, pad](TensorNode<S>& o) {
            if (bn->requires_grad) bn->ensure_grad();
            if (wn->requires_grad) wn->ensure_grad();
            if (xn->requires_grad) xn->ensure_grad();
            for (std::size_t c = 0; c < co; ++c)
                for (std::size_t oy = 0; oy < oh; ++oy)
                    for (std::size_t ox = 0; ox < ow; ++ox) {
                        S g = o.grad[(c * oh + oy) * ow + ox];
                        if (bn->requires_grad) bn->grad[c] += g;
                        for (std::size_t ic = 0; ic < ci; ++ic)
                            for (std::size_t ky = 0; ky < kh; ++ky)
                                for (std::size_t kx = 0; kx < kw; ++kx) {
                                    std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) -
                                                        static_cast<std::ptrdiff_t>(pad);
                                    std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kx) -
                                                        static_cast<std::ptrdiff_t>(pad);
                                    if (iy < 0 || ix < 0 || iy >= static_cast<std::ptrdiff_t>(h) ||
                                        ix >= static_cast<std::ptrdiff_t>(wd))
                                        continue;
                                    std::size_t xi = (ic * h + iy) * wd + ix;
                                    std::size_t wi = ((c * ci + ic) * kh + ky) * kw + kx;
                                    if (wn->requires_grad) wn->grad[wi] += g * xn->val[xi];
                                    if (xn->requires_grad) xn->grad[xi] += g * wn->val[wi];
                                }
                    }
        });
    for (std::size_t c = 0; c < co; ++c)
        for (std::size_t oy = 0; oy < oh; ++oy)
            for (std::size_t ox = 0; ox < ow; ++ox) {
                S acc = bn->val[c];
                for (std::size_t ic = 0; ic < ci; ++ic)
                    for (std::size_t ky = 0; ky < kh; ++ky)
                        for (std::size_t kx = 0; kx < kw; ++kx) {
                            std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) -
                                                static_cast<std::ptrdiff_t>(pad);
                            std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kx) -
                                                static_cast<std::ptrdiff_t>(pad);
                            if (iy < 0 || ix < 0 || iy >= static_cast<std::ptrdiff_t>(h) ||
                                ix >= static_cast<std::ptrdiff_t>(wd))
                                continue;
                            acc += xn->val[(ic * h + iy) * wd + ix] *
                                   wn->val[((c * ci + ic) * kh + ky) * kw + kx];
                        }
                out.value_mut()[(c * oh + oy) * ow + ox] = acc;
            }
    return out;
}

}  // namespace foar::core
