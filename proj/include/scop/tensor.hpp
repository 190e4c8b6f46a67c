#pragma once

// Dense row-major tensors with reverse-mode automatic differentiation.
//
// A BasicTensor is a shared handle to a node in the computation graph. Ops
// produce new nodes that remember their parents and a backward closure; only
// nodes reachable from a gradient-requiring leaf record anything. Reductions
// accumulate in double regardless of the storage type.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace scop {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

class ShapeError : public std::invalid_argument {
   public:
    using std::invalid_argument::invalid_argument;
};

template <class T>
struct TensorNode {
    Shape shape;
    std::vector<T> value;
    std::vector<T> grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<TensorNode>> parents;
    std::function<void(TensorNode&)> backward;

    bool is_leaf() const { return !backward; }
    std::vector<T>& grad_buffer() {
        if (grad.size() != value.size()) grad.assign(value.size(), T(0));
        return grad;
    }
};

template <class T>
class BasicTensor {
   public:
    using Node = TensorNode<T>;
    using value_type = T;

    BasicTensor() = default;
    explicit BasicTensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

    static BasicTensor zeros(Shape shape, bool requires_grad = false) {
        auto node = std::make_shared<Node>();
        node->value.assign(shape_size(shape), T(0));
        node->shape = std::move(shape);
        node->requires_grad = requires_grad;
        return BasicTensor(std::move(node));
    }

    static BasicTensor from(Shape shape, std::vector<T> values, bool requires_grad = false) {
        if (shape_size(shape) != values.size())
            throw ShapeError("value count " + std::to_string(values.size()) +
                             " does not match shape " + shape_string(shape));
        auto node = std::make_shared<Node>();
        node->shape = std::move(shape);
        node->value = std::move(values);
        node->requires_grad = requires_grad;
        return BasicTensor(std::move(node));
    }

    static BasicTensor scalar(T v) { return from({}, {v}); }

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::size_t rank() const { return node_->shape.size(); }
    std::size_t size() const { return node_->value.size(); }
    std::size_t rows() const { return rank() == 2 ? shape()[0] : 1; }
    std::size_t cols() const { return rank() == 0 ? 1 : shape().back(); }

    std::span<const T> values() const { return node_->value; }
    std::span<T> mutable_values() { return node_->value; }
    T operator[](std::size_t i) const { return node_->value[i]; }
    T at(std::size_t r, std::size_t c) const { return node_->value[r * cols() + c]; }
    T item() const {
        if (size() != 1) throw ShapeError("item() on tensor of shape " + shape_string(shape()));
        return node_->value[0];
    }

    bool requires_grad() const { return node_->requires_grad; }
    bool has_grad() const { return node_->grad.size() == node_->value.size(); }
    std::span<const T> grad() const { return node_->grad; }
    std::span<T> mutable_grad() { return node_->grad_buffer(); }
    void zero_grad() { std::fill(node_->grad.begin(), node_->grad.end(), T(0)); }

    const std::shared_ptr<Node>& node() const { return node_; }

   private:
    std::shared_ptr<Node> node_;
};

using Tensor = BasicTensor<float>;

/// Creates an op result. `backward` runs only when some parent requires a
/// gradient; it receives the finished result node and must accumulate into
/// the parents' grad buffers.
template <class T>
BasicTensor<T> make_result(Shape shape, std::vector<T> value,
                           std::vector<std::shared_ptr<TensorNode<T>>> parents,
                           std::function<void(TensorNode<T>&)> backward) {
    auto node = std::make_shared<TensorNode<T>>();
    node->shape = std::move(shape);
    node->value = std::move(value);
    bool needs = std::any_of(parents.begin(), parents.end(),
                             [](const auto& p) { return p->requires_grad; });
    if (needs) {
        node->requires_grad = true;
        node->parents = std::move(parents);
        node->backward = std::move(backward);
    }
    return BasicTensor<T>(std::move(node));
}

namespace detail {

inline void require(bool ok, const std::string& what) {
    if (!ok) throw ShapeError(what);
}

template <class T>
void require_matrix(const BasicTensor<T>& a, const char* op) {
    require(a.rank() == 2, std::string(op) + ": expected a matrix, got " + shape_string(a.shape()));
}

template <class T>
void require_same(const BasicTensor<T>& a, const BasicTensor<T>& b, const char* op) {
    require(a.shape() == b.shape(), std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                                        " vs " + shape_string(b.shape()));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise

template <class T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    detail::require_same(a, b, "add");
    std::vector<T> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
    return make_result<T>(a.shape(), std::move(out), {a.node(), b.node()}, [](TensorNode<T>& self) {
        for (auto& p : self.parents) {
            if (!p->requires_grad) continue;
            auto& g = p->grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
    });
}

template <class T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    detail::require_same(a, b, "sub");
    std::vector<T> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
    return make_result<T>(a.shape(), std::move(out), {a.node(), b.node()}, [](TensorNode<T>& self) {
        auto& pa = self.parents[0];
        auto& pb = self.parents[1];
        if (pa->requires_grad) {
            auto& g = pa->grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
        if (pb->requires_grad) {
            auto& g = pb->grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
        }
    });
}

template <class T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    detail::require_same(a, b, "mul");
    std::vector<T> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
    return make_result<T>(a.shape(), std::move(out), {a.node(), b.node()}, [](TensorNode<T>& self) {
        auto& pa = self.parents[0];
        auto& pb = self.parents[1];
        if (pa->requires_grad) {
            auto& g = pa->grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb->value[i];
        }
        if (pb->requires_grad) {
            auto& g = pb->grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa->value[i];
        }
    });
}

template <class T>
BasicTensor<T> scale(const BasicTensor<T>& a, T factor) {
    std::vector<T> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * factor;
    return make_result<T>(a.shape(), std::move(out), {a.node()}, [factor](TensorNode<T>& self) {
        auto& g = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * factor;
    });
}

namespace detail {

template <class T, class F, class D>
BasicTensor<T> unary(const BasicTensor<T>& a, F f, D df) {
    std::vector<T> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(a[i]);
    return make_result<T>(a.shape(), std::move(out), {a.node()}, [df](TensorNode<T>& self) {
        auto& p = *self.parents[0];
        auto& g = p.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * df(p.value[i], self.value[i]);
    });
}

}  // namespace detail

template <class T>
BasicTensor<T> relu(const BasicTensor<T>& a) {
    return detail::unary(
        a, [](T x) { return x > T(0) ? x : T(0); }, [](T x, T) { return x > T(0) ? T(1) : T(0); });
}

template <class T>
BasicTensor<T> cosine(const BasicTensor<T>& a) {
    return detail::unary(
        a, [](T x) { return std::cos(x); }, [](T x, T) { return -std::sin(x); });
}

template <class T>
BasicTensor<T> sine(const BasicTensor<T>& a) {
    return detail::unary(
        a, [](T x) { return std::sin(x); }, [](T x, T) { return std::cos(x); });
}

/// log(1 + exp(x)), computed without overflow.
template <class T>
BasicTensor<T> softplus(const BasicTensor<T>& a) {
    return detail::unary(
        a,
        [](T x) {
            double v = x;
            return static_cast<T>(v > 0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)));
        },
        [](T x, T) { return static_cast<T>(1.0 / (1.0 + std::exp(-static_cast<double>(x)))); });
}

/// Natural log with inputs clamped to at least `floor`; the gradient is zero
/// where the clamp is active.
template <class T>
BasicTensor<T> log_clamped(const BasicTensor<T>& a, T floor) {
    return detail::unary(
        a, [floor](T x) { return std::log(std::max(x, floor)); },
        [floor](T x, T) { return x > floor ? T(1) / x : T(0); });
}

// ---------------------------------------------------------------------------
// Linear algebra

template <class T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    detail::require_matrix(a, "matmul");
    detail::require_matrix(b, "matmul");
    const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    detail::require(b.shape()[0] == k, "matmul: inner extents differ " + shape_string(a.shape()) +
                                           " x " + shape_string(b.shape()));
    std::vector<T> out(m * n);
    std::vector<double> acc(n);
    const T* av = a.values().data();
    const T* bv = b.values().data();
    for (std::size_t i = 0; i < m; ++i) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (std::size_t p = 0; p < k; ++p) {
            const double x = av[i * k + p];
            if (x == 0.0) continue;
            const T* brow = bv + p * n;
            for (std::size_t j = 0; j < n; ++j) acc[j] += x * brow[j];
        }
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] = static_cast<T>(acc[j]);
    }
    return make_result<T>({m, n}, std::move(out), {a.node(), b.node()}, [m, k, n](TensorNode<T>& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        const T* dc = self.grad.data();
        if (pa.requires_grad) {
            // dA = dC * B^T
            auto& ga = pa.grad_buffer();
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t p = 0; p < k; ++p) {
                    double s = 0;
                    const T* brow = pb.value.data() + p * n;
                    const T* drow = dc + i * n;
                    for (std::size_t j = 0; j < n; ++j) s += static_cast<double>(drow[j]) * brow[j];
                    ga[i * k + p] += static_cast<T>(s);
                }
            }
        }
        if (pb.requires_grad) {
            // dB = A^T * dC
            auto& gb = pb.grad_buffer();
            std::vector<double> acc(k * n, 0.0);
            for (std::size_t i = 0; i < m; ++i) {
                const T* drow = dc + i * n;
                for (std::size_t p = 0; p < k; ++p) {
                    const double x = pa.value[i * k + p];
                    if (x == 0.0) continue;
                    double* arow = acc.data() + p * n;
                    for (std::size_t j = 0; j < n; ++j) arow[j] += x * drow[j];
                }
            }
            for (std::size_t i = 0; i < k * n; ++i) gb[i] += static_cast<T>(acc[i]);
        }
    });
}

template <class T>
BasicTensor<T> transpose(const BasicTensor<T>& a) {
    detail::require_matrix(a, "transpose");
    const std::size_t m = a.shape()[0], n = a.shape()[1];
    std::vector<T> out(m * n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[j * m + i] = a[i * n + j];
    return make_result<T>({n, m}, std::move(out), {a.node()}, [m, n](TensorNode<T>& self) {
        auto& g = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) g[i * n + j] += self.grad[j * m + i];
    });
}

/// a[m x n] + bias[n], broadcast over rows.
template <class T>
BasicTensor<T> add_row(const BasicTensor<T>& a, const BasicTensor<T>& bias) {
    detail::require_matrix(a, "add_row");
    const std::size_t m = a.shape()[0], n = a.shape()[1];
    detail::require(bias.size() == n, "add_row: bias has " + std::to_string(bias.size()) +
                                          " values, expected " + std::to_string(n));
    std::vector<T> out(m * n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] = a[i * n + j] + bias[j];
    return make_result<T>(a.shape(), std::move(out), {a.node(), bias.node()}, [m, n](TensorNode<T>& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        if (pa.requires_grad) {
            auto& g = pa.grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
        if (pb.requires_grad) {
            auto& g = pb.grad_buffer();
            for (std::size_t j = 0; j < n; ++j) {
                double s = 0;
                for (std::size_t i = 0; i < m; ++i) s += self.grad[i * n + j];
                g[j] += static_cast<T>(s);
            }
        }
    });
}

// ---------------------------------------------------------------------------
// Normalization

namespace detail {

template <class T>
void softmax_rows(std::span<const T> x, std::span<T> y, std::size_t n, const std::uint8_t* mask) {
    const std::size_t rows = x.size() / n;
    for (std::size_t r = 0; r < rows; ++r) {
        const T* xr = x.data() + r * n;
        T* yr = y.data() + r * n;
        double mx = -INFINITY;
        for (std::size_t j = 0; j < n; ++j)
            if (!mask || mask[j]) mx = std::max(mx, static_cast<double>(xr[j]));
        if (mx == -INFINITY) throw std::invalid_argument("softmax: every entry in a row is masked");
        double sum = 0;
        for (std::size_t j = 0; j < n; ++j) {
            double e = (!mask || mask[j]) ? std::exp(static_cast<double>(xr[j]) - mx) : 0.0;
            yr[j] = static_cast<T>(e);
            sum += e;
        }
        for (std::size_t j = 0; j < n; ++j) yr[j] = static_cast<T>(yr[j] / sum);
    }
}

template <class T>
BasicTensor<T> softmax_impl(const BasicTensor<T>& a, std::vector<std::uint8_t> mask) {
    detail::require(a.rank() >= 1 && a.cols() >= 1, "softmax: needs a last axis of extent >= 1");
    const std::size_t n = a.cols();
    for (std::size_t i = 0; i < a.size(); ++i)
        if ((mask.empty() || mask[i % n]) && !std::isfinite(static_cast<double>(a[i])))
            throw std::invalid_argument("softmax: non-finite input");
    std::vector<T> out(a.size());
    softmax_rows<T>(a.values(), out, n, mask.empty() ? nullptr : mask.data());
    return make_result<T>(a.shape(), std::move(out), {a.node()}, [n](TensorNode<T>& self) {
        auto& g = self.parents[0]->grad_buffer();
        const std::size_t rows = self.value.size() / n;
        for (std::size_t r = 0; r < rows; ++r) {
            const T* y = self.value.data() + r * n;
            const T* dy = self.grad.data() + r * n;
            double dot = 0;
            for (std::size_t j = 0; j < n; ++j) dot += static_cast<double>(dy[j]) * y[j];
            for (std::size_t j = 0; j < n; ++j) g[r * n + j] += static_cast<T>(y[j] * (dy[j] - dot));
        }
    });
}

}  // namespace detail

/// Softmax over the last axis, with max subtraction.
template <class T>
BasicTensor<T> softmax(const BasicTensor<T>& a) {
    return detail::softmax_impl(a, {});
}

/// Softmax over the last axis where columns with key_mask[j] == 0 get exactly
/// zero weight (equivalent to a -inf logit).
template <class T>
BasicTensor<T> masked_softmax(const BasicTensor<T>& a, std::span<const std::uint8_t> key_mask) {
    detail::require(key_mask.size() == a.cols(), "masked_softmax: mask length differs from last axis");
    return detail::softmax_impl(a, std::vector<std::uint8_t>(key_mask.begin(), key_mask.end()));
}

template <class T>
BasicTensor<T> layer_norm(const BasicTensor<T>& x, const BasicTensor<T>& gain,
                          const BasicTensor<T>& bias, double eps = 1e-5) {
    detail::require(x.rank() >= 1, "layer_norm: needs a last axis");
    const std::size_t d = x.cols();
    detail::require(gain.size() == d && bias.size() == d, "layer_norm: gain/bias size mismatch");
    const std::size_t rows = x.size() / d;
    std::vector<T> out(x.size());
    std::vector<double> xhat(x.size());
    std::vector<double> inv_std(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const T* xr = x.values().data() + r * d;
        double mean = 0;
        for (std::size_t j = 0; j < d; ++j) mean += xr[j];
        mean /= static_cast<double>(d);
        double var = 0;
        for (std::size_t j = 0; j < d; ++j) var += (xr[j] - mean) * (xr[j] - mean);
        var /= static_cast<double>(d);
        inv_std[r] = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < d; ++j) {
            xhat[r * d + j] = (xr[j] - mean) * inv_std[r];
            out[r * d + j] = static_cast<T>(xhat[r * d + j] * gain[j] + bias[j]);
        }
    }
    return make_result<T>(
        x.shape(), std::move(out), {x.node(), gain.node(), bias.node()},
        [d, rows, xhat = std::move(xhat), inv_std = std::move(inv_std)](TensorNode<T>& self) {
            auto& px = *self.parents[0];
            auto& pg = *self.parents[1];
            auto& pb = *self.parents[2];
            if (px.requires_grad) {
                auto& gx = px.grad_buffer();
                for (std::size_t r = 0; r < rows; ++r) {
                    double mean_dh = 0, mean_dh_xh = 0;
                    for (std::size_t j = 0; j < d; ++j) {
                        double dh = static_cast<double>(self.grad[r * d + j]) * pg.value[j];
                        mean_dh += dh;
                        mean_dh_xh += dh * xhat[r * d + j];
                    }
                    mean_dh /= static_cast<double>(d);
                    mean_dh_xh /= static_cast<double>(d);
                    for (std::size_t j = 0; j < d; ++j) {
                        double dh = static_cast<double>(self.grad[r * d + j]) * pg.value[j];
                        gx[r * d + j] += static_cast<T>(inv_std[r] * (dh - mean_dh - xhat[r * d + j] * mean_dh_xh));
                    }
                }
            }
            if (pg.requires_grad || pb.requires_grad) {
                std::vector<double> dg(d, 0.0), db(d, 0.0);
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t j = 0; j < d; ++j) {
                        dg[j] += static_cast<double>(self.grad[r * d + j]) * xhat[r * d + j];
                        db[j] += self.grad[r * d + j];
                    }
                if (pg.requires_grad) {
                    auto& g = pg.grad_buffer();
                    for (std::size_t j = 0; j < d; ++j) g[j] += static_cast<T>(dg[j]);
                }
                if (pb.requires_grad) {
                    auto& g = pb.grad_buffer();
                    for (std::size_t j = 0; j < d; ++j) g[j] += static_cast<T>(db[j]);
                }
            }
        });
}

// ---------------------------------------------------------------------------
// Indexing and layout

/// Rows `index` of table[n x d], in order; backward scatter-adds.
template <class T>
BasicTensor<T> gather_rows(const BasicTensor<T>& table, std::vector<std::uint32_t> index) {
    detail::require_matrix(table, "gather_rows");
    const std::size_t n = table.shape()[0], d = table.shape()[1], k = index.size();
    std::vector<T> out(k * d);
    for (std::size_t i = 0; i < index.size(); ++i) {
        if (index[i] >= n)
            throw std::out_of_range("gather_rows: row " + std::to_string(index[i]) + " of " + std::to_string(n));
        std::copy_n(table.values().data() + index[i] * d, d, out.data() + i * d);
    }
    return make_result<T>({k, d}, std::move(out), {table.node()},
                          [d, index = std::move(index)](TensorNode<T>& self) {
                              auto& g = self.parents[0]->grad_buffer();
                              for (std::size_t i = 0; i < index.size(); ++i)
                                  for (std::size_t j = 0; j < d; ++j) g[index[i] * d + j] += self.grad[i * d + j];
                          });
}

template <class T>
BasicTensor<T> concat_rows(const std::vector<BasicTensor<T>>& parts) {
    detail::require(!parts.empty(), "concat_rows: no inputs");
    const std::size_t d = parts[0].cols();
    std::size_t rows = 0;
    std::vector<std::shared_ptr<TensorNode<T>>> parents;
    for (const auto& p : parts) {
        detail::require_matrix(p, "concat_rows");
        detail::require(p.cols() == d, "concat_rows: column mismatch");
        rows += p.rows();
        parents.push_back(p.node());
    }
    std::vector<T> out;
    out.reserve(rows * d);
    for (const auto& p : parts) out.insert(out.end(), p.values().begin(), p.values().end());
    return make_result<T>({rows, d}, std::move(out), std::move(parents), [](TensorNode<T>& self) {
        std::size_t offset = 0;
        for (auto& p : self.parents) {
            if (p->requires_grad) {
                auto& g = p->grad_buffer();
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[offset + i];
            }
            offset += p->value.size();
        }
    });
}

template <class T>
BasicTensor<T> concat_cols(const std::vector<BasicTensor<T>>& parts) {
    detail::require(!parts.empty(), "concat_cols: no inputs");
    const std::size_t m = parts[0].rows();
    std::size_t n = 0;
    std::vector<std::shared_ptr<TensorNode<T>>> parents;
    std::vector<std::size_t> widths;
    for (const auto& p : parts) {
        detail::require_matrix(p, "concat_cols");
        detail::require(p.rows() == m, "concat_cols: row mismatch");
        widths.push_back(p.cols());
        n += p.cols();
        parents.push_back(p.node());
    }
    std::vector<T> out(m * n);
    std::size_t c0 = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        for (std::size_t i = 0; i < m; ++i)
            std::copy_n(parts[k].values().data() + i * widths[k], widths[k], out.data() + i * n + c0);
        c0 += widths[k];
    }
    return make_result<T>({m, n}, std::move(out), std::move(parents),
                          [m, n, widths = std::move(widths)](TensorNode<T>& self) {
                              std::size_t c = 0;
                              for (std::size_t k = 0; k < widths.size(); ++k) {
                                  auto& p = *self.parents[k];
                                  if (p.requires_grad) {
                                      auto& g = p.grad_buffer();
                                      for (std::size_t i = 0; i < m; ++i)
                                          for (std::size_t j = 0; j < widths[k]; ++j)
                                              g[i * widths[k] + j] += self.grad[i * n + c + j];
                                  }
                                  c += widths[k];
                              }
                          });
}

template <class T>
BasicTensor<T> slice_cols(const BasicTensor<T>& a, std::size_t start, std::size_t count) {
    detail::require_matrix(a, "slice_cols");
    const std::size_t m = a.shape()[0], n = a.shape()[1];
    detail::require(start + count <= n, "slice_cols: range past last column");
    std::vector<T> out(m * count);
    for (std::size_t i = 0; i < m; ++i) std::copy_n(a.values().data() + i * n + start, count, out.data() + i * count);
    return make_result<T>({m, count}, std::move(out), {a.node()}, [m, n, start, count](TensorNode<T>& self) {
        auto& g = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < count; ++j) g[i * n + start + j] += self.grad[i * count + j];
    });
}

template <class T>
BasicTensor<T> reshape(const BasicTensor<T>& a, Shape shape) {
    detail::require(shape_size(shape) == a.size(), "reshape: size mismatch");
    std::vector<T> out(a.values().begin(), a.values().end());
    return make_result<T>(std::move(shape), std::move(out), {a.node()}, [](TensorNode<T>& self) {
        auto& g = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    });
}

// ---------------------------------------------------------------------------
// Reductions

template <class T>
BasicTensor<T> sum(const BasicTensor<T>& a) {
    double s = 0;
    for (auto v : a.values()) s += v;
    return make_result<T>({}, {static_cast<T>(s)}, {a.node()}, [](TensorNode<T>& self) {
        auto& g = self.parents[0]->grad_buffer();
        for (auto& v : g) v += self.grad[0];
    });
}

template <class T>
BasicTensor<T> mean(const BasicTensor<T>& a) {
    detail::require(a.size() > 0, "mean: empty tensor");
    return scale(sum(a), static_cast<T>(1.0 / static_cast<double>(a.size())));
}

/// Per-row sum of a[m x n] -> [m x 1].
template <class T>
BasicTensor<T> sum_cols(const BasicTensor<T>& a) {
    detail::require_matrix(a, "sum_cols");
    const std::size_t m = a.shape()[0], n = a.shape()[1];
    std::vector<T> out(m);
    for (std::size_t i = 0; i < m; ++i) {
        double s = 0;
        for (std::size_t j = 0; j < n; ++j) s += a[i * n + j];
        out[i] = static_cast<T>(s);
    }
    return make_result<T>({m, 1}, std::move(out), {a.node()}, [m, n](TensorNode<T>& self) {
        auto& g = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) g[i * n + j] += self.grad[i];
    });
}

/// Per-row Euclidean norm of a[m x n] -> [m x 1]. The gradient at a zero row
/// is taken as zero.
template <class T>
BasicTensor<T> row_norm(const BasicTensor<T>& a) {
    detail::require_matrix(a, "row_norm");
    const std::size_t m = a.shape()[0], n = a.shape()[1];
    std::vector<T> out(m);
    for (std::size_t i = 0; i < m; ++i) {
        double s = 0;
        for (std::size_t j = 0; j < n; ++j) s += static_cast<double>(a[i * n + j]) * a[i * n + j];
        out[i] = static_cast<T>(std::sqrt(s));
    }
    return make_result<T>({m, 1}, std::move(out), {a.node()}, [m, n](TensorNode<T>& self) {
        auto& p = *self.parents[0];
        auto& g = p.grad_buffer();
        for (std::size_t i = 0; i < m; ++i) {
            if (self.value[i] == T(0)) continue;
            double f = static_cast<double>(self.grad[i]) / self.value[i];
            for (std::size_t j = 0; j < n; ++j) g[i * n + j] += static_cast<T>(f * p.value[i * n + j]);
        }
    });
}

// ---------------------------------------------------------------------------
// Regularization

/// Inverted dropout. With a null rng (evaluation) the input is returned as is.
template <class T>
BasicTensor<T> dropout(const BasicTensor<T>& a, double p, std::mt19937_64* rng) {
    if (rng == nullptr || p <= 0.0) return a;
    if (p >= 1.0) throw std::invalid_argument("dropout: probability must be below 1");
    std::bernoulli_distribution keep(1.0 - p);
    const T factor = static_cast<T>(1.0 / (1.0 - p));
    std::vector<T> multiplier(a.size());
    for (auto& m : multiplier) m = keep(*rng) ? factor : T(0);
    std::vector<T> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * multiplier[i];
    return make_result<T>(a.shape(), std::move(out), {a.node()},
                          [multiplier = std::move(multiplier)](TensorNode<T>& self) {
                              auto& g = self.parents[0]->grad_buffer();
                              for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * multiplier[i];
                          });
}

// ---------------------------------------------------------------------------
// Backpropagation

/// Accumulates d(loss)/d(leaf) into every reachable gradient-requiring leaf.
/// Intermediate gradients are recomputed from scratch on every call; leaf
/// gradients keep accumulating until zero_grad().
template <class T>
void backprop(const BasicTensor<T>& loss) {
    if (loss.size() != 1)
        throw ShapeError("backprop: loss must be a scalar, got " + shape_string(loss.shape()));
    if (!loss.requires_grad()) return;

    using NodePtr = TensorNode<T>*;
    std::vector<NodePtr> order;
    std::unordered_set<NodePtr> visited;
    std::vector<std::pair<NodePtr, std::size_t>> stack{{loss.node().get(), 0}};
    visited.insert(loss.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            NodePtr parent = node->parents[next++].get();
            if (parent->requires_grad && visited.insert(parent).second) stack.push_back({parent, 0});
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    for (NodePtr n : order)
        if (!n->is_leaf()) n->grad.assign(n->value.size(), T(0));
    loss.node()->grad_buffer()[0] += T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if (!(*it)->is_leaf()) (*it)->backward(**it);
}

}  // namespace scop
