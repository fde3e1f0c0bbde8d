#include "hdt/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <sstream>
#include <unordered_set>

#ifdef HDT_HAVE_CBLAS
#include <cblas.h>
#endif

namespace hdt {

namespace {

#ifdef HDT_HAVE_CBLAS
// Pin BLAS to one thread before its first use: keeps step timing stable and
// makes results independent of the machine's core count.
const bool g_blas_env = [] {
    ::setenv("OPENBLAS_NUM_THREADS", "1", 0);
    ::setenv("OMP_NUM_THREADS", "1", 0);
    return true;
}();
#endif

thread_local bool g_grad_enabled = true;

// C[m,n] (+)= A[m,k] * B[k,n], all row-major.
void gemm(bool trans_a, bool trans_b, std::int64_t m, std::int64_t n, std::int64_t k,
          const double* a, std::int64_t lda, const double* b, std::int64_t ldb,
          double beta, double* c) {
#ifdef HDT_HAVE_CBLAS
    cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
                trans_b ? CblasTrans : CblasNoTrans, static_cast<int>(m), static_cast<int>(n),
                static_cast<int>(k), 1.0, a, static_cast<int>(lda), b, static_cast<int>(ldb), beta,
                c, static_cast<int>(n));
#else
    if (beta == 0.0) std::fill(c, c + m * n, 0.0);
    for (std::int64_t i = 0; i < m; ++i) {
        for (std::int64_t p = 0; p < k; ++p) {
            const double av = trans_a ? a[p * lda + i] : a[i * lda + p];
            if (av == 0.0) continue;
            const double* brow = trans_b ? nullptr : b + p * ldb;
            double* crow = c + i * n;
            if (trans_b) {
                for (std::int64_t j = 0; j < n; ++j) crow[j] += av * b[j * ldb + p];
            } else {
                for (std::int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
        }
    }
#endif
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                             " vs " + shape_str(b.shape()));
    }
}

}  // namespace

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << "x";
        os << s[i];
    }
    os << "]";
    return os.str();
}

std::int64_t shape_numel(const Shape& s) {
    return std::accumulate(s.begin(), s.end(), std::int64_t{1}, std::multiplies<>());
}

bool GradMode::enabled() { return g_grad_enabled; }
void GradMode::set_enabled(bool on) { g_grad_enabled = on; }

NoGradGuard::NoGradGuard() : prev_(GradMode::enabled()) { GradMode::set_enabled(false); }
NoGradGuard::~NoGradGuard() { GradMode::set_enabled(prev_); }

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad) {
    if (shape_numel(shape) != static_cast<std::int64_t>(data.size())) {
        throw DimensionError("tensor: data length " + std::to_string(data.size()) +
                             " does not match shape " + shape_str(shape));
    }
    node_ = std::make_shared<detail::TensorNode>();
    node_->shape = std::move(shape);
    node_->data = std::move(data);
    node_->requires_grad = requires_grad;
    node_->is_leaf = true;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    auto n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(static_cast<std::size_t>(n), 0.0), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    auto n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(static_cast<std::size_t>(n), value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return Tensor(Shape{1}, std::vector<double>{value}, requires_grad);
}

Tensor Tensor::rand_uniform(Shape shape, Rng& rng, double lo, double hi, bool requires_grad) {
    auto n = shape_numel(shape);
    std::vector<double> d(static_cast<std::size_t>(n));
    rng.fill_uniform(d, lo, hi);
    return Tensor(std::move(shape), std::move(d), requires_grad);
}

Tensor Tensor::rand_normal(Shape shape, Rng& rng, double mean, double sigma, bool requires_grad) {
    auto n = shape_numel(shape);
    std::vector<double> d(static_cast<std::size_t>(n));
    rng.fill_normal(d, mean, sigma);
    return Tensor(std::move(shape), std::move(d), requires_grad);
}

double Tensor::item() const {
    if (numel() != 1) throw DimensionError("item: tensor has " + std::to_string(numel()) + " elements");
    return node_->data[0];
}

double Tensor::at(std::initializer_list<std::int64_t> idx) const {
    if (idx.size() != rank()) throw DimensionError("at: rank mismatch");
    std::int64_t flat = 0;
    std::size_t axis = 0;
    for (std::int64_t i : idx) {
        if (i < 0 || i >= node_->shape[axis]) throw IndexError("at: index out of range");
        flat = flat * node_->shape[axis] + i;
        ++axis;
    }
    return node_->data[static_cast<std::size_t>(flat)];
}

void Tensor::zero_grad() {
    if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

void Tensor::accumulate_grad(std::span<const double> g) {
    if (g.size() != node_->data.size()) throw DimensionError("accumulate_grad: size mismatch");
    node_->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) node_->grad[i] += g[i];
}

Tensor make_op_result(Shape shape, std::vector<double> data, std::vector<Tensor> inputs,
                      std::function<void(detail::TensorNode&)> backward_fn) {
    Tensor out(std::move(shape), std::move(data), false);
    bool need_tape = false;
    if (GradMode::enabled()) {
        for (const auto& t : inputs) {
            if (t.node()->requires_grad) {
                need_tape = true;
                break;
            }
        }
    }
    if (need_tape) {
        auto n = out.node();
        n->requires_grad = true;
        n->is_leaf = false;
        n->parents.reserve(inputs.size());
        for (auto& t : inputs) n->parents.push_back(t.node());
        n->backward_fn = std::move(backward_fn);
    }
    return out;
}

void Tensor::backward() const {
    if (numel() != 1) throw DimensionError("backward: root must be scalar, got " + shape_str(shape()));
    if (!node_->requires_grad) return;

    // Reverse post-order DFS gives a topological order with the root first.
    std::vector<detail::TensorNode*> order;
    std::unordered_set<detail::TensorNode*> seen;
    std::vector<std::pair<detail::TensorNode*, std::size_t>> stack;
    stack.emplace_back(node_.get(), 0);
    seen.insert(node_.get());
    while (!stack.empty()) {
        auto& [n, next] = stack.back();
        if (next < n->parents.size()) {
            detail::TensorNode* p = n->parents[next++].get();
            if (p->requires_grad && !seen.count(p)) {
                seen.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }
    std::reverse(order.begin(), order.end());

    node_->ensure_grad();
    node_->grad[0] += 1.0;
    for (detail::TensorNode* n : order) {
        if (n->is_leaf || n->grad.empty()) continue;
        if (n->backward_fn) n->backward_fn(*n);
        n->grad.clear();
        n->grad.shrink_to_fit();
    }
}

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

namespace {

Tensor unary_op(const Tensor& x, std::function<double(double)> f,
                std::function<double(double /*x*/, double /*y*/)> df) {
    const auto& xd = x.data();
    std::vector<double> out(xd.size());
    for (std::size_t i = 0; i < xd.size(); ++i) out[i] = f(xd[i]);
    auto xn = x.node();
    return make_op_result(x.shape(), std::move(out), {x}, [xn, df](detail::TensorNode& self) {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            xn->grad[i] += self.grad[i] * df(xn->data[i], self.data[i]);
    });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    const auto ad = a.data(), bd = b.data();
    std::vector<double> out(ad.size());
    for (std::size_t i = 0; i < ad.size(); ++i) out[i] = ad[i] + bd[i];
    auto an = a.node(), bn = b.node();
    return make_op_result(a.shape(), std::move(out), {a, b}, [an, bn](detail::TensorNode& self) {
        if (an->requires_grad) {
            an->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) bn->grad[i] += self.grad[i];
        }
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    const auto ad = a.data(), bd = b.data();
    std::vector<double> out(ad.size());
    for (std::size_t i = 0; i < ad.size(); ++i) out[i] = ad[i] - bd[i];
    auto an = a.node(), bn = b.node();
    return make_op_result(a.shape(), std::move(out), {a, b}, [an, bn](detail::TensorNode& self) {
        if (an->requires_grad) {
            an->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) bn->grad[i] -= self.grad[i];
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    const auto ad = a.data(), bd = b.data();
    std::vector<double> out(ad.size());
    for (std::size_t i = 0; i < ad.size(); ++i) out[i] = ad[i] * bd[i];
    auto an = a.node(), bn = b.node();
    return make_op_result(a.shape(), std::move(out), {a, b}, [an, bn](detail::TensorNode& self) {
        if (an->requires_grad) {
            an->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i] * bn->data[i];
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) bn->grad[i] += self.grad[i] * an->data[i];
        }
    });
}

Tensor neg(const Tensor& x) {
    return unary_op(x, [](double v) { return -v; }, [](double, double) { return -1.0; });
}

Tensor scale(const Tensor& x, double c) {
    return unary_op(x, [c](double v) { return v * c; }, [c](double, double) { return c; });
}

Tensor add_scalar(const Tensor& x, double c) {
    return unary_op(x, [c](double v) { return v + c; }, [](double, double) { return 1.0; });
}

Tensor relu(const Tensor& x) {
    return unary_op(x, [](double v) { return v > 0.0 ? v : 0.0; },
                    [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor leaky_relu(const Tensor& x, double slope) {
    return unary_op(x, [slope](double v) { return v > 0.0 ? v : slope * v; },
                    [slope](double v, double) { return v > 0.0 ? 1.0 : slope; });
}

Tensor tanh(const Tensor& x) {
    return unary_op(x, [](double v) { return std::tanh(v); },
                    [](double, double y) { return 1.0 - y * y; });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
    if (!(lo <= hi)) throw ParameterError("clamp: lo > hi");
    return unary_op(x, [lo, hi](double v) { return std::min(hi, std::max(lo, v)); },
                    [lo, hi](double v, double) { return (v > lo && v < hi) ? 1.0 : 0.0; });
}

Tensor log_sigmoid(const Tensor& x) {
    // log sigma(x) = min(x,0) - log1p(exp(-|x|)); d/dx = sigma(-x).
    return unary_op(
        x, [](double v) { return std::min(v, 0.0) - std::log1p(std::exp(-std::abs(v))); },
        [](double v, double) { return 1.0 / (1.0 + std::exp(v)); });
}

// ---------------------------------------------------------------------------
// structure
// ---------------------------------------------------------------------------

Tensor reshape(const Tensor& x, Shape shape) {
    if (shape_numel(shape) != x.numel()) {
        throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
    }
    std::vector<double> out(x.data().begin(), x.data().end());
    auto xn = x.node();
    return make_op_result(std::move(shape), std::move(out), {x}, [xn](detail::TensorNode& self) {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) xn->grad[i] += self.grad[i];
    });
}

Tensor transpose2d(const Tensor& x) {
    if (x.rank() != 2) throw DimensionError("transpose2d: expected rank 2, got " + shape_str(x.shape()));
    const std::int64_t m = x.dim(0), n = x.dim(1);
    std::vector<double> out(static_cast<std::size_t>(m * n));
    const auto xd = x.data();
    for (std::int64_t i = 0; i < m; ++i)
        for (std::int64_t j = 0; j < n; ++j) out[j * m + i] = xd[i * n + j];
    auto xn = x.node();
    return make_op_result({n, m}, std::move(out), {x}, [xn, m, n](detail::TensorNode& self) {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        for (std::int64_t i = 0; i < m; ++i)
            for (std::int64_t j = 0; j < n; ++j) xn->grad[i * n + j] += self.grad[j * m + i];
    });
}

Tensor transpose_last2(const Tensor& x) {
    if (x.rank() != 3) throw DimensionError("transpose_last2: expected rank 3, got " + shape_str(x.shape()));
    const std::int64_t B = x.dim(0), m = x.dim(1), n = x.dim(2);
    std::vector<double> out(static_cast<std::size_t>(B * m * n));
    const auto xd = x.data();
    for (std::int64_t b = 0; b < B; ++b) {
        const double* src = xd.data() + b * m * n;
        double* dst = out.data() + b * m * n;
        for (std::int64_t i = 0; i < m; ++i)
            for (std::int64_t j = 0; j < n; ++j) dst[j * m + i] = src[i * n + j];
    }
    auto xn = x.node();
    return make_op_result({B, n, m}, std::move(out), {x}, [xn, B, m, n](detail::TensorNode& self) {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        for (std::int64_t b = 0; b < B; ++b) {
            const double* g = self.grad.data() + b * m * n;
            double* dst = xn->grad.data() + b * m * n;
            for (std::int64_t i = 0; i < m; ++i)
                for (std::int64_t j = 0; j < n; ++j) dst[i * n + j] += g[j * m + i];
        }
    });
}

Tensor concat_axis1(const Tensor& a, const Tensor& b) {
    if (a.rank() != 3 || b.rank() != 3 || a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2)) {
        throw DimensionError("concat_axis1: incompatible " + shape_str(a.shape()) + " and " +
                             shape_str(b.shape()));
    }
    const std::int64_t B = a.dim(0), Ta = a.dim(1), Tb = b.dim(1), d = a.dim(2);
    std::vector<double> out(static_cast<std::size_t>(B * (Ta + Tb) * d));
    for (std::int64_t bb = 0; bb < B; ++bb) {
        std::copy_n(a.data().data() + bb * Ta * d, Ta * d, out.data() + bb * (Ta + Tb) * d);
        std::copy_n(b.data().data() + bb * Tb * d, Tb * d, out.data() + bb * (Ta + Tb) * d + Ta * d);
    }
    auto an = a.node(), bn = b.node();
    return make_op_result({B, Ta + Tb, d}, std::move(out), {a, b},
                          [an, bn, B, Ta, Tb, d](detail::TensorNode& self) {
                              for (std::int64_t bb = 0; bb < B; ++bb) {
                                  const double* g = self.grad.data() + bb * (Ta + Tb) * d;
                                  if (an->requires_grad) {
                                      an->ensure_grad();
                                      double* ga = an->grad.data() + bb * Ta * d;
                                      for (std::int64_t i = 0; i < Ta * d; ++i) ga[i] += g[i];
                                  }
                                  if (bn->requires_grad) {
                                      bn->ensure_grad();
                                      double* gb = bn->grad.data() + bb * Tb * d;
                                      for (std::int64_t i = 0; i < Tb * d; ++i) gb[i] += g[Ta * d + i];
                                  }
                              }
                          });
}

Tensor slice_axis1(const Tensor& x, std::int64_t start, std::int64_t len) {
    if (x.rank() != 3) throw DimensionError("slice_axis1: expected rank 3, got " + shape_str(x.shape()));
    const std::int64_t B = x.dim(0), T = x.dim(1), d = x.dim(2);
    if (start < 0 || len < 0 || start + len > T) throw IndexError("slice_axis1: range out of bounds");
    std::vector<double> out(static_cast<std::size_t>(B * len * d));
    for (std::int64_t b = 0; b < B; ++b)
        std::copy_n(x.data().data() + (b * T + start) * d, len * d, out.data() + b * len * d);
    auto xn = x.node();
    return make_op_result({B, len, d}, std::move(out), {x},
                          [xn, B, T, d, start, len](detail::TensorNode& self) {
                              if (!xn->requires_grad) return;
                              xn->ensure_grad();
                              for (std::int64_t b = 0; b < B; ++b) {
                                  const double* g = self.grad.data() + b * len * d;
                                  double* dst = xn->grad.data() + (b * T + start) * d;
                                  for (std::int64_t i = 0; i < len * d; ++i) dst[i] += g[i];
                              }
                          });
}

Tensor split_heads(const Tensor& x, std::int64_t heads) {
    if (x.rank() != 3) throw DimensionError("split_heads: expected rank 3, got " + shape_str(x.shape()));
    const std::int64_t B = x.dim(0), T = x.dim(1), d = x.dim(2);
    if (heads < 1 || d % heads != 0) throw DimensionError("split_heads: d not divisible by heads");
    const std::int64_t dh = d / heads;
    std::vector<double> out(static_cast<std::size_t>(B * T * d));
    const auto xd = x.data();
    for (std::int64_t b = 0; b < B; ++b)
        for (std::int64_t h = 0; h < heads; ++h)
            for (std::int64_t t = 0; t < T; ++t)
                std::copy_n(xd.data() + (b * T + t) * d + h * dh, dh,
                            out.data() + ((b * heads + h) * T + t) * dh);
    auto xn = x.node();
    return make_op_result({B * heads, T, dh}, std::move(out), {x},
                          [xn, B, T, d, heads, dh](detail::TensorNode& self) {
                              if (!xn->requires_grad) return;
                              xn->ensure_grad();
                              for (std::int64_t b = 0; b < B; ++b)
                                  for (std::int64_t h = 0; h < heads; ++h)
                                      for (std::int64_t t = 0; t < T; ++t) {
                                          const double* g = self.grad.data() + ((b * heads + h) * T + t) * dh;
                                          double* dst = xn->grad.data() + (b * T + t) * d + h * dh;
                                          for (std::int64_t i = 0; i < dh; ++i) dst[i] += g[i];
                                      }
                          });
}

Tensor merge_heads(const Tensor& x, std::int64_t heads) {
    if (x.rank() != 3) throw DimensionError("merge_heads: expected rank 3, got " + shape_str(x.shape()));
    const std::int64_t BH = x.dim(0), T = x.dim(1), dh = x.dim(2);
    if (heads < 1 || BH % heads != 0) throw DimensionError("merge_heads: batch not divisible by heads");
    const std::int64_t B = BH / heads, d = dh * heads;
    std::vector<double> out(static_cast<std::size_t>(B * T * d));
    const auto xd = x.data();
    for (std::int64_t b = 0; b < B; ++b)
        for (std::int64_t h = 0; h < heads; ++h)
            for (std::int64_t t = 0; t < T; ++t)
                std::copy_n(xd.data() + ((b * heads + h) * T + t) * dh, dh,
                            out.data() + (b * T + t) * d + h * dh);
    auto xn = x.node();
    return make_op_result({B, T, d}, std::move(out), {x},
                          [xn, B, T, d, heads, dh](detail::TensorNode& self) {
                              if (!xn->requires_grad) return;
                              xn->ensure_grad();
                              for (std::int64_t b = 0; b < B; ++b)
                                  for (std::int64_t h = 0; h < heads; ++h)
                                      for (std::int64_t t = 0; t < T; ++t) {
                                          const double* g = self.grad.data() + (b * T + t) * d + h * dh;
                                          double* dst = xn->grad.data() + ((b * heads + h) * T + t) * dh;
                                          for (std::int64_t i = 0; i < dh; ++i) dst[i] += g[i];
                                      }
                          });
}

Tensor detach(const Tensor& x) {
    return Tensor(x.shape(), std::vector<double>(x.data().begin(), x.data().end()), false);
}

// ---------------------------------------------------------------------------
// linear algebra
// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() < 2 || b.rank() != 2) {
        throw DimensionError("matmul: need rank>=2 x rank 2, got " + shape_str(a.shape()) + " x " +
                             shape_str(b.shape()));
    }
    const std::int64_t k = a.dim(a.rank() - 1);
    if (k != b.dim(0)) {
        throw DimensionError("matmul: inner dimensions differ, " + shape_str(a.shape()) + " x " +
                             shape_str(b.shape()));
    }
    const std::int64_t m = a.numel() / k;
    const std::int64_t n = b.dim(1);
    std::vector<double> out(static_cast<std::size_t>(m * n), 0.0);
    gemm(false, false, m, n, k, a.data().data(), k, b.data().data(), n, 0.0, out.data());
    Shape out_shape(a.shape().begin(), a.shape().end() - 1);
    out_shape.push_back(n);
    auto an = a.node(), bn = b.node();
    return make_op_result(std::move(out_shape), std::move(out), {a, b},
                          [an, bn, m, n, k](detail::TensorNode& self) {
                              if (an->requires_grad) {
                                  an->ensure_grad();  // dA += dC * B^T
                                  gemm(false, true, m, k, n, self.grad.data(), n, bn->data.data(), n,
                                       1.0, an->grad.data());
                              }
                              if (bn->requires_grad) {
                                  bn->ensure_grad();  // dB += A^T * dC
                                  gemm(true, false, k, n, m, an->data.data(), k, self.grad.data(), n,
                                       1.0, bn->grad.data());
                              }
                          });
}

Tensor bmm(const Tensor& a, const Tensor& b) {
    if (a.rank() != 3 || b.rank() != 3 || a.dim(0) != b.dim(0) || a.dim(2) != b.dim(1)) {
        throw DimensionError("bmm: incompatible " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    }
    const std::int64_t B = a.dim(0), m = a.dim(1), k = a.dim(2), n = b.dim(2);
    std::vector<double> out(static_cast<std::size_t>(B * m * n), 0.0);
    for (std::int64_t i = 0; i < B; ++i) {
        gemm(false, false, m, n, k, a.data().data() + i * m * k, k, b.data().data() + i * k * n, n,
             0.0, out.data() + i * m * n);
    }
    auto an = a.node(), bn = b.node();
    return make_op_result({B, m, n}, std::move(out), {a, b},
                          [an, bn, B, m, n, k](detail::TensorNode& self) {
                              for (std::int64_t i = 0; i < B; ++i) {
                                  const double* g = self.grad.data() + i * m * n;
                                  if (an->requires_grad) {
                                      an->ensure_grad();
                                      gemm(false, true, m, k, n, g, n, bn->data.data() + i * k * n, n,
                                           1.0, an->grad.data() + i * m * k);
                                  }
                                  if (bn->requires_grad) {
                                      bn->ensure_grad();
                                      gemm(true, false, k, n, m, an->data.data() + i * m * k, k, g, n,
                                           1.0, bn->grad.data() + i * k * n);
                                  }
                              }
                          });
}

// ---------------------------------------------------------------------------
// broadcast adds
// ---------------------------------------------------------------------------

Tensor add_bias_last(const Tensor& x, const Tensor& bias) {
    if (bias.rank() != 1 || x.dim(x.rank() - 1) != bias.dim(0)) {
        throw DimensionError("add_bias_last: " + shape_str(x.shape()) + " + " + shape_str(bias.shape()));
    }
    const std::int64_t d = bias.dim(0), rows = x.numel() / d;
    std::vector<double> out(x.data().begin(), x.data().end());
    for (std::int64_t r = 0; r < rows; ++r)
        for (std::int64_t j = 0; j < d; ++j) out[r * d + j] += bias.data()[j];
    auto xn = x.node(), bn = bias.node();
    return make_op_result(x.shape(), std::move(out), {x, bias},
                          [xn, bn, rows, d](detail::TensorNode& self) {
                              if (xn->requires_grad) {
                                  xn->ensure_grad();
                                  for (std::size_t i = 0; i < self.grad.size(); ++i)
                                      xn->grad[i] += self.grad[i];
                              }
                              if (bn->requires_grad) {
                                  bn->ensure_grad();
                                  for (std::int64_t r = 0; r < rows; ++r)
                                      for (std::int64_t j = 0; j < d; ++j)
                                          bn->grad[j] += self.grad[r * d + j];
                              }
                          });
}

Tensor add_bias_channel(const Tensor& x, const Tensor& bias) {
    if (x.rank() != 3 || bias.rank() != 1 || x.dim(1) != bias.dim(0)) {
        throw DimensionError("add_bias_channel: " + shape_str(x.shape()) + " + " + shape_str(bias.shape()));
    }
    const std::int64_t B = x.dim(0), C = x.dim(1), L = x.dim(2);
    std::vector<double> out(x.data().begin(), x.data().end());
    for (std::int64_t b = 0; b < B; ++b)
        for (std::int64_t c = 0; c < C; ++c)
            for (std::int64_t t = 0; t < L; ++t) out[(b * C + c) * L + t] += bias.data()[c];
    auto xn = x.node(), bn = bias.node();
    return make_op_result(x.shape(), std::move(out), {x, bias},
                          [xn, bn, B, C, L](detail::TensorNode& self) {
                              if (xn->requires_grad) {
                                  xn->ensure_grad();
                                  for (std::size_t i = 0; i < self.grad.size(); ++i)
                                      xn->grad[i] += self.grad[i];
                              }
                              if (bn->requires_grad) {
                                  bn->ensure_grad();
                                  for (std::int64_t b = 0; b < B; ++b)
                                      for (std::int64_t c = 0; c < C; ++c)
                                          for (std::int64_t t = 0; t < L; ++t)
                                              bn->grad[c] += self.grad[(b * C + c) * L + t];
                              }
                          });
}

Tensor add_position(const Tensor& x, const Tensor& pos) {
    if (x.rank() != 3 || pos.rank() != 2 || x.dim(1) != pos.dim(0) || x.dim(2) != pos.dim(1)) {
        throw DimensionError("add_position: " + shape_str(x.shape()) + " + " + shape_str(pos.shape()));
    }
    const std::int64_t B = x.dim(0), n = pos.numel();
    std::vector<double> out(x.data().begin(), x.data().end());
    for (std::int64_t b = 0; b < B; ++b)
        for (std::int64_t i = 0; i < n; ++i) out[b * n + i] += pos.data()[i];
    auto xn = x.node(), pn = pos.node();
    return make_op_result(x.shape(), std::move(out), {x, pos}, [xn, pn, B, n](detail::TensorNode& self) {
        if (xn->requires_grad) {
            xn->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) xn->grad[i] += self.grad[i];
        }
        if (pn->requires_grad) {
            pn->ensure_grad();
            for (std::int64_t b = 0; b < B; ++b)
                for (std::int64_t i = 0; i < n; ++i) pn->grad[i] += self.grad[b * n + i];
        }
    });
}

// ---------------------------------------------------------------------------
// convolutions
// ---------------------------------------------------------------------------

namespace {

// col[(ci*k + kk), t] = x[ci, t*stride + kk - pad], zero outside.
void im2col(const double* x, std::int64_t C, std::int64_t L, std::int64_t k, std::int64_t stride,
            std::int64_t pad, std::int64_t Lout, double* col) {
    for (std::int64_t c = 0; c < C; ++c) {
        for (std::int64_t kk = 0; kk < k; ++kk) {
            double* row = col + (c * k + kk) * Lout;
            for (std::int64_t t = 0; t < Lout; ++t) {
                const std::int64_t src = t * stride + kk - pad;
                row[t] = (src >= 0 && src < L) ? x[c * L + src] : 0.0;
            }
        }
    }
}

// Adjoint scatter of im2col.
void col2im_accum(const double* col, std::int64_t C, std::int64_t L, std::int64_t k,
                  std::int64_t stride, std::int64_t pad, std::int64_t Lout, double* x) {
    for (std::int64_t c = 0; c < C; ++c) {
        for (std::int64_t kk = 0; kk < k; ++kk) {
            const double* row = col + (c * k + kk) * Lout;
            for (std::int64_t t = 0; t < Lout; ++t) {
                const std::int64_t dst = t * stride + kk - pad;
                if (dst >= 0 && dst < L) x[c * L + dst] += row[t];
            }
        }
    }
}

}  // namespace

Tensor conv1d(const Tensor& x, const Tensor& w, std::int64_t stride, std::int64_t padding) {
    if (x.rank() != 3 || w.rank() != 3) {
        throw DimensionError("conv1d: expected x[B,Cin,L], w[Cout,Cin,k], got " +
                             shape_str(x.shape()) + ", " + shape_str(w.shape()));
    }
    const std::int64_t B = x.dim(0), Cin = x.dim(1), L = x.dim(2);
    const std::int64_t Cout = w.dim(0), k = w.dim(2);
    if (w.dim(1) != Cin) {
        throw DimensionError("conv1d: channel mismatch " + shape_str(x.shape()) + " vs " +
                             shape_str(w.shape()));
    }
    if (stride < 1 || padding < 0) throw ParameterError("conv1d: stride must be >=1, padding >=0");
    if (L + 2 * padding < k) {
        throw DimensionError("conv1d: kernel " + std::to_string(k) + " larger than padded input " +
                             std::to_string(L + 2 * padding));
    }
    const std::int64_t Lout = (L + 2 * padding - k) / stride + 1;
    std::vector<double> out(static_cast<std::size_t>(B * Cout * Lout), 0.0);
    std::vector<double> col(static_cast<std::size_t>(Cin * k * Lout));
    for (std::int64_t b = 0; b < B; ++b) {
        im2col(x.data().data() + b * Cin * L, Cin, L, k, stride, padding, Lout, col.data());
        gemm(false, false, Cout, Lout, Cin * k, w.data().data(), Cin * k, col.data(), Lout, 0.0,
             out.data() + b * Cout * Lout);
    }
    auto xn = x.node(), wn = w.node();
    return make_op_result(
        {B, Cout, Lout}, std::move(out), {x, w},
        [xn, wn, B, Cin, L, Cout, k, stride, padding, Lout](detail::TensorNode& self) {
            std::vector<double> col(static_cast<std::size_t>(Cin * k * Lout));
            for (std::int64_t b = 0; b < B; ++b) {
                const double* g = self.grad.data() + b * Cout * Lout;
                if (wn->requires_grad) {
                    wn->ensure_grad();  // dW += g * col^T
                    im2col(xn->data.data() + b * Cin * L, Cin, L, k, stride, padding, Lout, col.data());
                    gemm(false, true, Cout, Cin * k, Lout, g, Lout, col.data(), Lout, 1.0,
                         wn->grad.data());
                }
                if (xn->requires_grad) {
                    xn->ensure_grad();  // dcol = W^T * g, then scatter
                    std::fill(col.begin(), col.end(), 0.0);
                    gemm(true, false, Cin * k, Lout, Cout, wn->data.data(), Cin * k, g, Lout, 0.0,
                         col.data());
                    col2im_accum(col.data(), Cin, L, k, stride, padding, Lout,
                                 xn->grad.data() + b * Cin * L);
                }
            }
        });
}

Tensor conv1d_transpose(const Tensor& x, const Tensor& w, std::int64_t stride, std::int64_t padding) {
    if (x.rank() != 3 || w.rank() != 3) {
        throw DimensionError("conv1d_transpose: expected x[B,Cout,L], w[Cout,Cin,k], got " +
                             shape_str(x.shape()) + ", " + shape_str(w.shape()));
    }
    const std::int64_t B = x.dim(0), Cout = x.dim(1), L = x.dim(2);
    const std::int64_t Cin = w.dim(1), k = w.dim(2);
    if (w.dim(0) != Cout) {
        throw DimensionError("conv1d_transpose: channel mismatch " + shape_str(x.shape()) + " vs " +
                             shape_str(w.shape()));
    }
    if (stride < 1 || padding < 0) throw ParameterError("conv1d_transpose: stride must be >=1, padding >=0");
    const std::int64_t Lout = (L - 1) * stride - 2 * padding + k;
    if (Lout < 1) throw DimensionError("conv1d_transpose: output length would be " + std::to_string(Lout));
    std::vector<double> out(static_cast<std::size_t>(B * Cin * Lout), 0.0);
    std::vector<double> col(static_cast<std::size_t>(Cin * k * L));
    for (std::int64_t b = 0; b < B; ++b) {
        std::fill(col.begin(), col.end(), 0.0);
        gemm(true, false, Cin * k, L, Cout, w.data().data(), Cin * k, x.data().data() + b * Cout * L,
             L, 0.0, col.data());
        col2im_accum(col.data(), Cin, Lout, k, stride, padding, L, out.data() + b * Cin * Lout);
    }
    auto xn = x.node(), wn = w.node();
    return make_op_result(
        {B, Cin, Lout}, std::move(out), {x, w},
        [xn, wn, B, Cin, L, Cout, k, stride, padding, Lout](detail::TensorNode& self) {
            std::vector<double> col(static_cast<std::size_t>(Cin * k * L));
            for (std::int64_t b = 0; b < B; ++b) {
                const double* g = self.grad.data() + b * Cin * Lout;
                im2col(g, Cin, Lout, k, stride, padding, L, col.data());
                if (xn->requires_grad) {
                    xn->ensure_grad();  // dx += W * im2col(g)
                    gemm(false, false, Cout, L, Cin * k, wn->data.data(), Cin * k, col.data(), L, 1.0,
                         xn->grad.data() + b * Cout * L);
                }
                if (wn->requires_grad) {
                    wn->ensure_grad();  // dW += x * im2col(g)^T
                    gemm(false, true, Cout, Cin * k, L, xn->data.data() + b * Cout * L, L, col.data(),
                         L, 1.0, wn->grad.data());
                }
            }
        });
}

// ---------------------------------------------------------------------------
// normalization / attention pieces
// ---------------------------------------------------------------------------

Tensor layernorm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
    if (!(eps > 0.0)) throw ParameterError("layernorm: eps must be positive");
    const std::int64_t d = x.dim(x.rank() - 1);
    if (gain.rank() != 1 || bias.rank() != 1 || gain.dim(0) != d || bias.dim(0) != d) {
        throw DimensionError("layernorm: gain/bias " + shape_str(gain.shape()) + "/" +
                             shape_str(bias.shape()) + " do not match last axis of " +
                             shape_str(x.shape()));
    }
    const std::int64_t rows = x.numel() / d;
    std::vector<double> out(static_cast<std::size_t>(rows * d));
    std::vector<double> inv_sigma(static_cast<std::size_t>(rows));
    for (std::int64_t r = 0; r < rows; ++r) {
        const double* xr = x.data().data() + r * d;
        double mu = 0.0;
        for (std::int64_t j = 0; j < d; ++j) mu += xr[j];
        mu /= static_cast<double>(d);
        double var = 0.0;
        for (std::int64_t j = 0; j < d; ++j) var += (xr[j] - mu) * (xr[j] - mu);
        var /= static_cast<double>(d);
        const double is = 1.0 / std::sqrt(var + eps);
        inv_sigma[static_cast<std::size_t>(r)] = is;
        for (std::int64_t j = 0; j < d; ++j)
            out[r * d + j] = gain.data()[j] * (xr[j] - mu) * is + bias.data()[j];
    }
    auto xn = x.node(), gn = gain.node(), bn = bias.node();
    return make_op_result(
        x.shape(), std::move(out), {x, gain, bias},
        [xn, gn, bn, rows, d, inv_sigma = std::move(inv_sigma)](detail::TensorNode& self) {
            for (std::int64_t r = 0; r < rows; ++r) {
                const double* xr = xn->data.data() + r * d;
                const double* gy = self.grad.data() + r * d;
                const double is = inv_sigma[static_cast<std::size_t>(r)];
                double mu = 0.0;
                for (std::int64_t j = 0; j < d; ++j) mu += xr[j];
                mu /= static_cast<double>(d);
                if (gn->requires_grad || bn->requires_grad) {
                    if (gn->requires_grad) gn->ensure_grad();
                    if (bn->requires_grad) bn->ensure_grad();
                    for (std::int64_t j = 0; j < d; ++j) {
                        if (gn->requires_grad) gn->grad[j] += gy[j] * (xr[j] - mu) * is;
                        if (bn->requires_grad) bn->grad[j] += gy[j];
                    }
                }
                if (xn->requires_grad) {
                    xn->ensure_grad();
                    // dx = is * (dxhat - mean(dxhat) - xhat * mean(dxhat * xhat))
                    double s1 = 0.0, s2 = 0.0;
                    for (std::int64_t j = 0; j < d; ++j) {
                        const double dxh = gy[j] * gn->data[j];
                        const double xh = (xr[j] - mu) * is;
                        s1 += dxh;
                        s2 += dxh * xh;
                    }
                    s1 /= static_cast<double>(d);
                    s2 /= static_cast<double>(d);
                    double* gx = xn->grad.data() + r * d;
                    for (std::int64_t j = 0; j < d; ++j) {
                        const double dxh = gy[j] * gn->data[j];
                        const double xh = (xr[j] - mu) * is;
                        gx[j] += is * (dxh - s1 - xh * s2);
                    }
                }
            }
        });
}

namespace {

// Shared softmax kernel; `limit(row) = count of allowed leading entries`.
Tensor softmax_impl(const Tensor& x, std::function<std::int64_t(std::int64_t)> limit,
                    std::int64_t row_len, std::int64_t rows) {
    std::vector<double> out(static_cast<std::size_t>(rows * row_len), 0.0);
    const auto xd = x.data();
    for (std::int64_t r = 0; r < rows; ++r) {
        const std::int64_t lim = limit(r);
        const double* xr = xd.data() + r * row_len;
        double* yr = out.data() + r * row_len;
        double mx = xr[0];
        for (std::int64_t j = 1; j < lim; ++j) mx = std::max(mx, xr[j]);
        double z = 0.0;
        for (std::int64_t j = 0; j < lim; ++j) {
            yr[j] = std::exp(xr[j] - mx);
            z += yr[j];
        }
        for (std::int64_t j = 0; j < lim; ++j) yr[j] /= z;
    }
    auto xn = x.node();
    return make_op_result(x.shape(), std::move(out), {x},
                          [xn, limit, rows, row_len](detail::TensorNode& self) {
                              if (!xn->requires_grad) return;
                              xn->ensure_grad();
                              for (std::int64_t r = 0; r < rows; ++r) {
                                  const std::int64_t lim = limit(r);
                                  const double* p = self.data.data() + r * row_len;
                                  const double* gy = self.grad.data() + r * row_len;
                                  double dot = 0.0;
                                  for (std::int64_t j = 0; j < lim; ++j) dot += p[j] * gy[j];
                                  double* gx = xn->grad.data() + r * row_len;
                                  for (std::int64_t j = 0; j < lim; ++j)
                                      gx[j] += p[j] * (gy[j] - dot);
                              }
                          });
}

}  // namespace

Tensor softmax_last(const Tensor& x) {
    const std::int64_t d = x.dim(x.rank() - 1);
    const std::int64_t rows = x.numel() / d;
    return softmax_impl(x, [d](std::int64_t) { return d; }, d, rows);
}

Tensor softmax_causal(const Tensor& x) {
    if (x.rank() != 3) throw DimensionError("softmax_causal: expected [B,Tq,Tk], got " + shape_str(x.shape()));
    const std::int64_t Tq = x.dim(1), Tk = x.dim(2);
    if (Tk < Tq) throw DimensionError("softmax_causal: Tk < Tq");
    const std::int64_t offset = Tk - Tq;
    const std::int64_t rows = x.dim(0) * Tq;
    return softmax_impl(
        x, [Tq, Tk, offset](std::int64_t r) { return (r % Tq) + 1 + offset; }, Tk, rows);
}

Tensor l2norm_rows(const Tensor& x, double eps) {
    if (x.rank() != 2) throw DimensionError("l2norm_rows: expected rank 2, got " + shape_str(x.shape()));
    const std::int64_t n = x.dim(0), d = x.dim(1);
    std::vector<double> out(static_cast<std::size_t>(n * d));
    std::vector<double> norms(static_cast<std::size_t>(n));
    for (std::int64_t r = 0; r < n; ++r) {
        const double* xr = x.data().data() + r * d;
        double s = 0.0;
        for (std::int64_t j = 0; j < d; ++j) s += xr[j] * xr[j];
        const double nr = std::sqrt(s);
        norms[static_cast<std::size_t>(r)] = nr;
        const double inv = 1.0 / (nr + eps);
        for (std::int64_t j = 0; j < d; ++j) out[r * d + j] = xr[j] * inv;
    }
    auto xn = x.node();
    return make_op_result(x.shape(), std::move(out), {x},
                          [xn, n, d, eps, norms = std::move(norms)](detail::TensorNode& self) {
                              if (!xn->requires_grad) return;
                              xn->ensure_grad();
                              for (std::int64_t r = 0; r < n; ++r) {
                                  const double nr = norms[static_cast<std::size_t>(r)];
                                  const double inv = 1.0 / (nr + eps);
                                  const double* xr = xn->data.data() + r * d;
                                  const double* gy = self.grad.data() + r * d;
                                  double dot = 0.0;
                                  for (std::int64_t j = 0; j < d; ++j) dot += xr[j] * gy[j];
                                  double* gx = xn->grad.data() + r * d;
                                  const double c = (nr > 1e-300) ? dot * inv * inv / nr : 0.0;
                                  for (std::int64_t j = 0; j < d; ++j)
                                      gx[j] += gy[j] * inv - xr[j] * c;
                              }
                          });
}

// ---------------------------------------------------------------------------
// reductions & losses
// ---------------------------------------------------------------------------

Tensor sum(const Tensor& x) {
    double s = 0.0;
    for (double v : x.data()) s += v;
    auto xn = x.node();
    return make_op_result({1}, {s}, {x}, [xn](detail::TensorNode& self) {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        const double g = self.grad[0];
        for (double& gv : xn->grad) gv += g;
    });
}

Tensor mean(const Tensor& x) {
    const double inv = 1.0 / static_cast<double>(x.numel());
    double s = 0.0;
    for (double v : x.data()) s += v;
    auto xn = x.node();
    return make_op_result({1}, {s * inv}, {x}, [xn, inv](detail::TensorNode& self) {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        const double g = self.grad[0] * inv;
        for (double& gv : xn->grad) gv += g;
    });
}

Tensor mean_squared_error(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mean_squared_error");
    const double inv = 1.0 / static_cast<double>(a.numel());
    double s = 0.0;
    for (std::size_t i = 0; i < a.data().size(); ++i) {
        const double e = a.data()[i] - b.data()[i];
        s += e * e;
    }
    auto an = a.node(), bn = b.node();
    return make_op_result({1}, {s * inv}, {a, b}, [an, bn, inv](detail::TensorNode& self) {
        const double g = 2.0 * self.grad[0] * inv;
        if (an->requires_grad) {
            an->ensure_grad();
            for (std::size_t i = 0; i < an->data.size(); ++i)
                an->grad[i] += g * (an->data[i] - bn->data[i]);
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (std::size_t i = 0; i < bn->data.size(); ++i)
                bn->grad[i] -= g * (an->data[i] - bn->data[i]);
        }
    });
}

Tensor softmax_cross_entropy(const Tensor& logits, std::span<const std::int64_t> targets) {
    const std::int64_t K = logits.dim(logits.rank() - 1);
    const std::int64_t n = logits.numel() / K;
    if (static_cast<std::int64_t>(targets.size()) != n) {
        throw DimensionError("softmax_cross_entropy: " + std::to_string(targets.size()) +
                             " targets for " + std::to_string(n) + " rows");
    }
    for (std::int64_t t : targets) {
        if (t < 0 || t >= K)
            throw IndexError("softmax_cross_entropy: target index " + std::to_string(t) +
                             " outside [0," + std::to_string(K) + ")");
    }
    double total = 0.0;
    const auto ld = logits.data();
    for (std::int64_t r = 0; r < n; ++r) {
        const double* lr = ld.data() + r * K;
        double mx = lr[0];
        for (std::int64_t j = 1; j < K; ++j) mx = std::max(mx, lr[j]);
        double z = 0.0;
        for (std::int64_t j = 0; j < K; ++j) z += std::exp(lr[j] - mx);
        total += mx + std::log(z) - lr[targets[r]];
    }
    auto ln = logits.node();
    std::vector<std::int64_t> tgt(targets.begin(), targets.end());
    return make_op_result({1}, {total / static_cast<double>(n)}, {logits},
                          [ln, n, K, tgt = std::move(tgt)](detail::TensorNode& self) {
                              if (!ln->requires_grad) return;
                              ln->ensure_grad();
                              const double g = self.grad[0] / static_cast<double>(n);
                              for (std::int64_t r = 0; r < n; ++r) {
                                  const double* lr = ln->data.data() + r * K;
                                  double mx = lr[0];
                                  for (std::int64_t j = 1; j < K; ++j) mx = std::max(mx, lr[j]);
                                  double z = 0.0;
                                  for (std::int64_t j = 0; j < K; ++j) z += std::exp(lr[j] - mx);
                                  double* gr = ln->grad.data() + r * K;
                                  for (std::int64_t j = 0; j < K; ++j)
                                      gr[j] += g * std::exp(lr[j] - mx) / z;
                                  gr[tgt[r]] -= g;
                              }
                          });
}

// ---------------------------------------------------------------------------
// lookup / stochastic
// ---------------------------------------------------------------------------

Tensor embedding(const Tensor& table, std::span<const std::int64_t> indices, Shape out_leading) {
    if (table.rank() != 2) throw DimensionError("embedding: table must be rank 2");
    const std::int64_t V = table.dim(0), d = table.dim(1);
    for (std::int64_t idx : indices) {
        if (idx < 0 || idx >= V)
            throw IndexError("embedding: index " + std::to_string(idx) + " outside [0," +
                             std::to_string(V) + ")");
    }
    const std::int64_t n = static_cast<std::int64_t>(indices.size());
    Shape out_shape = out_leading.empty() ? Shape{n} : out_leading;
    if (shape_numel(out_shape) != n) throw DimensionError("embedding: leading shape does not match index count");
    out_shape.push_back(d);
    std::vector<double> out(static_cast<std::size_t>(n * d));
    for (std::int64_t r = 0; r < n; ++r)
        std::copy_n(table.data().data() + indices[r] * d, d, out.data() + r * d);
    auto tn = table.node();
    std::vector<std::int64_t> idxs(indices.begin(), indices.end());
    return make_op_result(std::move(out_shape), std::move(out), {table},
                          [tn, d, idxs = std::move(idxs)](detail::TensorNode& self) {
                              if (!tn->requires_grad) return;
                              tn->ensure_grad();
                              for (std::size_t r = 0; r < idxs.size(); ++r) {
                                  const double* g = self.grad.data() + r * d;
                                  double* dst = tn->grad.data() + idxs[r] * d;
                                  for (std::int64_t j = 0; j < d; ++j) dst[j] += g[j];
                              }
                          });
}

Tensor dropout(const Tensor& x, double rate, bool train, Rng& rng) {
    if (rate < 0.0 || rate >= 1.0) throw ParameterError("dropout: rate must be in [0,1)");
    if (!train || rate == 0.0) return x;
    const double keep = 1.0 - rate;
    std::vector<double> mask(x.data().size());
    for (double& m : mask) m = rng.bernoulli(rate) ? 0.0 : 1.0 / keep;
    std::vector<double> out(x.data().size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] * mask[i];
    auto xn = x.node();
    return make_op_result(x.shape(), std::move(out), {x},
                          [xn, mask = std::move(mask)](detail::TensorNode& self) {
                              if (!xn->requires_grad) return;
                              xn->ensure_grad();
                              for (std::size_t i = 0; i < self.grad.size(); ++i)
                                  xn->grad[i] += self.grad[i] * mask[i];
                          });
}

}  // namespace hdt
