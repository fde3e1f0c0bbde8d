#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "hdt/errors.hpp"
#include "hdt/rng.hpp"

namespace hdt {

using Shape = std::vector<std::int64_t>;

std::string shape_str(const Shape& s);
std::int64_t shape_numel(const Shape& s);

namespace detail {

struct TensorNode {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // allocated lazily; kept for leaves, freed for interior nodes
    bool requires_grad = false;
    bool is_leaf = true;
    std::vector<std::shared_ptr<TensorNode>> parents;
    std::function<void(TensorNode&)> backward_fn;

    std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    }
};

}  // namespace detail

// Thread-local switch: while disabled, ops compute values but record no tape.
class GradMode {
public:
    static bool enabled();
    static void set_enabled(bool on);
};

class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

// Value-semantic handle onto a tape node. Data is written once at
// construction; the only post-hoc mutation is an in-place parameter update
// between training steps (see Adam).
class Tensor {
public:
    Tensor() = default;
    Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);
    static Tensor rand_uniform(Shape shape, Rng& rng, double lo, double hi, bool requires_grad = false);
    static Tensor rand_normal(Shape shape, Rng& rng, double mean, double sigma, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::int64_t numel() const { return node_->numel(); }
    std::int64_t dim(std::size_t axis) const { return node_->shape.at(axis); }
    std::size_t rank() const { return node_->shape.size(); }

    std::span<const double> data() const { return node_->data; }
    std::span<double> mutable_data() { return node_->data; }
    std::span<const double> grad() const { return node_->grad; }
    bool has_grad() const { return !node_->grad.empty(); }
    bool requires_grad() const { return node_->requires_grad; }

    double item() const;
    double at(std::initializer_list<std::int64_t> idx) const;

    void zero_grad();
    void accumulate_grad(std::span<const double> g);

    // Runs reverse-mode accumulation from this scalar into every reachable
    // leaf that requires grad. Interior grad buffers are freed as soon as
    // they have been consumed.
    void backward() const;

    std::shared_ptr<detail::TensorNode> node() const { return node_; }

private:
    std::shared_ptr<detail::TensorNode> node_;
};

// Builds a tape node from precomputed forward data. `backward_fn` reads the
// node's grad (and data, if needed) and accumulates into the parents' grads.
// Records nothing when grad mode is off or no input requires grad.
Tensor make_op_result(Shape shape, std::vector<double> data, std::vector<Tensor> inputs,
                      std::function<void(detail::TensorNode&)> backward_fn);

// --- elementwise ---
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& x);
Tensor scale(const Tensor& x, double c);
Tensor add_scalar(const Tensor& x, double c);
Tensor relu(const Tensor& x);
Tensor leaky_relu(const Tensor& x, double slope);
Tensor tanh(const Tensor& x);
Tensor clamp(const Tensor& x, double lo, double hi);
Tensor log_sigmoid(const Tensor& x);

// --- structure ---
Tensor reshape(const Tensor& x, Shape shape);
Tensor transpose2d(const Tensor& x);
Tensor transpose_last2(const Tensor& x);
Tensor concat_axis1(const Tensor& a, const Tensor& b);     // [B,Ta,d] + [B,Tb,d]
Tensor slice_axis1(const Tensor& x, std::int64_t start, std::int64_t len);
Tensor split_heads(const Tensor& x, std::int64_t heads);   // [B,T,d] -> [B*H,T,d/H]
Tensor merge_heads(const Tensor& x, std::int64_t heads);   // [B*H,T,dh] -> [B,T,H*dh]
Tensor detach(const Tensor& x);

// --- linear algebra ---
// a: rank >= 2 (leading dims flattened to rows), b: [k,n].
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor bmm(const Tensor& a, const Tensor& b);              // [B,m,k] x [B,k,n]

// --- broadcast adds ---
Tensor add_bias_last(const Tensor& x, const Tensor& bias);     // [...,d] + [d]
Tensor add_bias_channel(const Tensor& x, const Tensor& bias);  // [B,C,L] + [C]
Tensor add_position(const Tensor& x, const Tensor& pos);       // [B,T,d] + [T,d]

// --- convolutions (channels-first, batched) ---
// x: [B,Cin,L], w: [Cout,Cin,k] -> [B,Cout,Lout], Lout = (L+2p-k)/s + 1.
Tensor conv1d(const Tensor& x, const Tensor& w, std::int64_t stride, std::int64_t padding);
// Adjoint of conv1d under the same weight: x: [B,Cout,L], w: [Cout,Cin,k]
// -> [B,Cin,Lout], Lout = (L-1)*s - 2p + k.
Tensor conv1d_transpose(const Tensor& x, const Tensor& w, std::int64_t stride, std::int64_t padding);

// --- normalization / attention pieces ---
Tensor layernorm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps);
Tensor softmax_last(const Tensor& x);
// Softmax over the last axis of [B,Tq,Tk] where query row i may only attend
// to keys j <= i + (Tk - Tq); standard causal masking when Tq == Tk.
Tensor softmax_causal(const Tensor& x);
Tensor l2norm_rows(const Tensor& x, double eps = 1e-8);

// --- reductions & losses ---
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor mean_squared_error(const Tensor& a, const Tensor& b);
// logits: [...,K] flattened to rows; one target index per row.
Tensor softmax_cross_entropy(const Tensor& logits, std::span<const std::int64_t> targets);

// --- lookup / stochastic ---
Tensor embedding(const Tensor& table, std::span<const std::int64_t> indices, Shape out_leading = {});
Tensor dropout(const Tensor& x, double rate, bool train, Rng& rng);

}  // namespace hdt
