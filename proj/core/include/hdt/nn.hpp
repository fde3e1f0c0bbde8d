#pragma once

#include <string>
#include <vector>

#include "hdt/rng.hpp"
#include "hdt/tensor.hpp"

namespace hdt {

// A named trainable tensor. Names are '.'-separated paths, unique per model,
// e.g. "stage1.target.encoder.conv0.weight".
struct Parameter {
    std::string name;
    Tensor value;
};

// Flat, ordered parameter collection. Order is construction order and is the
// canonical iteration order for the optimizer and the checkpoint writer.
class ParamGroup {
public:
    Tensor& add(const std::string& name, Tensor t);
    Parameter& at(const std::string& name);
    const std::vector<Parameter>& all() const { return params_; }
    std::vector<Parameter>& all() { return params_; }
    std::int64_t total_size() const;
    void append(ParamGroup&& other);

private:
    std::vector<Parameter> params_;
};

// --- layers -----------------------------------------------------------------
// Layers register their tensors into a ParamGroup under a name prefix at
// construction and hold handles; forward() builds tape ops.

class Linear {
public:
    Linear() = default;
    Linear(ParamGroup& pg, const std::string& prefix, std::int64_t in, std::int64_t out, Rng& rng);
    Tensor forward(const Tensor& x) const;  // [...,in] -> [...,out]

private:
    Tensor w_, b_;
};

class Conv1d {
public:
    Conv1d() = default;
    Conv1d(ParamGroup& pg, const std::string& prefix, std::int64_t in_ch, std::int64_t out_ch,
           std::int64_t kernel, std::int64_t stride, std::int64_t padding, Rng& rng);
    Tensor forward(const Tensor& x) const;  // [B,Cin,L] -> [B,Cout,Lout]
    static std::int64_t out_len(std::int64_t len, std::int64_t kernel, std::int64_t stride,
                                std::int64_t padding);

private:
    Tensor w_, b_;
    std::int64_t stride_ = 1, padding_ = 0;
};

class ConvTranspose1d {
public:
    ConvTranspose1d() = default;
    ConvTranspose1d(ParamGroup& pg, const std::string& prefix, std::int64_t in_ch,
                    std::int64_t out_ch, std::int64_t kernel, std::int64_t stride,
                    std::int64_t padding, Rng& rng);
    Tensor forward(const Tensor& x) const;  // [B,Cin,L] -> [B,Cout,Lout]
    const Tensor& weight() const { return w_; }
    static std::int64_t out_len(std::int64_t len, std::int64_t kernel, std::int64_t stride,
                                std::int64_t padding);

private:
    Tensor w_, b_;
    std::int64_t stride_ = 1, padding_ = 0;
};

class LayerNorm {
public:
    LayerNorm() = default;
    LayerNorm(ParamGroup& pg, const std::string& prefix, std::int64_t dim, double eps = 1e-5);
    Tensor forward(const Tensor& x) const;  // normalizes the last axis

private:
    Tensor gain_, bias_;
    double eps_ = 1e-5;
};

class Embedding {
public:
    Embedding() = default;
    Embedding(ParamGroup& pg, const std::string& prefix, std::int64_t rows, std::int64_t dim, Rng& rng);
    Tensor forward(std::span<const std::int64_t> indices, Shape out_leading = {}) const;
    const Tensor& table() const { return table_; }
    std::int64_t rows() const { return table_.dim(0); }

private:
    Tensor table_;
};

// Multi-head attention over batched sequences. Query/key/value projections,
// scaled dot-product with optional causal masking, output projection.
class MultiHeadAttention {
public:
    MultiHeadAttention() = default;
    MultiHeadAttention(ParamGroup& pg, const std::string& prefix, std::int64_t dim,
                       std::int64_t heads, Rng& rng);
    // q_in: [B,Tq,d], kv_in: [B,Tk,d]. Causal restricts query i to keys
    // j <= i + (Tk-Tq). Dropout acts on the attention weights while training.
    Tensor forward(const Tensor& q_in, const Tensor& kv_in, bool causal, double dropout_rate,
                   bool train, Rng& rng) const;
    std::int64_t heads() const { return heads_; }

private:
    Linear wq_, wk_, wv_, wo_;
    std::int64_t dim_ = 0, heads_ = 1;
};

}  // namespace hdt
