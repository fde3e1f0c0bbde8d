#include "hdt/nn.hpp"

#include <cmath>

namespace hdt {

Tensor& ParamGroup::add(const std::string& name, Tensor t) {
    for (const auto& p : params_) {
        if (p.name == name) throw ConfigurationError("duplicate parameter name: " + name);
    }
    params_.push_back({name, std::move(t)});
    return params_.back().value;
}

Parameter& ParamGroup::at(const std::string& name) {
    for (auto& p : params_) {
        if (p.name == name) return p;
    }
    throw ConfigurationError("unknown parameter: " + name);
}

std::int64_t ParamGroup::total_size() const {
    std::int64_t n = 0;
    for (const auto& p : params_) n += p.value.numel();
    return n;
}

void ParamGroup::append(ParamGroup&& other) {
    for (auto& p : other.params_) add(p.name, std::move(p.value));
}

namespace {

// Uniform +-1/sqrt(fan_in), the usual default for linear/conv stacks.
Tensor init_fan_in(Shape shape, std::int64_t fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    return Tensor::rand_uniform(std::move(shape), rng, -bound, bound, true);
}

}  // namespace

Linear::Linear(ParamGroup& pg, const std::string& prefix, std::int64_t in, std::int64_t out, Rng& rng)
    : w_(pg.add(prefix + ".weight", init_fan_in({in, out}, in, rng))),
      b_(pg.add(prefix + ".bias", Tensor::zeros({out}, true))) {}

Tensor Linear::forward(const Tensor& x) const { return add_bias_last(matmul(x, w_), b_); }

std::int64_t Conv1d::out_len(std::int64_t len, std::int64_t kernel, std::int64_t stride,
                             std::int64_t padding) {
    return (len + 2 * padding - kernel) / stride + 1;
}

Conv1d::Conv1d(ParamGroup& pg, const std::string& prefix, std::int64_t in_ch, std::int64_t out_ch,
               std::int64_t kernel, std::int64_t stride, std::int64_t padding, Rng& rng)
    : w_(pg.add(prefix + ".weight", init_fan_in({out_ch, in_ch, kernel}, in_ch * kernel, rng))),
      b_(pg.add(prefix + ".bias", Tensor::zeros({out_ch}, true))),
      stride_(stride),
      padding_(padding) {}

Tensor Conv1d::forward(const Tensor& x) const {
    return add_bias_channel(conv1d(x, w_, stride_, padding_), b_);
}

std::int64_t ConvTranspose1d::out_len(std::int64_t len, std::int64_t kernel, std::int64_t stride,
                                      std::int64_t padding) {
    return (len - 1) * stride - 2 * padding + kernel;
}

ConvTranspose1d::ConvTranspose1d(ParamGroup& pg, const std::string& prefix, std::int64_t in_ch,
                                 std::int64_t out_ch, std::int64_t kernel, std::int64_t stride,
                                 std::int64_t padding, Rng& rng)
    : w_(pg.add(prefix + ".weight", init_fan_in({in_ch, out_ch, kernel}, in_ch * kernel, rng))),
      b_(pg.add(prefix + ".bias", Tensor::zeros({out_ch}, true))),
      stride_(stride),
      padding_(padding) {}

Tensor ConvTranspose1d::forward(const Tensor& x) const {
    return add_bias_channel(conv1d_transpose(x, w_, stride_, padding_), b_);
}

LayerNorm::LayerNorm(ParamGroup& pg, const std::string& prefix, std::int64_t dim, double eps)
    : gain_(pg.add(prefix + ".gain", Tensor::full({dim}, 1.0, true))),
      bias_(pg.add(prefix + ".bias", Tensor::zeros({dim}, true))),
      eps_(eps) {}

Tensor LayerNorm::forward(const Tensor& x) const { return layernorm(x, gain_, bias_, eps_); }

Embedding::Embedding(ParamGroup& pg, const std::string& prefix, std::int64_t rows, std::int64_t dim,
                     Rng& rng)
    : table_(pg.add(prefix + ".table",
                    Tensor::rand_normal({rows, dim}, rng, 0.0, 0.02, true))) {}

Tensor Embedding::forward(std::span<const std::int64_t> indices, Shape out_leading) const {
    return embedding(table_, indices, std::move(out_leading));
}

MultiHeadAttention::MultiHeadAttention(ParamGroup& pg, const std::string& prefix, std::int64_t dim,
                                       std::int64_t heads, Rng& rng)
    : wq_(pg, prefix + ".q", dim, dim, rng),
      wk_(pg, prefix + ".k", dim, dim, rng),
      wv_(pg, prefix + ".v", dim, dim, rng),
      wo_(pg, prefix + ".o", dim, dim, rng),
      dim_(dim),
      heads_(heads) {
    if (dim % heads != 0) throw ConfigurationError("attention dim not divisible by head count");
}

Tensor MultiHeadAttention::forward(const Tensor& q_in, const Tensor& kv_in, bool causal,
                                   double dropout_rate, bool train, Rng& rng) const {
    const std::int64_t dh = dim_ / heads_;
    Tensor q = split_heads(wq_.forward(q_in), heads_);
    Tensor k = split_heads(wk_.forward(kv_in), heads_);
    Tensor v = split_heads(wv_.forward(kv_in), heads_);
    Tensor scores = scale(bmm(q, transpose_last2(k)), 1.0 / std::sqrt(static_cast<double>(dh)));
    Tensor weights = causal ? softmax_causal(scores) : softmax_last(scores);
    weights = dropout(weights, dropout_rate, train, rng);
    Tensor ctx = merge_heads(bmm(weights, v), heads_);
    return wo_.forward(ctx);
}

}  // namespace hdt
