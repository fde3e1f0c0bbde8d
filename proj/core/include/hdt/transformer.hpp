#pragma once

#include <functional>
#include <string>
#include <vector>

#include "hdt/checkpoint.hpp"
#include "hdt/nn.hpp"
#include "hdt/optim.hpp"
#include "hdt/vq.hpp"

namespace hdt {

struct Stage2Config {
    std::int64_t variates = 4;        // D
    std::int64_t history_len = 96;    // h
    std::int64_t token_len = 24;      // s = tau/2
    std::int64_t model_dim = 64;      // n_z; must equal the stage-1 code dim
    std::int64_t codebook_target = 128;  // K_t
    std::int64_t codebook_down = 128;    // K_d
    std::int64_t enc_layers = 2;
    std::int64_t base_layers = 3;
    std::int64_t selfcond_layers = 4;
    std::int64_t heads = 4;
    double dropout = 0.1;
    bool use_self_condition = true;  // false = the no-selfcond ablation variant

    void validate() const;
};

// Pre-layernorm residual encoder block: self-attention then MLP.
struct EncoderBlock {
    LayerNorm ln1, ln2;
    MultiHeadAttention attn;
    Linear mlp1, mlp2;

    EncoderBlock() = default;
    EncoderBlock(ParamGroup& pg, const std::string& prefix, std::int64_t dim, std::int64_t heads, Rng& rng);
    Tensor forward(const Tensor& x, double dropout_rate, bool train, Rng& rng) const;
};

// Pre-layernorm residual decoder block: causal self-attention, cross-attention
// over the encoded history, optionally cross-attention over the embedded
// self-condition tokens, then MLP.
struct DecoderBlock {
    LayerNorm ln1, ln2, ln3, ln4;
    MultiHeadAttention self_attn, cross_hist, cross_cond;
    Linear mlp1, mlp2;
    bool with_cond = false;

    DecoderBlock() = default;
    DecoderBlock(ParamGroup& pg, const std::string& prefix, std::int64_t dim, std::int64_t heads,
                 bool with_cond, Rng& rng);
    Tensor forward(const Tensor& x, const Tensor& hist, const Tensor* cond, double dropout_rate,
                   bool train, Rng& rng) const;
};

// E_T: projects the raw history into model space, adds a learned positional
// table, and runs the encoder stack. Output H_p is [B, h, n_z].
class ContextEncoder {
public:
    ContextEncoder() = default;
    ContextEncoder(ParamGroup& pg, const Stage2Config& cfg, Rng& rng);
    Tensor forward(const Tensor& context, bool train, Rng& rng) const;  // [B,h,D] -> [B,h,n_z]

private:
    Linear in_proj_;
    Tensor pos_;
    std::vector<EncoderBlock> blocks_;
    const Stage2Config* cfg_ = nullptr;
};

// B: causal decoder over downsampled-target tokens with a learnable BOS row
// (index K_d in the embedding table).
class BaseDecoder {
public:
    BaseDecoder() = default;
    BaseDecoder(ParamGroup& pg, const Stage2Config& cfg, Rng& rng);

    // tokens_in: [B x len] row-major token ids (BOS id = K_d allowed).
    // Returns logits [B, len, K_d].
    Tensor logits(const Tensor& h_p, std::span<const std::int64_t> tokens_in, std::int64_t batch,
                  std::int64_t len, bool train, Rng& rng) const;
    std::int64_t bos_id() const { return cfg_->codebook_down; }

private:
    Embedding tok_;
    Tensor pos_;
    std::vector<DecoderBlock> blocks_;
    Linear head_;
    const Stage2Config* cfg_ = nullptr;
};

// S: causal decoder over target tokens with two frozen conditioning paths,
// the encoded history and the embedded downsampled-token sequence.
class SelfCondDecoder {
public:
    SelfCondDecoder() = default;
    SelfCondDecoder(ParamGroup& pg, const Stage2Config& cfg, Rng& rng);

    // cond_tokens: [B x token_len] downsampled tokens (no BOS); ignored when
    // the self-condition path is disabled.
    Tensor logits(const Tensor& h_p, std::span<const std::int64_t> cond_tokens,
                  std::span<const std::int64_t> tokens_in, std::int64_t batch, std::int64_t len,
                  bool train, Rng& rng) const;
    Tensor embed_cond(std::span<const std::int64_t> cond_tokens, std::int64_t batch) const;
    std::int64_t bos_id() const { return cfg_->codebook_target; }

private:
    Embedding tok_;
    Tensor pos_;
    Embedding cond_tok_;
    Tensor cond_pos_;
    std::vector<DecoderBlock> blocks_;
    Linear head_;
    const Stage2Config* cfg_ = nullptr;
};

// Teacher-forced negative log-likelihoods (mean nats per token).
Tensor base_nll(const ContextEncoder& enc, const BaseDecoder& base, const Tensor& contexts,
                const std::vector<TokenSequence>& s_down, bool train, Rng& rng);
// h_p must already be detached/frozen by the caller (computed under NoGrad).
Tensor selfcond_nll(const SelfCondDecoder& self, const Tensor& h_p_frozen,
                    const std::vector<TokenSequence>& s_down, const std::vector<TokenSequence>& s_pred,
                    bool train, Rng& rng);

enum class CondSource { ground_truth, generated };

struct Stage2TrainConfig {
    Stage2Config model;
    std::int64_t steps_phase1 = 2000;
    std::int64_t steps_phase2 = 2000;
    std::int64_t batch = 32;
    double lr = 1e-3;
    std::uint64_t seed = 1;
    CondSource selfcond_source = CondSource::ground_truth;
    std::int64_t checkpoint_every = 500;
};

struct Stage2LossRow {
    std::int64_t phase = 1;
    std::int64_t step = 0;
    double nll = 0.0;
};

struct Stage2Model {
    Stage2Config cfg;
    ParamGroup low_params;   // E_T and B, trained in phase 1
    ParamGroup high_params;  // S, trained in phase 2
    ContextEncoder encoder;
    BaseDecoder base;
    SelfCondDecoder selfcond;
    Adam low_opt;
    Adam high_opt;
    std::int64_t phase = 0;  // 0 = fresh, 1 = phase 1 done, 2 = both done
    std::int64_t step_phase1 = 0, step_phase2 = 0;

    Stage2Model(const Stage2TrainConfig& cfg, Rng& init_rng);

    void save(const std::string& path, std::uint64_t seed,
              const std::map<std::string, double>& stage1_numbers) const;
    static Stage2Model load_model(const std::string& path);
    std::int64_t param_count() const { return low_params.total_size() + high_params.total_size(); }
    Stage2TrainConfig train_cfg;
};

// Greedy/temperature sampling of one downsampled-token sequence from the
// low-level pair; used for the `generated` conditioning source during
// phase 2 (full-prefix recompute, tape-free).
TokenSequence sample_base_tokens(const ContextEncoder& enc, const BaseDecoder& base,
                                 const Matrix& context, double temperature, Rng& rng);

using Stage2LogFn = std::function<void(const Stage2LossRow&)>;

// Two-phase training per the stage-2 procedure: phase 1 fits {E_T, B} on
// downsampled tokens; phase 2 freezes them and fits S on target tokens with
// the configured conditioning source. Token targets come from the frozen
// stage-1 tokenizers.
Stage2Model train_stage2(const std::vector<SeriesWindow>& train_windows, Stage1Model& stage1,
                         const Stage2TrainConfig& cfg, const std::string& checkpoint_path,
                         const Stage2LogFn& log = {});

std::map<std::string, double> stage2_header_numbers(const Stage2TrainConfig& cfg);

}  // namespace hdt
