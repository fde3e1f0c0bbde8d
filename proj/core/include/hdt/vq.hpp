#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hdt/checkpoint.hpp"
#include "hdt/nn.hpp"
#include "hdt/optim.hpp"
#include "hdt/series.hpp"

namespace hdt {

enum class CodebookKind { target, downsampled };

// Discrete token sequence over one codebook; a learnable BOS marker is
// prepended by the stage-2 decoders, not stored here.
struct TokenSequence {
    std::vector<std::int64_t> indices;
    CodebookKind kind = CodebookKind::target;
};

// K learnable code vectors with usage counters. Lookup is exact nearest
// neighbour in Euclidean distance; ties resolve to the lowest index.
class Codebook {
public:
    Codebook() = default;
    Codebook(ParamGroup& pg, const std::string& prefix, std::int64_t size, std::int64_t dim, Rng& rng);

    std::int64_t lookup(std::span<const double> v) const;
    Tensor& entries() { return entries_; }
    const Tensor& entries() const { return entries_; }
    std::int64_t size() const { return entries_.dim(0); }
    std::int64_t dim() const { return entries_.dim(1); }
    std::vector<std::int64_t>& usage() { return usage_; }
    const std::vector<std::int64_t>& usage() const { return usage_; }
    std::int64_t used_codes() const;

private:
    Tensor entries_;  // [K, n_z]
    std::vector<std::int64_t> usage_;
};

struct TokenizerConfig {
    std::int64_t variates = 4;       // conv channels (D)
    std::int64_t tau = 48;           // window length, even
    std::int64_t codebook_size = 128;
    std::int64_t code_dim = 64;      // n_z
    double beta = 0.25;              // commitment weight
    double dropout = 0.1;
    std::int64_t disc_hidden = 32;

    std::int64_t token_len() const { return tau / 2; }
    void validate() const;
};

struct VqLoss {
    Tensor total;
    Tensor reconstruction;
    Tensor codebook;
    Tensor commitment;
};

struct GanLoss {
    Tensor d_loss;
    Tensor g_loss;
};

// One VQGAN instance: three-conv encoder (stride-2 first layer, tanh head),
// nearest-neighbour quantizer with straight-through gradients, mirrored
// deconv decoder, and a shallow patch discriminator.
class TokenizerModel {
public:
    TokenizerModel(TokenizerConfig cfg, CodebookKind kind, const std::string& prefix, Rng& init_rng);

    // x: [B, D, tau] channels-first, scaled units -> latent [B, s, n_z] in (-1,1).
    Tensor encode(const Tensor& x, bool train, Rng& rng) const;

    struct Quantized {
        Tensor straight_through;  // forward = codes, backward = identity to latent
        Tensor codes;             // embedding rows; gradient reaches the codebook
        std::vector<TokenSequence> tokens;
    };
    Quantized quantize(const Tensor& latent);

    // z: [B, s, n_z] -> [B, D, tau], unbounded output.
    Tensor decode(const Tensor& z, bool train, Rng& rng) const;

    // x: [B, D, tau] -> per-position logits [B, 1, tau/2].
    Tensor discriminate(const Tensor& x, bool train, Rng& rng) const;

    VqLoss vq_loss(const Tensor& x, const Tensor& x_hat, const Tensor& latent, const Tensor& codes) const;
    Tensor l2_reg_loss(const Tensor& latent, const Tensor& codes) const;
    GanLoss gan_losses(const Tensor& x, const Tensor& x_hat, bool train, Rng& rng);

    // |grad_w rec| / (|grad_w gan| + 1e-6) on the final deconvolution weight,
    // clamped to [0, 1e4]. Both props must already be backpropagated by the
    // caller into fresh grads; this reads the captured norms.
    static double adaptive_lambda(double rec_grad_norm, double gan_grad_norm);
    double last_deconv_grad_norm() const;

    // Whole-series helpers (eval mode, no tape).
    TokenSequence tokenize(const Matrix& series_tau_by_d);
    Matrix detokenize(const TokenSequence& tokens) const;
    Matrix encode_latent(const Matrix& series_tau_by_d) const;  // [s, n_z] continuous
    Matrix decode_latent(const Matrix& latent) const;           // [tau, D]

    const TokenizerConfig& config() const { return cfg_; }
    CodebookKind kind() const { return kind_; }
    Codebook& codebook() { return codebook_; }
    const Codebook& codebook() const { return codebook_; }
    ParamGroup& generator_params() { return gen_params_; }
    ParamGroup& discriminator_params() { return disc_params_; }
    const ParamGroup& generator_params() const { return gen_params_; }
    const ParamGroup& discriminator_params() const { return disc_params_; }

private:
    TokenizerConfig cfg_;
    CodebookKind kind_;
    ParamGroup gen_params_, disc_params_;
    Conv1d enc0_, enc1_, enc2_;
    LayerNorm enc_ln0_, enc_ln1_;
    ConvTranspose1d dec0_, dec1_, dec2_;
    LayerNorm dec_ln0_, dec_ln1_;
    Codebook codebook_;
    Conv1d disc0_, disc1_;
};

struct Stage1Config {
    TokenizerConfig tokenizer;
    std::int64_t steps = 2000;
    std::int64_t batch = 64;
    double lr = 5e-4;
    std::int64_t kernel = 25;          // moving-average width before clamping
    double gan_start_frac = 0.75;
    std::uint64_t seed = 1;
    std::int64_t checkpoint_every = 500;
};

struct Stage1LossRow {
    std::int64_t step = 0;  // 1-based
    double rec = 0, codebook = 0, commit = 0, l2 = 0, gan_g = 0, gan_d = 0, lambda = 0;
};

// Both stage-1 instances plus their optimizers; the unit the checkpoint
// stores and stage 2 consumes.
struct Stage1Model {
    TokenizerModel target;
    TokenizerModel downsampled;
    Adam target_gen_opt, target_disc_opt;
    Adam down_gen_opt, down_disc_opt;
    std::int64_t step = 0;
    Stage1Config cfg;

    explicit Stage1Model(const Stage1Config& cfg, Rng& init_rng);

    void save(const std::string& path, std::uint64_t seed) const;
    static Stage1Model load_model(const std::string& path);
    // Moving-average width actually applied at this tau.
    std::int64_t effective_kernel() const { return clamp_kernel(cfg.kernel, cfg.tokenizer.tau); }
};

using Stage1LogFn = std::function<void(const Stage1LossRow&)>;

// Hyperparameters as written into (and compared against) checkpoint headers.
std::map<std::string, double> stage1_header_numbers(const Stage1Config& cfg);

// Algorithm: K steps over sampled window batches; both tokenizers take a
// VQ + l2 step each time, and from step ceil(gan_start_frac*K) the patch
// discriminators join with alternating D-then-G updates and adaptive lambda.
// Throws TrainingError (naming the last good checkpoint) if the loss goes
// non-finite.
Stage1Model train_stage1(const std::vector<SeriesWindow>& train_windows, const Stage1Config& cfg,
                         const std::string& checkpoint_path, const Stage1LogFn& log = {});

// Eval-mode reconstruction MSE of the target tokenizer over whole windows.
double reconstruction_mse(TokenizerModel& model, std::span<const SeriesWindow> windows);

}  // namespace hdt
