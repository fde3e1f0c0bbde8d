#include "hdt/vq.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "hdt/packing.hpp"

namespace hdt {

void TokenizerConfig::validate() const {
    if (variates < 1) throw ConfigurationError("tokenizer: variate count must be positive");
    if (tau < 2 || tau % 2 != 0) {
        throw ConfigurationError("tokenizer: tau must be even and >= 2, got " + std::to_string(tau));
    }
    if (codebook_size < 2) throw ConfigurationError("tokenizer: codebook size must be >= 2");
    if (code_dim < 1) throw ConfigurationError("tokenizer: code dim must be >= 1");
    if (beta < 0.0) throw ConfigurationError("tokenizer: beta must be non-negative");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigurationError("tokenizer: dropout must be in [0,1)");
    if (disc_hidden < 1) throw ConfigurationError("tokenizer: discriminator width must be >= 1");
}

Codebook::Codebook(ParamGroup& pg, const std::string& prefix, std::int64_t size, std::int64_t dim,
                   Rng& rng) {
    const double bound = 1.0 / static_cast<double>(size);
    std::vector<double> init(static_cast<std::size_t>(size * dim));
    rng.fill_uniform(init, -bound, bound);
    for (std::int64_t k = 0; k < size; ++k) {  // row-normalize so entries start on the unit sphere
        double n = 0.0;
        for (std::int64_t j = 0; j < dim; ++j) n += init[k * dim + j] * init[k * dim + j];
        n = std::sqrt(n);
        if (n > 0.0)
            for (std::int64_t j = 0; j < dim; ++j) init[k * dim + j] /= n;
    }
    entries_ = pg.add(prefix + ".entries", Tensor({size, dim}, std::move(init), true));
    usage_.assign(static_cast<std::size_t>(size), 0);
}

std::int64_t Codebook::lookup(std::span<const double> v) const {
    const std::int64_t K = size(), d = dim();
    if (static_cast<std::int64_t>(v.size()) != d) {
        throw DimensionError("codebook lookup: vector has " + std::to_string(v.size()) +
                             " dims, entries have " + std::to_string(d));
    }
    const double* e = entries_.data().data();
    std::int64_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::int64_t k = 0; k < K; ++k) {
        double dist = 0.0;
        for (std::int64_t j = 0; j < d; ++j) {
            const double diff = v[static_cast<std::size_t>(j)] - e[k * d + j];
            dist += diff * diff;
        }
        if (dist < best_d) {  // strict: ties keep the lowest index
            best_d = dist;
            best = k;
        }
    }
    return best;
}

std::int64_t Codebook::used_codes() const {
    std::int64_t n = 0;
    for (auto u : usage_)
        if (u > 0) ++n;
    return n;
}

namespace {

// LayerNorm over the channel axis of a [B,C,L] stack.
Tensor channel_layernorm(const LayerNorm& ln, const Tensor& x) {
    return transpose_last2(ln.forward(transpose_last2(x)));
}

}  // namespace

TokenizerModel::TokenizerModel(TokenizerConfig cfg, CodebookKind kind, const std::string& prefix,
                               Rng& init_rng)
    : cfg_(cfg), kind_(kind) {
    cfg_.validate();
    const std::int64_t D = cfg_.variates, nz = cfg_.code_dim;
    enc0_ = Conv1d(gen_params_, prefix + ".encoder.conv0", D, nz, 4, 2, 1, init_rng);
    enc_ln0_ = LayerNorm(gen_params_, prefix + ".encoder.ln0", nz);
    enc1_ = Conv1d(gen_params_, prefix + ".encoder.conv1", nz, nz, 3, 1, 1, init_rng);
    enc_ln1_ = LayerNorm(gen_params_, prefix + ".encoder.ln1", nz);
    enc2_ = Conv1d(gen_params_, prefix + ".encoder.conv2", nz, nz, 3, 1, 1, init_rng);
    dec0_ = ConvTranspose1d(gen_params_, prefix + ".decoder.deconv0", nz, nz, 3, 1, 1, init_rng);
    dec_ln0_ = LayerNorm(gen_params_, prefix + ".decoder.ln0", nz);
    dec1_ = ConvTranspose1d(gen_params_, prefix + ".decoder.deconv1", nz, nz, 3, 1, 1, init_rng);
    dec_ln1_ = LayerNorm(gen_params_, prefix + ".decoder.ln1", nz);
    dec2_ = ConvTranspose1d(gen_params_, prefix + ".decoder.deconv2", nz, D, 4, 2, 1, init_rng);
    codebook_ = Codebook(gen_params_, prefix + ".codebook", cfg_.codebook_size, nz, init_rng);
    disc0_ = Conv1d(disc_params_, prefix + ".disc.conv0", D, cfg_.disc_hidden, 4, 2, 1, init_rng);
    disc1_ = Conv1d(disc_params_, prefix + ".disc.conv1", cfg_.disc_hidden, 1, 3, 1, 1, init_rng);
}

Tensor TokenizerModel::encode(const Tensor& x, bool train, Rng& rng) const {
    if (x.rank() != 3 || x.dim(1) != cfg_.variates) {
        throw ConfigurationError("encode: expected [B," + std::to_string(cfg_.variates) + ",tau], got " +
                                 shape_str(x.shape()));
    }
    if (x.dim(2) != cfg_.tau || x.dim(2) % 2 != 0) {
        throw ConfigurationError("encode: window length " + std::to_string(x.dim(2)) +
                                 " does not match configured tau " + std::to_string(cfg_.tau));
    }
    Tensor h = dropout(relu(enc0_.forward(x)), cfg_.dropout, train, rng);
    h = channel_layernorm(enc_ln0_, h);
    h = dropout(relu(enc1_.forward(h)), cfg_.dropout, train, rng);
    h = channel_layernorm(enc_ln1_, h);
    h = tanh(enc2_.forward(h));
    return transpose_last2(h);  // [B, s, n_z]
}

TokenizerModel::Quantized TokenizerModel::quantize(const Tensor& latent) {
    if (latent.rank() != 3 || latent.dim(2) != cfg_.code_dim) {
        throw DimensionError("quantize: latent " + shape_str(latent.shape()) +
                             " does not match code dim " + std::to_string(cfg_.code_dim));
    }
    const std::int64_t B = latent.dim(0), s = latent.dim(1), nz = latent.dim(2);
    std::vector<std::int64_t> flat(static_cast<std::size_t>(B * s));
    for (std::int64_t r = 0; r < B * s; ++r) {
        flat[static_cast<std::size_t>(r)] =
            codebook_.lookup(latent.data().subspan(static_cast<std::size_t>(r * nz),
                                                   static_cast<std::size_t>(nz)));
        ++codebook_.usage()[static_cast<std::size_t>(flat[static_cast<std::size_t>(r)])];
    }

    Quantized q;
    q.codes = embedding(codebook_.entries(), flat, {B, s});
    // Forward emits the exact code vectors; backward passes the upstream
    // gradient to the latent unchanged and nothing to the codebook.
    auto ln = latent.node();
    q.straight_through = make_op_result(
        latent.shape(), std::vector<double>(q.codes.data().begin(), q.codes.data().end()), {latent},
        [ln](detail::TensorNode& self) {
            if (!ln->requires_grad) return;
            ln->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) ln->grad[i] += self.grad[i];
        });
    q.tokens.reserve(static_cast<std::size_t>(B));
    for (std::int64_t b = 0; b < B; ++b) {
        TokenSequence seq;
        seq.kind = kind_;
        seq.indices.assign(flat.begin() + b * s, flat.begin() + (b + 1) * s);
        q.tokens.push_back(std::move(seq));
    }
    return q;
}

Tensor TokenizerModel::decode(const Tensor& z, bool train, Rng& rng) const {
    if (z.rank() != 3 || z.dim(2) != cfg_.code_dim || z.dim(1) != cfg_.token_len()) {
        throw ConfigurationError("decode: expected [B," + std::to_string(cfg_.token_len()) + "," +
                                 std::to_string(cfg_.code_dim) + "], got " + shape_str(z.shape()));
    }
    Tensor h = transpose_last2(z);  // [B, n_z, s]
    h = dropout(relu(dec0_.forward(h)), cfg_.dropout, train, rng);
    h = channel_layernorm(dec_ln0_, h);
    h = dropout(relu(dec1_.forward(h)), cfg_.dropout, train, rng);
    h = channel_layernorm(dec_ln1_, h);
    return dec2_.forward(h);  // [B, D, tau], unbounded
}

Tensor TokenizerModel::discriminate(const Tensor& x, bool /*train*/, Rng& /*rng*/) const {
    Tensor h = leaky_relu(disc0_.forward(x), 0.2);
    return disc1_.forward(h);  // [B, 1, tau/2] patch logits
}

VqLoss TokenizerModel::vq_loss(const Tensor& x, const Tensor& x_hat, const Tensor& latent,
                               const Tensor& codes) const {
    VqLoss out;
    out.reconstruction = mean_squared_error(x_hat, x);
    out.codebook = mean_squared_error(codes, detach(latent));
    out.commitment = mean_squared_error(latent, detach(codes));
    out.total = add(add(out.reconstruction, out.codebook), scale(out.commitment, cfg_.beta));
    return out;
}

Tensor TokenizerModel::l2_reg_loss(const Tensor& latent, const Tensor& codes) const {
    const std::int64_t rows = latent.dim(0) * latent.dim(1), nz = latent.dim(2);
    Tensor nl = l2norm_rows(reshape(latent, {rows, nz}));
    Tensor nc = l2norm_rows(reshape(codes, {rows, nz}));
    Tensor diff = sub(nl, nc);
    // per-row squared distance, averaged over rows
    return scale(mean(mul(diff, diff)), static_cast<double>(nz));
}

GanLoss TokenizerModel::gan_losses(const Tensor& x, const Tensor& x_hat, bool train, Rng& rng) {
    Tensor real = clamp(discriminate(x, train, rng), -15.0, 15.0);
    Tensor fake_for_d = clamp(discriminate(detach(x_hat), train, rng), -15.0, 15.0);
    GanLoss out;
    out.d_loss = neg(mean(add(log_sigmoid(real), log_sigmoid(neg(fake_for_d)))));
    Tensor fake_for_g = clamp(discriminate(x_hat, train, rng), -15.0, 15.0);
    out.g_loss = neg(mean(log_sigmoid(fake_for_g)));
    return out;
}

double TokenizerModel::adaptive_lambda(double rec_grad_norm, double gan_grad_norm) {
    const double lambda = rec_grad_norm / (gan_grad_norm + 1e-6);
    return std::clamp(lambda, 0.0, 1e4);
}

double TokenizerModel::last_deconv_grad_norm() const {
    const Tensor& w = dec2_.weight();
    if (!w.has_grad()) return 0.0;
    double s = 0.0;
    for (double g : w.grad()) {
        if (!std::isfinite(g)) throw TrainingError("non-finite gradient on the final deconvolution");
        s += g * g;
    }
    return std::sqrt(s);
}

TokenSequence TokenizerModel::tokenize(const Matrix& series) {
    NoGradGuard ng;
    Rng dummy(0);
    const Matrix* ptr = &series;
    Tensor x = pack_channels_first(std::span<const Matrix* const>(&ptr, 1));
    Tensor latent = encode(x, false, dummy);
    return quantize(latent).tokens[0];
}

Matrix TokenizerModel::detokenize(const TokenSequence& tokens) const {
    NoGradGuard ng;
    Rng dummy(0);
    const std::int64_t s = cfg_.token_len(), nz = cfg_.code_dim;
    if (static_cast<std::int64_t>(tokens.indices.size()) != s) {
        throw DimensionError("detokenize: expected " + std::to_string(s) + " tokens, got " +
                             std::to_string(tokens.indices.size()));
    }
    Tensor z = embedding(codebook_.entries(), tokens.indices, {1, s});
    Tensor y = decode(z, false, dummy);
    return unpack_channels_first(y, 0);
}

Matrix TokenizerModel::encode_latent(const Matrix& series) const {
    NoGradGuard ng;
    Rng dummy(0);
    const Matrix* ptr = &series;
    Tensor latent = encode(pack_channels_first(std::span<const Matrix* const>(&ptr, 1)), false, dummy);
    return Matrix(latent.dim(1), latent.dim(2),
                  std::vector<double>(latent.data().begin(), latent.data().end()));
}

Matrix TokenizerModel::decode_latent(const Matrix& latent) const {
    NoGradGuard ng;
    Rng dummy(0);
    Tensor z({1, latent.rows, latent.cols},
             std::vector<double>(latent.values.begin(), latent.values.end()));
    return unpack_channels_first(decode(z, false, dummy), 0);
}

// ---------------------------------------------------------------------------
// stage-1 training
// ---------------------------------------------------------------------------

Stage1Model::Stage1Model(const Stage1Config& cfg_in, Rng& init_rng)
    : target(cfg_in.tokenizer, CodebookKind::target, "stage1.target", init_rng),
      downsampled(cfg_in.tokenizer, CodebookKind::downsampled, "stage1.down", init_rng),
      target_gen_opt(target.generator_params(), cfg_in.lr),
      target_disc_opt(target.discriminator_params(), cfg_in.lr),
      down_gen_opt(downsampled.generator_params(), cfg_in.lr),
      down_disc_opt(downsampled.discriminator_params(), cfg_in.lr),
      cfg(cfg_in) {}

namespace {

void save_adam(Checkpoint& ck, const Adam& opt, const std::string& tag) {
    for (std::size_t i = 0; i < opt.slot_count(); ++i) {
        const auto& name = opt.slot_name(i);
        ck.add("optim." + name + ".m", {static_cast<std::int64_t>(opt.moment1(i).size())},
               opt.moment1(i));
        ck.add("optim." + name + ".v", {static_cast<std::int64_t>(opt.moment2(i).size())},
               opt.moment2(i));
    }
    ck.add_scalar("optim." + tag + ".t", static_cast<double>(opt.step_count()));
}

void load_adam(const Checkpoint& ck, Adam& opt, const std::string& tag) {
    for (std::size_t i = 0; i < opt.slot_count(); ++i) {
        const auto& name = opt.slot_name(i);
        opt.moment1(i) = ck.require("optim." + name + ".m").data;
        opt.moment2(i) = ck.require("optim." + name + ".v").data;
    }
    opt.set_step_count(static_cast<std::int64_t>(ck.scalar("optim." + tag + ".t")));
}

void save_usage(Checkpoint& ck, const Codebook& cb, const std::string& name) {
    std::vector<double> u(cb.usage().begin(), cb.usage().end());
    const auto n = static_cast<std::int64_t>(u.size());
    ck.add(name, {n}, std::move(u));
}

std::string config_hash_hex(const std::map<std::string, double>& numbers) {
    std::uint64_t h = 1469598103934665603ULL;  // FNV-1a over the serialized pairs
    std::ostringstream os;
    for (const auto& [k, v] : numbers) os << k << '=' << v << ';';
    for (unsigned char c : os.str()) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    std::ostringstream hex;
    hex << std::hex << h;
    return hex.str();
}

}  // namespace

std::map<std::string, double> stage1_header_numbers(const Stage1Config& cfg) {
    return {
        {"variates", static_cast<double>(cfg.tokenizer.variates)},
        {"tau", static_cast<double>(cfg.tokenizer.tau)},
        {"codebook_size", static_cast<double>(cfg.tokenizer.codebook_size)},
        {"code_dim", static_cast<double>(cfg.tokenizer.code_dim)},
        {"beta", cfg.tokenizer.beta},
        {"dropout", cfg.tokenizer.dropout},
        {"disc_hidden", static_cast<double>(cfg.tokenizer.disc_hidden)},
        {"steps", static_cast<double>(cfg.steps)},
        {"batch", static_cast<double>(cfg.batch)},
        {"lr", cfg.lr},
        {"kernel", static_cast<double>(cfg.kernel)},
        {"gan_start_frac", cfg.gan_start_frac},
    };
}

void Stage1Model::save(const std::string& path, std::uint64_t seed) const {
    Checkpoint ck;
    ck.seed = seed;
    ck.header_numbers = stage1_header_numbers(cfg);
    ck.header_strings["model"] = "hdt.stage1";
    ck.header_strings["config_hash"] = config_hash_hex(ck.header_numbers);
    ck.add_params(target.generator_params());
    ck.add_params(target.discriminator_params());
    ck.add_params(downsampled.generator_params());
    ck.add_params(downsampled.discriminator_params());
    save_adam(ck, target_gen_opt, "stage1.target.gen");
    save_adam(ck, target_disc_opt, "stage1.target.disc");
    save_adam(ck, down_gen_opt, "stage1.down.gen");
    save_adam(ck, down_disc_opt, "stage1.down.disc");
    save_usage(ck, target.codebook(), "stage1.target.codebook.usage_counts");
    save_usage(ck, downsampled.codebook(), "stage1.down.codebook.usage_counts");
    ck.add_scalar("stage1.step", static_cast<double>(step));
    ck.save(path);
}

Stage1Model Stage1Model::load_model(const std::string& path) {
    Checkpoint ck = Checkpoint::load(path);
    if (ck.header_strings.count("model") == 0 || ck.header_strings.at("model") != "hdt.stage1") {
        throw ConfigurationError("'" + path + "' is not a stage-1 checkpoint");
    }
    const auto& n = ck.header_numbers;
    Stage1Config cfg;
    cfg.tokenizer.variates = static_cast<std::int64_t>(n.at("variates"));
    cfg.tokenizer.tau = static_cast<std::int64_t>(n.at("tau"));
    cfg.tokenizer.codebook_size = static_cast<std::int64_t>(n.at("codebook_size"));
    cfg.tokenizer.code_dim = static_cast<std::int64_t>(n.at("code_dim"));
    cfg.tokenizer.beta = n.at("beta");
    cfg.tokenizer.dropout = n.at("dropout");
    cfg.tokenizer.disc_hidden = static_cast<std::int64_t>(n.at("disc_hidden"));
    cfg.steps = static_cast<std::int64_t>(n.at("steps"));
    cfg.batch = static_cast<std::int64_t>(n.at("batch"));
    cfg.lr = n.at("lr");
    cfg.kernel = static_cast<std::int64_t>(n.at("kernel"));
    cfg.gan_start_frac = n.at("gan_start_frac");
    cfg.seed = ck.seed;

    Rng init(0);
    Stage1Model model(cfg, init);
    ck.load_into(model.target.generator_params());
    ck.load_into(model.target.discriminator_params());
    ck.load_into(model.downsampled.generator_params());
    ck.load_into(model.downsampled.discriminator_params());
    load_adam(ck, model.target_gen_opt, "stage1.target.gen");
    load_adam(ck, model.target_disc_opt, "stage1.target.disc");
    load_adam(ck, model.down_gen_opt, "stage1.down.gen");
    load_adam(ck, model.down_disc_opt, "stage1.down.disc");
    auto restore_usage = [&](Codebook& cb, const std::string& name) {
        const auto& e = ck.require(name);
        cb.usage().assign(e.data.begin(), e.data.end());
    };
    restore_usage(model.target.codebook(), "stage1.target.codebook.usage_counts");
    restore_usage(model.downsampled.codebook(), "stage1.down.codebook.usage_counts");
    model.step = static_cast<std::int64_t>(ck.scalar("stage1.step"));
    return model;
}

namespace {

struct InstanceStep {
    double rec = 0, cb = 0, commit = 0, l2 = 0, gan_g = 0, gan_d = 0, lambda = 0;
};

InstanceStep tokenizer_step(TokenizerModel& model, Adam& gen_opt, Adam& disc_opt, const Tensor& x,
                            bool gan_active, Rng& dropout_rng) {
    InstanceStep out;
    gen_opt.zero_grad();
    disc_opt.zero_grad();

    Tensor latent = model.encode(x, true, dropout_rng);
    auto q = model.quantize(latent);
    Tensor x_hat = model.decode(q.straight_through, true, dropout_rng);
    VqLoss vq = model.vq_loss(x, x_hat, latent, q.codes);
    Tensor l2 = model.l2_reg_loss(latent, q.codes);
    out.rec = vq.reconstruction.item();
    out.cb = vq.codebook.item();
    out.commit = vq.commitment.item();
    out.l2 = l2.item();

    if (gan_active) {
        GanLoss gan = model.gan_losses(x, x_hat, true, dropout_rng);
        out.gan_d = gan.d_loss.item();
        out.gan_g = gan.g_loss.item();

        // discriminator first
        gan.d_loss.backward();
        disc_opt.step();
        disc_opt.zero_grad();
        gen_opt.zero_grad();

        // adaptive weight from gradient norms at the decoder's last layer
        vq.reconstruction.backward();
        const double rec_norm = model.last_deconv_grad_norm();
        gen_opt.zero_grad();
        disc_opt.zero_grad();
        gan.g_loss.backward();
        const double gan_norm = model.last_deconv_grad_norm();
        gen_opt.zero_grad();
        disc_opt.zero_grad();
        out.lambda = TokenizerModel::adaptive_lambda(rec_norm, gan_norm);

        Tensor total = add(add(vq.total, scale(gan.g_loss, out.lambda)), l2);
        total.backward();
        gen_opt.step();
        gen_opt.zero_grad();
        disc_opt.zero_grad();
    } else {
        Tensor total = add(vq.total, l2);
        total.backward();
        gen_opt.step();
        gen_opt.zero_grad();
    }
    return out;
}

}  // namespace

Stage1Model train_stage1(const std::vector<SeriesWindow>& train_windows, const Stage1Config& cfg,
                         const std::string& checkpoint_path, const Stage1LogFn& log) {
    if (train_windows.empty()) throw StateError("train_stage1: no training windows");
    cfg.tokenizer.validate();
    if (cfg.steps < 1 || cfg.batch < 1) throw ConfigurationError("train_stage1: steps and batch must be >= 1");
    for (const auto& w : train_windows) {
        if (w.tau() != cfg.tokenizer.tau || w.variates() != cfg.tokenizer.variates) {
            throw ConfigurationError("train_stage1: window " + std::to_string(w.tau()) + "x" +
                                     std::to_string(w.variates()) + " does not match configured " +
                                     std::to_string(cfg.tokenizer.tau) + "x" +
                                     std::to_string(cfg.tokenizer.variates));
        }
    }

    Rng root(cfg.seed);
    Rng init_rng = root.stream(0);
    Rng sample_rng = root.stream(1);
    Rng dropout_rng = root.stream(2);

    Stage1Model model(cfg, init_rng);
    const std::int64_t kernel = model.effective_kernel();
    std::vector<Matrix> down_targets;
    down_targets.reserve(train_windows.size());
    for (const auto& w : train_windows) down_targets.push_back(downsample(w.target, kernel).values);

    const std::int64_t gan_start =
        static_cast<std::int64_t>(std::ceil(cfg.gan_start_frac * static_cast<double>(cfg.steps)));
    std::string last_good = "<none>";

    for (std::int64_t k = 1; k <= cfg.steps; ++k) {
        std::vector<const Matrix*> targets(static_cast<std::size_t>(cfg.batch));
        std::vector<const Matrix*> downs(static_cast<std::size_t>(cfg.batch));
        for (std::int64_t b = 0; b < cfg.batch; ++b) {
            const auto i = static_cast<std::size_t>(sample_rng.next_below(train_windows.size()));
            targets[static_cast<std::size_t>(b)] = &train_windows[i].target;
            downs[static_cast<std::size_t>(b)] = &down_targets[i];
        }
        Tensor x_pred = pack_channels_first(targets);
        Tensor x_down = pack_channels_first(downs);

        const bool gan_active = k >= gan_start;
        InstanceStep a = tokenizer_step(model.target, model.target_gen_opt, model.target_disc_opt,
                                        x_pred, gan_active, dropout_rng);
        InstanceStep b = tokenizer_step(model.downsampled, model.down_gen_opt, model.down_disc_opt,
                                        x_down, gan_active, dropout_rng);
        model.step = k;

        Stage1LossRow row{k,
                          (a.rec + b.rec) / 2.0,
                          (a.cb + b.cb) / 2.0,
                          (a.commit + b.commit) / 2.0,
                          (a.l2 + b.l2) / 2.0,
                          (a.gan_g + b.gan_g) / 2.0,
                          (a.gan_d + b.gan_d) / 2.0,
                          (a.lambda + b.lambda) / 2.0};
        const double probe = row.rec + row.codebook + row.commit + row.l2 + row.gan_g + row.gan_d;
        if (!std::isfinite(probe)) {
            throw TrainingError("stage 1 loss became non-finite at step " + std::to_string(k) +
                                "; last good checkpoint: " + last_good);
        }
        if (log) log(row);

        if (!checkpoint_path.empty() &&
            (k % cfg.checkpoint_every == 0 || k == cfg.steps)) {
            model.save(checkpoint_path, cfg.seed);
            last_good = checkpoint_path;
        }
    }
    return model;
}

double reconstruction_mse(TokenizerModel& model, std::span<const SeriesWindow> windows) {
    if (windows.empty()) throw StateError("reconstruction_mse: no windows");
    NoGradGuard ng;
    Rng dummy(0);
    double total = 0.0;
    std::int64_t count = 0;
    std::vector<const Matrix*> batch;
    for (std::size_t i = 0; i < windows.size();) {
        batch.clear();
        for (; i < windows.size() && batch.size() < 64; ++i) batch.push_back(&windows[i].target);
        Tensor x = pack_channels_first(batch);
        Tensor latent = model.encode(x, false, dummy);
        auto q = model.quantize(latent);
        Tensor x_hat = model.decode(q.straight_through, false, dummy);
        for (std::size_t j = 0; j < x.data().size(); ++j) {
            const double e = x.data()[j] - x_hat.data()[j];
            total += e * e;
        }
        count += x.numel();
    }
    return total / static_cast<double>(count);
}

}  // namespace hdt
