#include "hdt/transformer.hpp"

#include <cmath>

#include "hdt/packing.hpp"

namespace hdt {

void Stage2Config::validate() const {
    if (variates < 1) throw ConfigurationError("stage2: variate count must be positive");
    if (history_len < 1) throw ConfigurationError("stage2: history length must be positive");
    if (token_len < 1) throw ConfigurationError("stage2: token length must be positive");
    if (model_dim < heads || model_dim % heads != 0) {
        throw ConfigurationError("stage2: model dim " + std::to_string(model_dim) +
                                 " must be a positive multiple of " + std::to_string(heads) + " heads");
    }
    if (codebook_target < 2 || codebook_down < 2) throw ConfigurationError("stage2: codebooks need >= 2 entries");
    if (enc_layers < 1 || base_layers < 1 || selfcond_layers < 1) {
        throw ConfigurationError("stage2: every stack needs at least one layer");
    }
    if (selfcond_layers > 8) throw ConfigurationError("stage2: self-cond layers limited to 8");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigurationError("stage2: dropout must be in [0,1)");
}

EncoderBlock::EncoderBlock(ParamGroup& pg, const std::string& prefix, std::int64_t dim,
                           std::int64_t heads, Rng& rng)
    : ln1(pg, prefix + ".ln1", dim),
      ln2(pg, prefix + ".ln2", dim),
      attn(pg, prefix + ".self", dim, heads, rng),
      mlp1(pg, prefix + ".mlp1", dim, 4 * dim, rng),
      mlp2(pg, prefix + ".mlp2", 4 * dim, dim, rng) {}

Tensor EncoderBlock::forward(const Tensor& x, double dropout_rate, bool train, Rng& rng) const {
    Tensor y = ln1.forward(x);
    Tensor h = add(x, attn.forward(y, y, false, dropout_rate, train, rng));
    Tensor m = dropout(relu(mlp1.forward(ln2.forward(h))), dropout_rate, train, rng);
    return add(h, mlp2.forward(m));
}

DecoderBlock::DecoderBlock(ParamGroup& pg, const std::string& prefix, std::int64_t dim,
                           std::int64_t heads, bool with_cond_in, Rng& rng)
    : ln1(pg, prefix + ".ln1", dim),
      ln2(pg, prefix + ".ln2", dim),
      ln4(pg, prefix + ".ln4", dim),
      self_attn(pg, prefix + ".self", dim, heads, rng),
      cross_hist(pg, prefix + ".cross_hist", dim, heads, rng),
      mlp1(pg, prefix + ".mlp1", dim, 4 * dim, rng),
      mlp2(pg, prefix + ".mlp2", 4 * dim, dim, rng),
      with_cond(with_cond_in) {
    if (with_cond) {
        ln3 = LayerNorm(pg, prefix + ".ln3", dim);
        cross_cond = MultiHeadAttention(pg, prefix + ".cross_cond", dim, heads, rng);
    }
}

Tensor DecoderBlock::forward(const Tensor& x, const Tensor& hist, const Tensor* cond,
                             double dropout_rate, bool train, Rng& rng) const {
    Tensor h = add(x, self_attn.forward(ln1.forward(x), ln1.forward(x), true, dropout_rate, train, rng));
    h = add(h, cross_hist.forward(ln2.forward(h), hist, false, dropout_rate, train, rng));
    if (with_cond) {
        if (cond == nullptr) throw StateError("decoder block: conditioning sequence missing");
        h = add(h, cross_cond.forward(ln3.forward(h), *cond, false, dropout_rate, train, rng));
    }
    Tensor m = dropout(relu(mlp1.forward(ln4.forward(h))), dropout_rate, train, rng);
    return add(h, mlp2.forward(m));
}

ContextEncoder::ContextEncoder(ParamGroup& pg, const Stage2Config& cfg, Rng& rng) : cfg_(&cfg) {
    in_proj_ = Linear(pg, "stage2.encoder.inproj", cfg.variates, cfg.model_dim, rng);
    pos_ = pg.add("stage2.encoder.pos",
                  Tensor::rand_normal({cfg.history_len, cfg.model_dim}, rng, 0.0, 0.02, true));
    for (std::int64_t i = 0; i < cfg.enc_layers; ++i) {
        blocks_.emplace_back(pg, "stage2.encoder.layer" + std::to_string(i), cfg.model_dim, cfg.heads, rng);
    }
}

Tensor ContextEncoder::forward(const Tensor& context, bool train, Rng& rng) const {
    if (context.rank() != 3 || context.dim(1) != cfg_->history_len || context.dim(2) != cfg_->variates) {
        throw ConfigurationError("context encoder: expected [B," + std::to_string(cfg_->history_len) +
                                 "," + std::to_string(cfg_->variates) + "], got " +
                                 shape_str(context.shape()));
    }
    Tensor x = add_position(in_proj_.forward(context), pos_);
    for (const auto& b : blocks_) x = b.forward(x, cfg_->dropout, train, rng);
    return x;
}

namespace {

// pos rows [0, len) broadcast onto a [B, len, d] stack
Tensor add_positions_prefix(const Tensor& x, const Tensor& pos, std::int64_t len) {
    const std::int64_t total = pos.dim(0), d = pos.dim(1);
    if (len == total) return add_position(x, pos);
    Tensor sliced = reshape(slice_axis1(reshape(pos, {1, total, d}), 0, len), {len, d});
    return add_position(x, sliced);
}

}  // namespace

BaseDecoder::BaseDecoder(ParamGroup& pg, const Stage2Config& cfg, Rng& rng) : cfg_(&cfg) {
    tok_ = Embedding(pg, "stage2.base.tok", cfg.codebook_down + 1, cfg.model_dim, rng);  // +1: BOS
    pos_ = pg.add("stage2.base.pos",
                  Tensor::rand_normal({cfg.token_len, cfg.model_dim}, rng, 0.0, 0.02, true));
    for (std::int64_t i = 0; i < cfg.base_layers; ++i) {
        blocks_.emplace_back(pg, "stage2.base.layer" + std::to_string(i), cfg.model_dim, cfg.heads,
                             false, rng);
    }
    head_ = Linear(pg, "stage2.base.head", cfg.model_dim, cfg.codebook_down, rng);
}

Tensor BaseDecoder::logits(const Tensor& h_p, std::span<const std::int64_t> tokens_in,
                           std::int64_t batch, std::int64_t len, bool train, Rng& rng) const {
    if (static_cast<std::int64_t>(tokens_in.size()) != batch * len) {
        throw DimensionError("base decoder: token buffer does not match batch x len");
    }
    if (len > cfg_->token_len) throw DimensionError("base decoder: sequence longer than the positional table");
    Tensor x = add_positions_prefix(tok_.forward(tokens_in, {batch, len}), pos_, len);
    for (const auto& b : blocks_) x = b.forward(x, h_p, nullptr, cfg_->dropout, train, rng);
    return head_.forward(x);
}

SelfCondDecoder::SelfCondDecoder(ParamGroup& pg, const Stage2Config& cfg, Rng& rng) : cfg_(&cfg) {
    tok_ = Embedding(pg, "stage2.selfcond.tok", cfg.codebook_target + 1, cfg.model_dim, rng);
    pos_ = pg.add("stage2.selfcond.pos",
                  Tensor::rand_normal({cfg.token_len, cfg.model_dim}, rng, 0.0, 0.02, true));
    if (cfg.use_self_condition) {
        cond_tok_ = Embedding(pg, "stage2.selfcond.cond_tok", cfg.codebook_down, cfg.model_dim, rng);
        cond_pos_ = pg.add("stage2.selfcond.cond_pos",
                           Tensor::rand_normal({cfg.token_len, cfg.model_dim}, rng, 0.0, 0.02, true));
    }
    for (std::int64_t i = 0; i < cfg.selfcond_layers; ++i) {
        blocks_.emplace_back(pg, "stage2.selfcond.layer" + std::to_string(i), cfg.model_dim, cfg.heads,
                             cfg.use_self_condition, rng);
    }
    head_ = Linear(pg, "stage2.selfcond.head", cfg.model_dim, cfg.codebook_target, rng);
}

Tensor SelfCondDecoder::embed_cond(std::span<const std::int64_t> cond_tokens, std::int64_t batch) const {
    if (!cfg_->use_self_condition) throw StateError("self-condition path is disabled in this variant");
    const std::int64_t s = cfg_->token_len;
    if (static_cast<std::int64_t>(cond_tokens.size()) != batch * s) {
        throw DimensionError("self-cond decoder: conditioning buffer does not match batch x token_len");
    }
    return add_position(cond_tok_.forward(cond_tokens, {batch, s}), cond_pos_);
}

Tensor SelfCondDecoder::logits(const Tensor& h_p, std::span<const std::int64_t> cond_tokens,
                               std::span<const std::int64_t> tokens_in, std::int64_t batch,
                               std::int64_t len, bool train, Rng& rng) const {
    if (static_cast<std::int64_t>(tokens_in.size()) != batch * len) {
        throw DimensionError("self-cond decoder: token buffer does not match batch x len");
    }
    if (len > cfg_->token_len) throw DimensionError("self-cond decoder: sequence longer than the positional table");
    Tensor x = add_positions_prefix(tok_.forward(tokens_in, {batch, len}), pos_, len);
    Tensor cond;
    const Tensor* cond_ptr = nullptr;
    if (cfg_->use_self_condition) {
        cond = embed_cond(cond_tokens, batch);
        cond_ptr = &cond;
    }
    for (const auto& b : blocks_) x = b.forward(x, h_p, cond_ptr, cfg_->dropout, train, rng);
    return head_.forward(x);
}

namespace {

// [BOS, t_0 .. t_{m-2}] per row, flattened
std::vector<std::int64_t> teacher_inputs(const std::vector<TokenSequence>& seqs, std::int64_t bos,
                                         std::int64_t len) {
    std::vector<std::int64_t> in;
    in.reserve(seqs.size() * static_cast<std::size_t>(len));
    for (const auto& s : seqs) {
        if (static_cast<std::int64_t>(s.indices.size()) != len) {
            throw DimensionError("teacher forcing: sequence length " + std::to_string(s.indices.size()) +
                                 " != " + std::to_string(len));
        }
        in.push_back(bos);
        in.insert(in.end(), s.indices.begin(), s.indices.end() - 1);
    }
    return in;
}

std::vector<std::int64_t> flatten_targets(const std::vector<TokenSequence>& seqs) {
    std::vector<std::int64_t> t;
    for (const auto& s : seqs) t.insert(t.end(), s.indices.begin(), s.indices.end());
    return t;
}

}  // namespace

Tensor base_nll(const ContextEncoder& enc, const BaseDecoder& base, const Tensor& contexts,
                const std::vector<TokenSequence>& s_down, bool train, Rng& rng) {
    const auto batch = static_cast<std::int64_t>(s_down.size());
    if (batch == 0 || contexts.dim(0) != batch) throw DimensionError("base_nll: batch mismatch");
    const std::int64_t len = static_cast<std::int64_t>(s_down[0].indices.size());
    Tensor h_p = enc.forward(contexts, train, rng);
    auto inputs = teacher_inputs(s_down, base.bos_id(), len);
    Tensor logits = base.logits(h_p, inputs, batch, len, train, rng);
    return softmax_cross_entropy(logits, flatten_targets(s_down));
}

Tensor selfcond_nll(const SelfCondDecoder& self, const Tensor& h_p_frozen,
                    const std::vector<TokenSequence>& s_down, const std::vector<TokenSequence>& s_pred,
                    bool train, Rng& rng) {
    const auto batch = static_cast<std::int64_t>(s_pred.size());
    if (batch == 0 || h_p_frozen.dim(0) != batch) throw DimensionError("selfcond_nll: batch mismatch");
    const std::int64_t len = static_cast<std::int64_t>(s_pred[0].indices.size());
    auto inputs = teacher_inputs(s_pred, self.bos_id(), len);
    Tensor logits = self.logits(h_p_frozen, flatten_targets(s_down), inputs, batch, len, train, rng);
    return softmax_cross_entropy(logits, flatten_targets(s_pred));
}

TokenSequence sample_base_tokens(const ContextEncoder& enc, const BaseDecoder& base,
                                 const Matrix& context, double temperature, Rng& rng) {
    NoGradGuard ng;
    Rng dummy(0);
    const Matrix* ptr = &context;
    Tensor ctx = pack_time_major(std::span<const Matrix* const>(&ptr, 1));
    Tensor h_p = enc.forward(ctx, false, dummy);
    const std::int64_t s = base.token_len();
    const std::int64_t K = base.bos_id();  // BOS sits one past the codebook
    TokenSequence seq;
    seq.kind = CodebookKind::downsampled;
    std::vector<std::int64_t> inputs{base.bos_id()};
    for (std::int64_t t = 0; t < s; ++t) {  // full-prefix recompute per emitted token
        const auto len = static_cast<std::int64_t>(inputs.size());
        Tensor logits = base.logits(h_p, inputs, 1, len, false, dummy);
        auto row = logits.data().subspan(static_cast<std::size_t>((len - 1) * K),
                                         static_cast<std::size_t>(K));
        const std::int64_t next = rng.sample_from_logits(row, temperature);
        seq.indices.push_back(next);
        inputs.push_back(next);
    }
    return seq;
}

// ---------------------------------------------------------------------------
// stage-2 training
// ---------------------------------------------------------------------------

Stage2Model::Stage2Model(const Stage2TrainConfig& cfg_in, Rng& init_rng)
    : cfg(cfg_in.model),
      encoder((cfg.validate(), low_params), cfg, init_rng),
      base(low_params, cfg, init_rng),
      selfcond(high_params, cfg, init_rng),
      low_opt(low_params, cfg_in.lr),
      high_opt(high_params, cfg_in.lr),
      train_cfg(cfg_in) {}

std::map<std::string, double> stage2_header_numbers(const Stage2TrainConfig& cfg) {
    return {
        {"variates", static_cast<double>(cfg.model.variates)},
        {"history_len", static_cast<double>(cfg.model.history_len)},
        {"token_len", static_cast<double>(cfg.model.token_len)},
        {"model_dim", static_cast<double>(cfg.model.model_dim)},
        {"codebook_target", static_cast<double>(cfg.model.codebook_target)},
        {"codebook_down", static_cast<double>(cfg.model.codebook_down)},
        {"enc_layers", static_cast<double>(cfg.model.enc_layers)},
        {"base_layers", static_cast<double>(cfg.model.base_layers)},
        {"selfcond_layers", static_cast<double>(cfg.model.selfcond_layers)},
        {"heads", static_cast<double>(cfg.model.heads)},
        {"dropout", cfg.model.dropout},
        {"use_self_condition", cfg.model.use_self_condition ? 1.0 : 0.0},
        {"steps_phase1", static_cast<double>(cfg.steps_phase1)},
        {"steps_phase2", static_cast<double>(cfg.steps_phase2)},
        {"batch", static_cast<double>(cfg.batch)},
        {"lr", cfg.lr},
        {"selfcond_source", cfg.selfcond_source == CondSource::generated ? 1.0 : 0.0},
    };
}

namespace {

void save_adam_state(Checkpoint& ck, const Adam& opt, const std::string& tag) {
    for (std::size_t i = 0; i < opt.slot_count(); ++i) {
        const auto& name = opt.slot_name(i);
        const auto n1 = static_cast<std::int64_t>(opt.moment1(i).size());
        ck.add("optim." + name + ".m", {n1}, opt.moment1(i));
        ck.add("optim." + name + ".v", {n1}, opt.moment2(i));
    }
    ck.add_scalar("optim." + tag + ".t", static_cast<double>(opt.step_count()));
}

void load_adam_state(const Checkpoint& ck, Adam& opt, const std::string& tag) {
    for (std::size_t i = 0; i < opt.slot_count(); ++i) {
        const auto& name = opt.slot_name(i);
        opt.moment1(i) = ck.require("optim." + name + ".m").data;
        opt.moment2(i) = ck.require("optim." + name + ".v").data;
    }
    opt.set_step_count(static_cast<std::int64_t>(ck.scalar("optim." + tag + ".t")));
}

}  // namespace

void Stage2Model::save(const std::string& path, std::uint64_t seed,
                       const std::map<std::string, double>& stage1_numbers) const {
    Checkpoint ck;
    ck.seed = seed;
    ck.header_strings["model"] = "hdt.stage2";
    ck.header_numbers = stage2_header_numbers(train_cfg);
    for (const auto& [k, v] : stage1_numbers) ck.header_numbers["s1." + k] = v;
    ck.add_params(low_params);
    ck.add_params(high_params);
    save_adam_state(ck, low_opt, "stage2.low");
    save_adam_state(ck, high_opt, "stage2.high");
    ck.add_scalar("stage2.phase", static_cast<double>(phase));
    ck.add_scalar("stage2.step_phase1", static_cast<double>(step_phase1));
    ck.add_scalar("stage2.step_phase2", static_cast<double>(step_phase2));
    ck.save(path);
}

Stage2Model Stage2Model::load_model(const std::string& path) {
    Checkpoint ck = Checkpoint::load(path);
    if (ck.header_strings.count("model") == 0 || ck.header_strings.at("model") != "hdt.stage2") {
        throw ConfigurationError("'" + path + "' is not a stage-2 checkpoint");
    }
    const auto& n = ck.header_numbers;
    Stage2TrainConfig cfg;
    cfg.model.variates = static_cast<std::int64_t>(n.at("variates"));
    cfg.model.history_len = static_cast<std::int64_t>(n.at("history_len"));
    cfg.model.token_len = static_cast<std::int64_t>(n.at("token_len"));
    cfg.model.model_dim = static_cast<std::int64_t>(n.at("model_dim"));
    cfg.model.codebook_target = static_cast<std::int64_t>(n.at("codebook_target"));
    cfg.model.codebook_down = static_cast<std::int64_t>(n.at("codebook_down"));
    cfg.model.enc_layers = static_cast<std::int64_t>(n.at("enc_layers"));
    cfg.model.base_layers = static_cast<std::int64_t>(n.at("base_layers"));
    cfg.model.selfcond_layers = static_cast<std::int64_t>(n.at("selfcond_layers"));
    cfg.model.heads = static_cast<std::int64_t>(n.at("heads"));
    cfg.model.dropout = n.at("dropout");
    cfg.model.use_self_condition = n.at("use_self_condition") != 0.0;
    cfg.steps_phase1 = static_cast<std::int64_t>(n.at("steps_phase1"));
    cfg.steps_phase2 = static_cast<std::int64_t>(n.at("steps_phase2"));
    cfg.batch = static_cast<std::int64_t>(n.at("batch"));
    cfg.lr = n.at("lr");
    cfg.selfcond_source = n.at("selfcond_source") != 0.0 ? CondSource::generated : CondSource::ground_truth;
    cfg.seed = ck.seed;

    Rng init(0);
    Stage2Model model(cfg, init);
    ck.load_into(model.low_params);
    ck.load_into(model.high_params);
    load_adam_state(ck, model.low_opt, "stage2.low");
    load_adam_state(ck, model.high_opt, "stage2.high");
    model.phase = static_cast<std::int64_t>(ck.scalar("stage2.phase"));
    model.step_phase1 = static_cast<std::int64_t>(ck.scalar("stage2.step_phase1"));
    model.step_phase2 = static_cast<std::int64_t>(ck.scalar("stage2.step_phase2"));
    return model;
}

Stage2Model train_stage2(const std::vector<SeriesWindow>& train_windows, Stage1Model& stage1,
                         const Stage2TrainConfig& cfg, const std::string& checkpoint_path,
                         const Stage2LogFn& log) {
    if (train_windows.empty()) throw StateError("train_stage2: no training windows");
    cfg.model.validate();
    const auto& s1 = stage1.cfg.tokenizer;
    if (cfg.model.token_len != s1.tau / 2) {
        throw ConfigurationError("train_stage2: token_len " + std::to_string(cfg.model.token_len) +
                                 " does not match stage-1 tau/2 = " + std::to_string(s1.tau / 2));
    }
    if (cfg.model.model_dim != s1.code_dim) {
        throw ConfigurationError("train_stage2: model_dim must equal the stage-1 code dim " +
                                 std::to_string(s1.code_dim));
    }
    if (cfg.model.variates != s1.variates) {
        throw ConfigurationError("train_stage2: variate count differs from stage 1");
    }
    if (cfg.model.codebook_target != s1.codebook_size || cfg.model.codebook_down != s1.codebook_size) {
        throw ConfigurationError("train_stage2: codebook sizes must match stage 1 (" +
                                 std::to_string(s1.codebook_size) + ")");
    }
    for (const auto& w : train_windows) {
        if (w.h() != cfg.model.history_len || w.tau() != s1.tau || w.variates() != s1.variates) {
            throw ConfigurationError("train_stage2: window shape does not match the configuration");
        }
    }

    Rng root(cfg.seed);
    Rng init_rng = root.stream(3);
    Rng sample_rng = root.stream(4);
    Rng dropout_rng = root.stream(5);
    Rng cond_rng = root.stream(6);

    Stage2Model model(cfg, init_rng);

    // Token targets from the frozen stage-1 tokenizers, computed once.
    const std::int64_t kernel = stage1.effective_kernel();
    std::vector<TokenSequence> pred_tokens, down_tokens;
    pred_tokens.reserve(train_windows.size());
    down_tokens.reserve(train_windows.size());
    for (const auto& w : train_windows) {
        pred_tokens.push_back(stage1.target.tokenize(w.target));
        down_tokens.push_back(stage1.downsampled.tokenize(downsample(w.target, kernel).values));
    }

    const auto stage1_numbers = stage1_header_numbers(stage1.cfg);
    std::string last_good = "<none>";
    auto maybe_checkpoint = [&](std::int64_t k, std::int64_t total) {
        if (!checkpoint_path.empty() && (k % cfg.checkpoint_every == 0 || k == total)) {
            model.save(checkpoint_path, cfg.seed, stage1_numbers);
            last_good = checkpoint_path;
        }
    };

    std::vector<const Matrix*> ctx_batch(static_cast<std::size_t>(cfg.batch));
    std::vector<TokenSequence> down_batch(static_cast<std::size_t>(cfg.batch));
    std::vector<TokenSequence> pred_batch(static_cast<std::size_t>(cfg.batch));
    std::vector<std::size_t> picks(static_cast<std::size_t>(cfg.batch));

    auto draw_batch = [&] {
        for (std::int64_t b = 0; b < cfg.batch; ++b) {
            const auto i = static_cast<std::size_t>(sample_rng.next_below(train_windows.size()));
            picks[static_cast<std::size_t>(b)] = i;
            ctx_batch[static_cast<std::size_t>(b)] = &train_windows[i].context;
            down_batch[static_cast<std::size_t>(b)] = down_tokens[i];
            pred_batch[static_cast<std::size_t>(b)] = pred_tokens[i];
        }
    };

    for (std::int64_t k = 1; k <= cfg.steps_phase1; ++k) {
        draw_batch();
        model.low_opt.zero_grad();
        Tensor contexts = pack_time_major(ctx_batch);
        Tensor loss = base_nll(model.encoder, model.base, contexts, down_batch, true, dropout_rng);
        const double nll = loss.item();
        if (!std::isfinite(nll)) {
            throw TrainingError("stage 2 phase 1 loss became non-finite at step " + std::to_string(k) +
                                "; last good checkpoint: " + last_good);
        }
        loss.backward();
        model.low_opt.step();
        model.low_opt.zero_grad();
        model.step_phase1 = k;
        if (log) log({1, k, nll});
        maybe_checkpoint(k, cfg.steps_phase1);
    }
    model.phase = 1;

    for (std::int64_t k = 1; k <= cfg.steps_phase2; ++k) {
        draw_batch();
        if (cfg.selfcond_source == CondSource::generated) {
            for (std::int64_t b = 0; b < cfg.batch; ++b) {
                down_batch[static_cast<std::size_t>(b)] = sample_base_tokens(
                    model.encoder, model.base, train_windows[picks[static_cast<std::size_t>(b)]].context,
                    1.0, cond_rng);
            }
        }
        Tensor h_p;
        {
            NoGradGuard ng;  // E_T and B stay frozen through phase 2
            Rng dummy(0);
            h_p = model.encoder.forward(pack_time_major(ctx_batch), false, dummy);
        }
        model.high_opt.zero_grad();
        Tensor loss = selfcond_nll(model.selfcond, h_p, down_batch, pred_batch, true, dropout_rng);
        const double nll = loss.item();
        if (!std::isfinite(nll)) {
            throw TrainingError("stage 2 phase 2 loss became non-finite at step " + std::to_string(k) +
                                "; last good checkpoint: " + last_good);
        }
        loss.backward();
        model.high_opt.step();
        model.high_opt.zero_grad();
        model.step_phase2 = k;
        if (log) log({2, k, nll});
        maybe_checkpoint(k, cfg.steps_phase2);
    }
    if (cfg.steps_phase2 > 0) model.phase = 2;
    return model;
}

}  // namespace hdt
