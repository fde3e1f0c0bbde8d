#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "fd_check.hpp"
#include "hdt/data.hpp"
#include "hdt/packing.hpp"
#include "hdt/vq.hpp"

using namespace hdt;

namespace {

TokenizerConfig small_config() {
    TokenizerConfig cfg;
    cfg.variates = 4;
    cfg.tau = 48;
    cfg.codebook_size = 16;
    cfg.code_dim = 8;
    return cfg;
}

std::vector<SeriesWindow> sinusoid_windows(std::int64_t count, std::int64_t tau = 48,
                                           std::int64_t D = 4, std::uint64_t seed = 3) {
    SynthSpec spec;
    spec.variates = D;
    spec.length = 96 + tau + count;
    spec.seed = seed;
    Dataset ds = synth_sinusoid(spec);
    ds.split = ds.length();
    auto ws = windows(ds, {96, tau, 1, WindowSpec::Split::train});
    ws.resize(static_cast<std::size_t>(count));
    return ws;
}

}  // namespace

TEST_CASE("nearest-neighbour lookup matches exhaustive search") {
    Rng rng(41);
    ParamGroup pg;
    Codebook cb(pg, "cb", 128, 16, rng);
    const auto entries = cb.entries().data();
    for (int rep = 0; rep < 1000; ++rep) {
        std::vector<double> v(16);
        rng.fill_uniform(v, -1.2, 1.2);
        // independent brute-force search over the raw entry buffer
        std::int64_t best = 0;
        double best_d = 1e300;
        for (std::int64_t k = 0; k < 128; ++k) {
            double d2 = 0.0;
            for (std::int64_t j = 0; j < 16; ++j) {
                const double diff = v[static_cast<std::size_t>(j)] - entries[k * 16 + j];
                d2 += diff * diff;
            }
            if (d2 < best_d) {
                best_d = d2;
                best = k;
            }
        }
        CHECK(cb.lookup(v) == best);
    }
}

TEST_CASE("quantize hand cases") {
    TokenizerConfig cfg = small_config();
    cfg.code_dim = 2;
    cfg.codebook_size = 6;
    Rng rng(42);
    TokenizerModel model(cfg, CodebookKind::target, "m", rng);

    auto e = model.codebook().entries().mutable_data();
    std::fill(e.begin(), e.end(), 7.0);  // push everything far away
    e[0 * 2 + 0] = 1.0; e[0 * 2 + 1] = 0.0;
    e[1 * 2 + 0] = 0.0; e[1 * 2 + 1] = 1.0;
    e[3 * 2 + 0] = -0.5; e[3 * 2 + 1] = -0.5;

    SUBCASE("closest entry wins") {
        Tensor latent({1, 1, 2}, {0.9, 0.1});
        auto q = model.quantize(latent);
        CHECK(q.tokens[0].indices[0] == 0);
        CHECK(q.straight_through.data()[0] == 1.0);
        CHECK(q.straight_through.data()[1] == 0.0);
    }
    SUBCASE("exact match has zero quantization error") {
        Tensor latent({1, 1, 2}, {-0.5, -0.5});
        auto q = model.quantize(latent);
        CHECK(q.tokens[0].indices[0] == 3);
        CHECK(q.straight_through.data()[0] == -0.5);
        CHECK(q.straight_through.data()[1] == -0.5);
    }
    SUBCASE("equidistant entries resolve to the lowest index") {
        e[4 * 2 + 0] = 1.0; e[4 * 2 + 1] = 0.0;  // duplicate of entry 1's position
        e[1 * 2 + 0] = 1.0; e[1 * 2 + 1] = 0.0;
        e[0 * 2 + 0] = 7.0; e[0 * 2 + 1] = 7.0;
        Tensor latent({1, 1, 2}, {1.0, 0.0});
        auto q = model.quantize(latent);
        CHECK(q.tokens[0].indices[0] == 1);
    }
    SUBCASE("usage counters increment") {
        Tensor latent({1, 1, 2}, {0.9, 0.1});
        auto before = model.codebook().usage()[0];
        model.quantize(latent);
        CHECK(model.codebook().usage()[0] == before + 1);
    }
}

TEST_CASE("straight-through estimator has identity Jacobian to the latent") {
    TokenizerConfig cfg = small_config();
    Rng rng(43);
    TokenizerModel model(cfg, CodebookKind::target, "m", rng);

    Rng lr(44);
    Tensor latent = Tensor::rand_uniform({2, 6, cfg.code_dim}, lr, -0.9, 0.9, true);
    auto q = model.quantize(latent);
    Tensor probe = Tensor::rand_uniform({2, 6, cfg.code_dim}, lr, -1, 1);
    sum(mul(q.straight_through, probe)).backward();

    REQUIRE(latent.has_grad());
    for (std::size_t i = 0; i < probe.data().size(); ++i)
        CHECK(latent.grad()[i] == probe.data()[i]);
    // and the codebook saw nothing through the straight-through path
    CHECK(!model.codebook().entries().has_grad());
}

TEST_CASE("stop-gradient routing in the vq loss") {
    TokenizerConfig cfg = small_config();
    Rng rng(45);
    TokenizerModel model(cfg, CodebookKind::target, "m", rng);
    Rng lr(46);
    Tensor latent = Tensor::rand_uniform({1, 6, cfg.code_dim}, lr, -0.9, 0.9, true);
    auto q = model.quantize(latent);
    Tensor x = Tensor::rand_uniform({1, 4, 48}, lr, -1, 1);
    Tensor x_hat = Tensor::rand_uniform({1, 4, 48}, lr, -1, 1);
    VqLoss loss = model.vq_loss(x, x_hat, latent, q.codes);

    SUBCASE("codebook term reaches only the codebook") {
        loss.codebook.backward();
        CHECK(!latent.has_grad());
        REQUIRE(model.codebook().entries().has_grad());
        double norm = 0.0;
        for (double g : model.codebook().entries().grad()) norm += g * g;
        CHECK(norm > 0.0);
    }
    SUBCASE("commitment term reaches only the encoder side") {
        loss.commitment.backward();
        CHECK(latent.has_grad());
        CHECK(!model.codebook().entries().has_grad());
    }
    SUBCASE("beta zero removes exactly the commitment part") {
        TokenizerConfig cfg0 = cfg;
        cfg0.beta = 0.0;
        Rng r2(45);
        TokenizerModel m0(cfg0, CodebookKind::target, "m", r2);
        auto q0 = m0.quantize(latent);
        VqLoss l0 = m0.vq_loss(x, x_hat, latent, q0.codes);
        CHECK(l0.total.item() ==
              doctest::Approx(l0.reconstruction.item() + l0.codebook.item()).epsilon(1e-15));
    }
    SUBCASE("perfect reconstruction and quantization gives zero total") {
        VqLoss z = model.vq_loss(x, x, latent, detach(latent));
        CHECK(z.total.item() == 0.0);
    }
}

TEST_CASE("encoder contracts") {
    TokenizerConfig cfg = small_config();
    Rng rng(47);
    TokenizerModel model(cfg, CodebookKind::target, "m", rng);
    Rng dr(1);

    SUBCASE("tau=48 gives 24 latent positions, bounded by tanh") {
        Tensor x = Tensor::zeros({2, 4, 48});
        Tensor latent = model.encode(x, false, dr);
        CHECK(latent.shape() == Shape{2, 24, cfg.code_dim});
        for (double v : latent.data()) CHECK(std::abs(v) < 1.0);
    }
    SUBCASE("wrong variate count or odd tau is a configuration error") {
        CHECK_THROWS_AS(model.encode(Tensor::zeros({1, 3, 48}), false, dr), ConfigurationError);
        CHECK_THROWS_AS(model.encode(Tensor::zeros({1, 4, 47}), false, dr), ConfigurationError);
    }
    SUBCASE("perturbations stay within the conv receptive field") {
        Rng xr(48);
        std::vector<double> base(4 * 48);
        xr.fill_uniform(base, -1, 1);
        const std::int64_t t = 20;
        auto nudged = base;
        for (std::int64_t d = 0; d < 4; ++d) nudged[d * 48 + t] += 0.5;

        NoGradGuard ng;
        Tensor l0 = model.encode(Tensor({1, 4, 48}, base), false, dr);
        Tensor l1 = model.encode(Tensor({1, 4, 48}, nudged), false, dr);
        bool any_changed = false;
        for (std::int64_t j = 0; j < 24; ++j) {
            bool changed = false;
            for (std::int64_t c = 0; c < cfg.code_dim; ++c)
                if (l0.at({0, j, c}) != l1.at({0, j, c})) changed = true;
            if (changed) any_changed = true;
            // receptive field of latent j spans inputs [2j-5, 2j+6]
            if (2 * j + 6 < t || 2 * j - 5 > t) CHECK(!changed);
        }
        CHECK(any_changed);
    }
}

TEST_CASE("decoder contracts") {
    TokenizerConfig cfg = small_config();
    Rng rng(49);
    TokenizerModel model(cfg, CodebookKind::target, "m", rng);
    Rng dr(1);

    Tensor z = Tensor::rand_uniform({2, 24, cfg.code_dim}, dr, -1, 1);
    Tensor y1 = model.decode(z, false, dr);
    CHECK(y1.shape() == Shape{2, 4, 48});
    Tensor y2 = model.decode(z, false, dr);
    for (std::size_t i = 0; i < y1.data().size(); ++i) CHECK(y1.data()[i] == y2.data()[i]);

    CHECK_THROWS_AS(model.decode(Tensor::zeros({1, 23, cfg.code_dim}), false, dr),
                    ConfigurationError);
}

TEST_CASE("token round-trip preserves the window shape") {
    TokenizerConfig cfg = small_config();
    Rng rng(50);
    TokenizerModel model(cfg, CodebookKind::target, "m", rng);
    auto ws = sinusoid_windows(3);
    for (const auto& w : ws) {
        TokenSequence tok = model.tokenize(w.target);
        CHECK(static_cast<std::int64_t>(tok.indices.size()) == 24);
        for (auto t : tok.indices) {
            CHECK(t >= 0);
            CHECK(t < cfg.codebook_size);
        }
        Matrix rec = model.detokenize(tok);
        CHECK(rec.rows == w.target.rows);
        CHECK(rec.cols == w.target.cols);
    }
}

TEST_CASE("l2 regularization examples") {
    TokenizerConfig cfg = small_config();
    cfg.code_dim = 3;
    Rng rng(51);
    TokenizerModel model(cfg, CodebookKind::target, "m", rng);

    SUBCASE("parallel rows contribute zero, antiparallel contribute four") {
        Tensor latent({1, 2, 3}, {2.0, 4.0, 4.0, /*row2*/ -1.0, -2.0, -2.0});
        Tensor codes({1, 2, 3}, {1.0, 2.0, 2.0, /*row2*/ 1.0, 2.0, 2.0});
        // row 1: latent is 2x its code -> 0; row 2: antiparallel -> 4
        // (within the 1e-8 the norm regularizer adds)
        Tensor loss = model.l2_reg_loss(latent, codes);
        CHECK(loss.item() == doctest::Approx(2.0).epsilon(1e-7));  // (0 + 4) / 2 rows
    }
    SUBCASE("scale invariance in any latent row") {
        Rng lr(52);
        auto v = hdt_test::random_vec(lr, 6, 0.2, 1.0);
        auto c = hdt_test::random_vec(lr, 6, 0.2, 1.0);
        Tensor l1({1, 2, 3}, v);
        auto scaled = v;
        for (int i = 0; i < 3; ++i) scaled[static_cast<std::size_t>(i)] *= 9.5;
        Tensor l2({1, 2, 3}, scaled);
        Tensor cd({1, 2, 3}, c);
        CHECK(model.l2_reg_loss(l1, cd).item() ==
              doctest::Approx(model.l2_reg_loss(l2, cd).item()).epsilon(1e-9));
    }
    SUBCASE("gradient vs finite differences") {
        Rng lr(53);
        hdt_test::fd_check(
            [&model](const std::vector<Tensor>& in) {
                return model.l2_reg_loss(reshape(in[0], {1, 2, 3}), reshape(in[1], {1, 2, 3}));
            },
            {hdt_test::random_vec(lr, 6, 0.3, 1.0), hdt_test::random_vec(lr, 6, 0.3, 1.0)},
            {{2, 3}, {2, 3}});
    }
}

TEST_CASE("gan loss values") {
    TokenizerConfig cfg = small_config();
    Rng rng(54);
    TokenizerModel model(cfg, CodebookKind::target, "m", rng);
    Rng dr(1);

    SUBCASE("zeroed discriminator gives the coin-flip losses") {
        for (auto& p : model.discriminator_params().all()) {
            auto d = p.value.mutable_data();
            std::fill(d.begin(), d.end(), 0.0);
        }
        Tensor x = Tensor::rand_uniform({2, 4, 48}, dr, -1, 1);
        Tensor x_hat = Tensor::rand_uniform({2, 4, 48}, dr, -1, 1);
        GanLoss gl = model.gan_losses(x, x_hat, false, dr);
        CHECK(gl.d_loss.item() == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
        CHECK(gl.g_loss.item() == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    }
    SUBCASE("saturated logits at +-15 give a near-zero discriminator loss") {
        Tensor real({4}, {15.0, 15.0, 15.0, 15.0});
        Tensor fake({4}, {-15.0, -15.0, -15.0, -15.0});
        Tensor d_loss = neg(mean(add(log_sigmoid(real), log_sigmoid(neg(fake)))));
        CHECK(d_loss.item() == doctest::Approx(0.0).epsilon(1e-5));
        CHECK(d_loss.item() < 1e-5);
    }
}

TEST_CASE("adaptive lambda arithmetic") {
    CHECK(TokenizerModel::adaptive_lambda(2.0, 2.0) == doctest::Approx(1.0).epsilon(1e-5));
    CHECK(TokenizerModel::adaptive_lambda(1.0, 0.0) == 1e4);  // clamp ceiling
    CHECK(TokenizerModel::adaptive_lambda(0.0, 3.0) == 0.0);
}

TEST_CASE("stage-1 training smoke") {
    auto ws = sinusoid_windows(64);
    Stage1Config cfg;
    cfg.tokenizer = small_config();
    cfg.steps = 40;
    cfg.batch = 8;
    cfg.lr = 1e-3;
    cfg.seed = 7;
    cfg.checkpoint_every = 40;

    std::vector<Stage1LossRow> rows;
    const std::string ckpt = "/tmp/hdt_test_stage1.ckpt";
    Stage1Model model = train_stage1(ws, cfg, ckpt, [&rows](const Stage1LossRow& r) { rows.push_back(r); });

    SUBCASE("losses are finite from the first step and the gate fires at ceil(0.75K)") {
        REQUIRE(rows.size() == 40);
        for (const auto& r : rows) {
            CHECK(std::isfinite(r.rec));
            CHECK(std::isfinite(r.codebook));
            CHECK(std::isfinite(r.l2));
        }
        const std::int64_t gate = 30;  // ceil(0.75 * 40)
        for (const auto& r : rows) {
            if (r.step < gate) {
                CHECK(r.gan_d == 0.0);
                CHECK(r.lambda == 0.0);
            }
        }
        CHECK(rows[static_cast<std::size_t>(gate - 1)].gan_d != 0.0);
    }
    SUBCASE("at least two distinct codes in use") {
        CHECK(model.target.codebook().used_codes() >= 2);
        CHECK(model.downsampled.codebook().used_codes() >= 2);
    }
    SUBCASE("checkpoint round-trips bit-exactly") {
        Stage1Model back = Stage1Model::load_model(ckpt);
        const auto& a = model.target.generator_params().all();
        const auto& b = back.target.generator_params().all();
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].name == b[i].name);
            REQUIRE(a[i].value.data().size() == b[i].value.data().size());
            for (std::size_t j = 0; j < a[i].value.data().size(); ++j)
                CHECK(a[i].value.data()[j] == b[i].value.data()[j]);
        }
        CHECK(back.step == 40);
    }
    std::remove(ckpt.c_str());
}

TEST_CASE("disabling the gan phase reproduces the pure-vq prefix bit-exactly") {
    auto ws = sinusoid_windows(32);
    Stage1Config cfg;
    cfg.tokenizer = small_config();
    cfg.steps = 20;
    cfg.batch = 4;
    cfg.seed = 19;
    cfg.checkpoint_every = 100;

    std::vector<Stage1LossRow> with_gan, without_gan;
    cfg.gan_start_frac = 0.75;  // gate at step 15
    train_stage1(ws, cfg, "", [&](const Stage1LossRow& r) { with_gan.push_back(r); });
    cfg.gan_start_frac = 2.0;  // gate beyond the horizon: pure VQ throughout
    train_stage1(ws, cfg, "", [&](const Stage1LossRow& r) { without_gan.push_back(r); });

    for (std::size_t i = 0; i < 14; ++i) {
        CHECK(with_gan[i].rec == without_gan[i].rec);
        CHECK(with_gan[i].codebook == without_gan[i].codebook);
        CHECK(with_gan[i].commit == without_gan[i].commit);
        CHECK(with_gan[i].l2 == without_gan[i].l2);
    }
    for (const auto& r : without_gan) {
        CHECK(r.gan_d == 0.0);
        CHECK(r.gan_g == 0.0);
    }
}
