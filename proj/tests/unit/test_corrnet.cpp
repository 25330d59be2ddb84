#include <doctest.h>

#include <cmath>
#include <vector>

#include "corrfabr/aggregate/aggregation.hpp"
#include "corrfabr/core/mask.hpp"
#include "corrfabr/core/rng.hpp"
#include "corrfabr/fusion/corrnet.hpp"

using namespace corrfabr;
using core::SeededRng;
using core::Tensor;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, SeededRng& rng, double scale = 1.0) {
    Tensor t(std::move(shape));
    for (double& v : t.vec()) v = scale * rng.normal();
    return t;
}

fusion::CorrNetModel random_model(std::size_t dr, std::size_t dp, std::size_t k, double lambda,
                                  SeededRng& rng) {
    fusion::CorrNetModel m = fusion::make_corrnet(dr, dp, k, lambda, rng);
    // Non-zero biases so every gradient path is exercised.
    for (double& v : m.enc_bias.vec()) v = 0.1 * rng.normal();
    for (double& v : m.dec_rad_bias.vec()) v = 0.1 * rng.normal();
    for (double& v : m.dec_pat_bias.vec()) v = 0.1 * rng.normal();
    return m;
}

// Finite-difference oracle: central differences of the minimized objective.
double objective_of(const fusion::CorrNetModel& m, const Tensor& rad, const Tensor& pat) {
    return fusion::total_loss(m, rad, pat).objective;
}

double max_relative_grad_error(fusion::CorrNetModel m, const Tensor& rad, const Tensor& pat,
                               double h = 1e-6) {
    const fusion::CorrNetGradients g = fusion::corrnet_grad(m, rad, pat);
    std::vector<std::pair<Tensor*, const Tensor*>> params = {
        {&m.enc_rad, &g.enc_rad},           {&m.enc_pat, &g.enc_pat},
        {&m.enc_bias, &g.enc_bias},         {&m.dec_rad, &g.dec_rad},
        {&m.dec_rad_bias, &g.dec_rad_bias}, {&m.dec_pat, &g.dec_pat},
        {&m.dec_pat_bias, &g.dec_pat_bias}};
    double worst = 0.0;
    for (auto& [param, grad] : params) {
        for (std::size_t i = 0; i < param->numel(); ++i) {
            const double keep = param->at(i);
            param->at(i) = keep + h;
            const double up = objective_of(m, rad, pat);
            param->at(i) = keep - h;
            const double down = objective_of(m, rad, pat);
            param->at(i) = keep;
            const double fd = (up - down) / (2.0 * h);
            const double a = grad->at(i);
            const double rel = std::abs(a - fd) / std::max({1e-6, std::abs(a), std::abs(fd)});
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

}  // namespace

TEST_CASE("forward matches an explicit loop-evaluated affine map") {
    SeededRng rng(11);
    const std::size_t b = 6, dr = 7, dp = 4, k = 3;
    fusion::CorrNetModel m = random_model(dr, dp, k, 2.0, rng);
    const Tensor rad = random_tensor({b, dr}, rng);
    const Tensor pat = random_tensor({b, dp}, rng);
    const auto fwd = fusion::corrnet_forward(m, rad, pat);

    for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t d = 0; d < k; ++d) {
            double hr = m.enc_bias.at(d), hp = m.enc_bias.at(d);
            for (std::size_t j = 0; j < dr; ++j) hr += m.enc_rad.at(d, j) * rad.at(i, j);
            for (std::size_t j = 0; j < dp; ++j) hp += m.enc_pat.at(d, j) * pat.at(i, j);
            CHECK(fwd.h_rad.at(i, d) == doctest::Approx(hr).epsilon(1e-12));
            CHECK(fwd.h_pat.at(i, d) == doctest::Approx(hp).epsilon(1e-12));
        }
        for (std::size_t j = 0; j < dr; ++j) {
            double rec = m.dec_rad_bias.at(j);
            for (std::size_t d = 0; d < k; ++d) rec += m.dec_rad.at(j, d) * fwd.h_rad.at(i, d);
            CHECK(fwd.rad_recon.at(i, j) == doctest::Approx(rec).epsilon(1e-12));
        }
    }
}

TEST_CASE("forward shapes and zero model") {
    SeededRng rng(3);
    fusion::CorrNetModel zero;
    zero.latent_dim = 5;
    zero.lambda = 2.0;
    zero.enc_rad = Tensor({5, 64});
    zero.enc_pat = Tensor({5, 64});
    zero.enc_bias = Tensor({5});
    zero.dec_rad = Tensor({64, 5});
    zero.dec_rad_bias = Tensor({64});
    zero.dec_pat = Tensor({64, 5});
    zero.dec_pat_bias = Tensor({64});
    const Tensor rad = random_tensor({50, 64}, rng);
    const Tensor pat = random_tensor({50, 64}, rng);
    const auto fwd = fusion::corrnet_forward(zero, rad, pat);
    CHECK(fwd.h_rad.shape() == std::vector<std::size_t>{50, 5});
    for (double v : fwd.h_rad.vec()) CHECK(v == 0.0);
    for (double v : fwd.rad_recon.vec()) CHECK(v == 0.0);
}

TEST_CASE("corr_loss reference values") {
    SUBCASE("identical non-constant latents give k") {
        SeededRng rng(5);
        const Tensor h = random_tensor({10, 4}, rng);
        CHECK(fusion::corr_loss(h, h) == doctest::Approx(4.0).epsilon(1e-6));
    }
    SUBCASE("anti-correlated single dim gives -1") {
        Tensor a({4, 1}, {1, 2, 3, 4});
        Tensor b({4, 1}, {-1, -2, -3, -4});
        CHECK(fusion::corr_loss(a, b) == doctest::Approx(-1.0).epsilon(1e-6));
    }
    SUBCASE("hand-computed Pearson 0.8") {
        Tensor a({4, 1}, {1, 2, 3, 4});
        Tensor b({4, 1}, {1, 3, 2, 4});
        CHECK(fusion::corr_loss(a, b) == doctest::Approx(0.8).epsilon(1e-9));
    }
    SUBCASE("batch of one is rejected") {
        Tensor a({1, 2}, {1, 2});
        CHECK_THROWS_AS(fusion::corr_loss(a, a), InputError);
    }
    SUBCASE("bounded by [-k, k] on random latents") {
        SeededRng rng(6);
        for (int rep = 0; rep < 50; ++rep) {
            const std::size_t b = 2 + rng.uniform_int(20), k = 1 + rng.uniform_int(6);
            const Tensor hr = random_tensor({b, k}, rng);
            const Tensor hp = random_tensor({b, k}, rng);
            const double c = fusion::corr_loss(hr, hp);
            CHECK(c <= static_cast<double>(k) + 1e-12);
            CHECK(c >= -static_cast<double>(k) - 1e-12);
        }
    }
    SUBCASE("constant batch hits the eps path and yields 0") {
        Tensor a({3, 2}, {1, 1, 1, 1, 1, 1});
        CHECK(fusion::corr_loss(a, a) == doctest::Approx(0.0));
    }
}

TEST_CASE("total_loss equals an independent scalar recomputation") {
    SeededRng rng(21);
    const std::size_t b = 9, dr = 5, dp = 3, k = 2;
    fusion::CorrNetModel m = random_model(dr, dp, k, 2.0, rng);
    const Tensor rad = random_tensor({b, dr}, rng);
    const Tensor pat = random_tensor({b, dp}, rng);

    const auto fwd = fusion::corrnet_forward(m, rad, pat);
    double mse = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
        double er = 0.0, ep = 0.0;
        for (std::size_t j = 0; j < dr; ++j) {
            const double e = fwd.rad_recon.at(i, j) - rad.at(i, j);
            er += e * e;
        }
        for (std::size_t j = 0; j < dp; ++j) {
            const double e = fwd.pat_recon.at(i, j) - pat.at(i, j);
            ep += e * e;
        }
        mse += er / dr + ep / dp;
    }
    mse /= b;
    const double pearson_sum = fusion::corr_loss(fwd.h_rad, fwd.h_pat);

    const auto loss = fusion::total_loss(m, rad, pat);
    CHECK(loss.recon == doctest::Approx(mse).epsilon(1e-12));
    CHECK(loss.objective == doctest::Approx(mse - 2.0 * pearson_sum).epsilon(1e-12));
}

TEST_CASE("perfect shared autoencoder: recon 0, corr k") {
    const std::size_t d = 4;
    fusion::CorrNetModel m;
    m.latent_dim = d;
    m.lambda = 2.0;
    m.enc_rad = Tensor({d, d});
    m.enc_pat = Tensor({d, d});
    m.enc_bias = Tensor({d});
    m.dec_rad = Tensor({d, d});
    m.dec_rad_bias = Tensor({d});
    m.dec_pat = Tensor({d, d});
    m.dec_pat_bias = Tensor({d});
    for (std::size_t i = 0; i < d; ++i) {
        m.enc_rad.at(i, i) = 1.0;
        m.enc_pat.at(i, i) = 1.0;
        m.dec_rad.at(i, i) = 1.0;
        m.dec_pat.at(i, i) = 1.0;
    }
    SeededRng rng(8);
    const Tensor x = random_tensor({12, d}, rng);
    const auto loss = fusion::total_loss(m, x, x);
    CHECK(loss.recon == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(loss.corr == doctest::Approx(static_cast<double>(d)).epsilon(1e-6));

    // Exact reconstruction at lambda = 0 is a stationary point for the
    // decoders.
    m.lambda = 0.0;
    const auto g = fusion::corrnet_grad(m, x, x);
    for (double v : g.dec_rad.vec()) CHECK(v == doctest::Approx(0.0).epsilon(1e-15));
    for (double v : g.dec_pat.vec()) CHECK(v == doctest::Approx(0.0).epsilon(1e-15));
    for (double v : g.dec_rad_bias.vec()) CHECK(v == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("analytic gradients match central finite differences") {
    SeededRng rng(31);
    for (int rep = 0; rep < 8; ++rep) {
        const std::size_t dr = 3 + rng.uniform_int(8);
        const std::size_t dp = 2 + rng.uniform_int(6);
        const std::size_t k = 1 + rng.uniform_int(4);
        const std::size_t b = 4 + rng.uniform_int(8);
        fusion::CorrNetModel m = random_model(dr, dp, k, 2.0, rng);
        const Tensor rad = random_tensor({b, dr}, rng);
        const Tensor pat = random_tensor({b, dp}, rng);
        CHECK(max_relative_grad_error(m, rad, pat) < 1e-4);
    }
}

TEST_CASE("the shared encoder bias collects both views' paths") {
    const std::size_t d = 3;
    SeededRng rng(41);
    fusion::CorrNetModel m;
    m.latent_dim = d;
    m.lambda = 0.0;
    m.enc_rad = Tensor({d, d});
    m.enc_pat = Tensor({d, d});
    m.enc_bias = Tensor({d});
    m.dec_rad = Tensor({d, d});
    m.dec_rad_bias = Tensor({d});
    m.dec_pat = Tensor({d, d});
    m.dec_pat_bias = Tensor({d});
    for (std::size_t i = 0; i < d; ++i) {
        m.enc_rad.at(i, i) = 1.0;
        m.enc_pat.at(i, i) = 1.0;
        m.dec_rad.at(i, i) = 1.0;
        m.dec_pat.at(i, i) = 1.0;
    }
    const Tensor x = random_tensor({6, d}, rng);

    // Perfect on both sides: bias gradient vanishes.
    auto g = fusion::corrnet_grad(m, x, x);
    for (double v : g.enc_bias.vec()) CHECK(v == doctest::Approx(0.0).epsilon(1e-15));

    // Break only the pathology decoder: the shared bias feels it.
    m.dec_pat.at(0, 0) = 2.0;
    g = fusion::corrnet_grad(m, x, x);
    double norm = 0.0;
    for (double v : g.enc_bias.vec()) norm += std::abs(v);
    CHECK(norm > 1e-6);
    // And the radiology decoder path stayed clean.
    for (double v : g.dec_rad.vec()) CHECK(v == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("training is deterministic for a fixed seed") {
    SeededRng rng(55);
    aggregate::PairedFeatureSet pairs;
    pairs.rad = random_tensor({40, 6}, rng);
    pairs.pat = random_tensor({40, 4}, rng);
    pairs.tags.assign(40, aggregate::RowTag::lesion);

    fusion::FusionTrainConfig cfg;
    cfg.epochs = 5;
    cfg.batch_size = 10;
    cfg.latent_dim = 2;
    cfg.seed = 99;

    const auto a = fusion::train_fusion(pairs, cfg);
    const auto b = fusion::train_fusion(pairs, cfg);
    for (std::size_t i = 0; i < a.model.enc_rad.numel(); ++i) {
        CHECK(a.model.enc_rad.at(i) == b.model.enc_rad.at(i));
    }
    for (std::size_t i = 0; i < a.model.dec_pat.numel(); ++i) {
        CHECK(a.model.dec_pat.at(i) == b.model.dec_pat.at(i));
    }
    CHECK(a.curve.size() == 5);
    for (std::size_t e = 0; e < a.curve.size(); ++e) {
        CHECK(a.curve[e].objective == b.curve[e].objective);
    }
}

TEST_CASE("lambda 0 training reduces reconstruction on a linear task") {
    SeededRng rng(77);
    const std::size_t n = 60, d = 4;
    Tensor z = random_tensor({n, 2}, rng);
    aggregate::PairedFeatureSet pairs;
    pairs.rad = Tensor({n, d});
    pairs.pat = Tensor({n, d});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            pairs.rad.at(i, j) = z.at(i, j % 2) * (j + 1);
            pairs.pat.at(i, j) = z.at(i, (j + 1) % 2) * (j + 2);
        }
    }
    pairs.tags.assign(n, aggregate::RowTag::lesion);

    fusion::FusionTrainConfig cfg;
    cfg.epochs = 40;
    cfg.batch_size = 10;
    cfg.latent_dim = 2;
    cfg.lambda = 0.0;
    cfg.learning_rate = 1e-3;
    cfg.seed = 1;
    const auto result = fusion::train_fusion(pairs, cfg);
    for (std::size_t e = 1; e < result.curve.size(); ++e) {
        CHECK(result.curve[e].recon <= result.curve[e - 1].recon + 1e-6);
    }
}

TEST_CASE("encode_radiology equals forward on flattened rows and is linear") {
    SeededRng rng(61);
    const std::size_t h = 5, w = 4, c = 6, k = 3;
    fusion::CorrNetModel m = random_model(c, c, k, 2.0, rng);
    const Tensor feat = random_tensor({h, w, c}, rng);

    const Tensor enc = fusion::encode_radiology(m, feat);
    CHECK(enc.shape() == std::vector<std::size_t>{h, w, k});

    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            Tensor px({c});
            for (std::size_t ch = 0; ch < c; ++ch) px.at(ch) = feat.at(y, x, ch);
            const Tensor v = fusion::encode_vector(m, px);
            for (std::size_t d = 0; d < k; ++d) {
                CHECK(enc.at(y, x, d) == doctest::Approx(v.at(d)).epsilon(1e-12));
            }
        }
    }

    // Scale equivariance of the encoder map.
    fusion::CorrNetModel scaled = m;
    for (double& v : scaled.enc_rad.vec()) v *= 2.5;
    for (double& v : scaled.enc_bias.vec()) v *= 2.5;
    const Tensor enc2 = fusion::encode_radiology(scaled, feat);
    for (std::size_t i = 0; i < enc.numel(); ++i) {
        CHECK(enc2.at(i) == doctest::Approx(2.5 * enc.at(i)).epsilon(1e-12));
    }
}

TEST_CASE("region mean commutes with the linear encoder") {
    SeededRng rng(71);
    const std::size_t h = 8, w = 8, c = 6;
    fusion::CorrNetModel m = random_model(c, c, 3, 2.0, rng);
    const Tensor feat = random_tensor({h, w, c}, rng);
    Tensor mask_values({h, w});
    for (double& v : mask_values.vec()) v = rng.uniform() < 0.4 ? 1.0 : 0.0;
    mask_values.at(0, 0) = 1.0;
    const core::RegionMask mask(mask_values);

    const Tensor via_map =
        aggregate::aggregate_region_mean(fusion::encode_radiology(m, feat), mask);
    const Tensor via_vec =
        fusion::encode_vector(m, aggregate::aggregate_region_mean(feat, mask));
    for (std::size_t d = 0; d < 3; ++d) {
        CHECK(via_map.at(d) == doctest::Approx(via_vec.at(d)).epsilon(1e-9));
    }
}
