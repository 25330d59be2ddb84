#include <doctest.h>

#include <cmath>

#include "corrfabr/core/rng.hpp"
#include "corrfabr/fusion/cca.hpp"
#include "corrfabr/synth/generators.hpp"

using namespace corrfabr;
using core::SeededRng;
using core::Tensor;

TEST_CASE("identical views give unit canonical correlations") {
    SeededRng rng(3);
    Tensor x({200, 6});
    for (double& v : x.vec()) v = rng.normal();
    const auto r = fusion::cca_oracle(x, x, 6);
    for (double c : r.correlations) CHECK(c == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("independent Gaussians have near-zero canonical correlations") {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        SeededRng rng(seed);
        Tensor x({10000, 5}), y({10000, 5});
        for (double& v : x.vec()) v = rng.normal();
        for (double& v : y.vec()) v = rng.normal();
        const auto r = fusion::cca_oracle(x, y, 5);
        for (double c : r.correlations) CHECK(c < 0.1);
    }
}

TEST_CASE("correlations are sorted descending in [0, 1]") {
    synth::TwoViewSpec spec;
    spec.latent_dim = 3;
    spec.x_dim = 10;
    spec.y_dim = 8;
    spec.signal_scales = {2.0, 1.0, 0.5};
    spec.n_samples = 4000;
    spec.seed = 5;
    const auto data = synth::gen_two_view(spec);
    const auto r = fusion::cca_oracle(data.x, data.y, 3);
    for (std::size_t i = 0; i + 1 < r.correlations.size(); ++i) {
        CHECK(r.correlations[i] >= r.correlations[i + 1]);
    }
    for (double c : r.correlations) {
        CHECK(c >= 0.0);
        CHECK(c <= 1.0);
    }
}

TEST_CASE("known-SNR construction matches the analytic values within 0.02") {
    synth::TwoViewSpec spec;
    spec.latent_dim = 4;
    spec.x_dim = 12;
    spec.y_dim = 9;
    spec.signal_scales = {1.6, 1.1, 0.8, 0.5};
    spec.noise_x = 1.0;
    spec.noise_y = 0.7;
    spec.n_samples = 20000;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        spec.seed = seed;
        const auto data = synth::gen_two_view(spec);
        const auto r = fusion::cca_oracle(data.x, data.y, 4);
        REQUIRE(r.correlations.size() == data.true_correlations.size());
        for (std::size_t i = 0; i < 4; ++i) {
            CHECK(std::abs(r.correlations[i] - data.true_correlations[i]) < 0.02);
        }
    }
}

TEST_CASE("canonical directions achieve their correlations") {
    synth::TwoViewSpec spec;
    spec.latent_dim = 2;
    spec.x_dim = 6;
    spec.y_dim = 5;
    spec.n_samples = 8000;
    spec.seed = 11;
    const auto data = synth::gen_two_view(spec);
    const auto r = fusion::cca_oracle(data.x, data.y, 2);

    // Project both views on the first canonical pair and recompute Pearson.
    const std::size_t n = spec.n_samples;
    std::vector<double> u(n, 0.0), v(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < spec.x_dim; ++j) {
            u[i] += data.x.at(i, j) * r.x_directions.at(j, 0);
        }
        for (std::size_t j = 0; j < spec.y_dim; ++j) {
            v[i] += data.y.at(i, j) * r.y_directions.at(j, 0);
        }
    }
    double mu = 0, mv = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mu += u[i];
        mv += v[i];
    }
    mu /= n;
    mv /= n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (u[i] - mu) * (v[i] - mv);
        sxx += (u[i] - mu) * (u[i] - mu);
        syy += (v[i] - mv) * (v[i] - mv);
    }
    const double pearson = sxy / std::sqrt(sxx * syy);
    CHECK(std::abs(pearson) == doctest::Approx(r.correlations[0]).epsilon(1e-3));
}

TEST_CASE("cca input validation") {
    Tensor x({10, 12});
    CHECK_THROWS_AS(fusion::cca_oracle(x, x, 3), InputError);  // N <= D
    Tensor ok({50, 4});
    Tensor bad({49, 4});
    CHECK_THROWS_AS(fusion::cca_oracle(ok, bad, 2), InputError);
}
