#include <doctest.h>

#include <cmath>

#include "corrfabr/core/rng.hpp"
#include "corrfabr/features/extractor.hpp"

using namespace corrfabr;
using core::SeededRng;
using core::Tensor;

TEST_CASE("builtin extractor is seed-deterministic") {
    const auto a = features::make_builtin_extractor(0, 3);
    const auto b = features::make_builtin_extractor(0, 3);
    const auto c = features::make_builtin_extractor(1, 3);
    CHECK(a.w1.shape() == std::vector<std::size_t>{64, 3, 3, 3});
    CHECK(a.w2.shape() == std::vector<std::size_t>{64, 64, 3, 3});
    for (std::size_t i = 0; i < a.w1.numel(); ++i) CHECK(a.w1.at(i) == b.w1.at(i));
    bool any_diff = false;
    for (std::size_t i = 0; i < a.w1.numel(); ++i) any_diff |= a.w1.at(i) != c.w1.at(i);
    CHECK(any_diff);
    // Fan-in scaling bounds.
    const double bound1 = 1.0 / std::sqrt(27.0);
    for (double v : a.w1.vec()) CHECK(std::abs(v) <= bound1);
}

TEST_CASE("all-zero image with zero biases gives all-zero features") {
    const auto fx = features::make_builtin_extractor(4, 1);
    const Tensor out = features::extract_lowres(Tensor({16, 16}), fx);
    CHECK(out.shape() == std::vector<std::size_t>{16, 16, 64});
    for (double v : out.vec()) CHECK(v == 0.0);
}

TEST_CASE("shape contract and ReLU nonnegativity") {
    SeededRng rng(2);
    const auto fx = features::make_builtin_extractor(7, 2);
    Tensor img({20, 28, 2});
    for (double& v : img.vec()) v = rng.normal();
    const Tensor out = features::extract_lowres(img, fx);
    CHECK(out.shape() == std::vector<std::size_t>{20, 28, 64});
    for (double v : out.vec()) CHECK(v >= 0.0);

    CHECK_THROWS_AS(features::extract_lowres(Tensor({8, 8, 3}), fx), InputError);
}

TEST_CASE("center-tap identity kernels reproduce ReLU of channel copies") {
    // Both stages get kernels that only pass the center tap of channel 0, so
    // the whole extractor collapses to out[., ., co] = relu(in[., ., 0]).
    features::FeatureExtractor fx;
    fx.in_channels = 1;
    fx.w1 = Tensor({64, 1, 3, 3});
    fx.b1 = Tensor({64});
    fx.w2 = Tensor({64, 64, 3, 3});
    fx.b2 = Tensor({64});
    for (std::size_t co = 0; co < 64; ++co) {
        fx.w1.vec()[(co * 1 * 3 + 1) * 3 + 1] = 1.0;          // center of 3x3, cin 0
        fx.w2.vec()[((co * 64 + 0) * 3 + 1) * 3 + 1] = 1.0;   // center, cin 0
    }
    Tensor img({5, 5});
    for (std::size_t i = 0; i < 25; ++i) img.at(i) = static_cast<double>(i) - 12.0;
    const Tensor out = features::extract_lowres(img, fx);
    for (std::size_t p = 0; p < 25; ++p) {
        const double expected = std::max(0.0, img.at(p));
        for (std::size_t co = 0; co < 64; ++co) {
            CHECK(out.at(p * 64 + co) == doctest::Approx(expected).epsilon(1e-12));
        }
    }
}

TEST_CASE("patch grid shapes and margins") {
    const auto fx = features::make_builtin_extractor(11, 3);
    SeededRng rng(3);

    SUBCASE("448x448 gives a 2x2 grid") {
        Tensor wsi({448, 448, 3});
        for (double& v : wsi.vec()) v = rng.uniform(0.0, 255.0);
        const auto grid = features::extract_highres_patches(wsi, fx);
        CHECK(grid.grid_h == 2);
        CHECK(grid.grid_w == 2);
        CHECK(grid.vectors.shape() == std::vector<std::size_t>{2, 2, 64});
    }
    SUBCASE("300x300 drops margins to a 1x1 grid") {
        Tensor wsi({300, 300, 3});
        for (double& v : wsi.vec()) v = rng.uniform(0.0, 255.0);
        const auto grid = features::extract_highres_patches(wsi, fx);
        CHECK(grid.grid_h == 1);
        CHECK(grid.grid_w == 1);
    }
    SUBCASE("too-small image errors") {
        CHECK_THROWS_AS(features::extract_highres_patches(Tensor({100, 300, 3}), fx), InputError);
    }
    SUBCASE("constant image gives identical patch vectors") {
        const Tensor wsi = Tensor::full({448, 224, 3}, 37.0);
        const auto grid = features::extract_highres_patches(wsi, fx);
        REQUIRE(grid.grid_h == 2);
        for (std::size_t ch = 0; ch < 64; ++ch) {
            CHECK(grid.vectors.at(0, 0, ch) == doctest::Approx(grid.vectors.at(1, 0, ch)));
        }
    }
}

TEST_CASE("patch vectors equal the spatial mean of extract_lowres") {
    const auto fx = features::make_builtin_extractor(5, 1);
    SeededRng rng(6);
    Tensor wsi({224, 448});
    for (double& v : wsi.vec()) v = rng.normal();
    const auto grid = features::extract_highres_patches(wsi, fx);
    REQUIRE(grid.grid_w == 2);

    Tensor patch({224, 224});
    for (std::size_t y = 0; y < 224; ++y) {
        for (std::size_t x = 0; x < 224; ++x) patch.at(y, x) = wsi.at(y, 224 + x);
    }
    const Tensor feat = features::extract_lowres(patch, fx);
    for (std::size_t ch = 0; ch < 64; ++ch) {
        double mean = 0.0;
        for (std::size_t p = 0; p < 224 * 224; ++p) mean += feat.at(p * 64 + ch);
        mean /= 224.0 * 224.0;
        CHECK(grid.vectors.at(0, 1, ch) == doctest::Approx(mean).epsilon(1e-12));
    }
}

TEST_CASE("extractor save/load round trip") {
    const auto dir = std::filesystem::temp_directory_path() / "corrfabr_tests" / "extractor";
    const auto fx = features::make_builtin_extractor(8, 3);
    features::save_extractor(fx, dir);
    const auto back = features::load_extractor(dir);
    CHECK(back.in_channels == 3);
    for (std::size_t i = 0; i < fx.w2.numel(); ++i) CHECK(back.w2.at(i) == fx.w2.at(i));
}
