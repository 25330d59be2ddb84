#include <doctest.h>

#include <array>
#include <cmath>

#include "corrfabr/core/rng.hpp"
#include "corrfabr/preprocess/stain.hpp"

using namespace corrfabr;
using core::SeededRng;
using core::Tensor;

namespace {

std::array<double, 3> unit(double a, double b, double c) {
    const double n = std::sqrt(a * a + b * b + c * c);
    return {a / n, b / n, c / n};
}

void render(double c1, double c2, const std::array<double, 3>& v1, const std::array<double, 3>& v2,
            double* px) {
    for (int ch = 0; ch < 3; ++ch) {
        const double od = c1 * v1[ch] + c2 * v2[ch];
        px[ch] = std::clamp(256.0 * std::pow(10.0, -od) - 1.0, 0.0, 255.0);
    }
}

// Two-stain image with some near-pure pixels so the extreme percentile
// angles approach the true stains.
Tensor synth_stain_image(const std::array<double, 3>& v1, const std::array<double, 3>& v2,
                         SeededRng& rng, double scale = 1.0) {
    Tensor img({60, 60, 3});
    for (std::size_t p = 0; p < 60 * 60; ++p) {
        const double mode = rng.uniform();
        double c1, c2;
        if (mode < 0.2) {
            c1 = rng.uniform(0.4, 1.4);
            c2 = rng.uniform(0.0, 0.02);
        } else if (mode < 0.4) {
            c1 = rng.uniform(0.0, 0.02);
            c2 = rng.uniform(0.4, 1.4);
        } else {
            c1 = rng.uniform(0.1, 1.2);
            c2 = rng.uniform(0.1, 1.2);
        }
        render(scale * c1, scale * c2, v1, v2, img.data() + 3 * p);
    }
    return img;
}

double angle_deg(const std::array<double, 3>& a, const std::array<double, 3>& b) {
    const double dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    return std::acos(std::clamp(dot, -1.0, 1.0)) * 180.0 / 3.14159265358979323846;
}

}  // namespace

TEST_CASE("macenko recovers synthetic stain vectors within 2 degrees") {
    const auto hema = unit(0.65, 0.70, 0.29);
    const auto eosin = unit(0.07, 0.99, 0.11);
    for (std::uint64_t seed = 0; seed < 12; ++seed) {
        SeededRng rng(seed);
        const Tensor img = synth_stain_image(hema, eosin, rng);
        const auto basis = preprocess::macenko_fit(img);
        // stain1 carries the larger red OD component: that is hematoxylin here.
        CHECK(angle_deg(basis.stain1, hema) < 2.0);
        CHECK(angle_deg(basis.stain2, eosin) < 2.0);
    }
}

TEST_CASE("macenko rejects degenerate inputs") {
    SUBCASE("pure white image has no tissue") {
        const Tensor white = Tensor::full({50, 50, 3}, 255.0);
        CHECK_THROWS_WITH_AS(preprocess::macenko_fit(white), doctest::Contains("tissue"),
                             InputError);
    }
    SUBCASE("single-stain image is rank 1") {
        const auto hema = unit(0.65, 0.70, 0.29);
        SeededRng rng(5);
        Tensor img({40, 40, 3});
        for (std::size_t p = 0; p < 40 * 40; ++p) {
            render(rng.uniform(0.3, 1.2), 0.0, hema, hema, img.data() + 3 * p);
        }
        CHECK_THROWS_WITH_AS(preprocess::macenko_fit(img), doctest::Contains("rank"), InputError);
    }
}

TEST_CASE("self-normalization is a near-identity on tissue") {
    const auto hema = unit(0.65, 0.70, 0.29);
    const auto eosin = unit(0.07, 0.99, 0.11);
    SeededRng rng(9);
    const Tensor img = synth_stain_image(hema, eosin, rng);
    const auto basis = preprocess::macenko_fit(img);
    const Tensor out = preprocess::macenko_normalize(img, basis, basis);
    for (std::size_t i = 0; i < img.numel(); ++i) {
        CHECK(std::abs(out.at(i) - img.at(i)) < 1.0);
    }
}

TEST_CASE("concentration scaling is undone by normalizing to a common target") {
    const auto hema = unit(0.65, 0.70, 0.29);
    const auto eosin = unit(0.07, 0.99, 0.11);
    SeededRng rng_a(13), rng_b(13);
    const Tensor img = synth_stain_image(hema, eosin, rng_a);
    const Tensor doubled = synth_stain_image(hema, eosin, rng_b, 2.0);

    const auto basis = preprocess::macenko_fit(img);
    const auto basis2 = preprocess::macenko_fit(doubled);
    const Tensor n1 = preprocess::macenko_normalize(img, basis, basis);
    const Tensor n2 = preprocess::macenko_normalize(doubled, basis2, basis);
    for (std::size_t i = 0; i < n1.numel(); ++i) {
        CHECK(std::abs(n1.at(i) - n2.at(i)) < 1.0);
    }
}

TEST_CASE("white background stays white through normalization") {
    const auto hema = unit(0.65, 0.70, 0.29);
    const auto eosin = unit(0.07, 0.99, 0.11);
    SeededRng rng(21);
    Tensor img = synth_stain_image(hema, eosin, rng);
    // Paint a white border.
    for (std::size_t x = 0; x < 60; ++x) {
        for (int ch = 0; ch < 3; ++ch) img.at(0, x, ch) = 255.0;
    }
    const auto basis = preprocess::macenko_fit(img);
    const Tensor out = preprocess::macenko_normalize(img, basis, basis);
    for (std::size_t x = 0; x < 60; ++x) {
        for (int ch = 0; ch < 3; ++ch) {
            CHECK(out.at(0, x, ch) > 254.0);
        }
    }
}
