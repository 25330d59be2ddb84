#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "corrfabr/core/rng.hpp"
#include "corrfabr/preprocess/labeling.hpp"
#include "corrfabr/preprocess/normalize.hpp"
#include "corrfabr/preprocess/otsu.hpp"
#include "corrfabr/preprocess/resample.hpp"

using namespace corrfabr;
using core::RegionMask;
using core::SeededRng;
using core::Tensor;

namespace {

// Independent reference resampler: straight double loop with the same
// half-pixel-center convention, written against the contract rather than the
// implementation.
double reference_bilinear_at(const Tensor& img, std::size_t oy, std::size_t ox, std::size_t out_h,
                             std::size_t out_w) {
    const std::size_t h = img.extent(0), w = img.extent(1);
    auto sample = [&](double sy, double sx) {
        const double fy = std::clamp(sy, 0.0, static_cast<double>(h - 1));
        const double fx = std::clamp(sx, 0.0, static_cast<double>(w - 1));
        const auto y0 = static_cast<std::size_t>(std::floor(fy));
        const auto x0 = static_cast<std::size_t>(std::floor(fx));
        const std::size_t y1 = std::min(y0 + 1, h - 1);
        const std::size_t x1 = std::min(x0 + 1, w - 1);
        const double ty = fy - static_cast<double>(y0), tx = fx - static_cast<double>(x0);
        const double top = img.at(y0, x0) * (1 - tx) + img.at(y0, x1) * tx;
        const double bot = img.at(y1, x0) * (1 - tx) + img.at(y1, x1) * tx;
        return top * (1 - ty) + bot * ty;
    };
    const double sy = (static_cast<double>(oy) + 0.5) * static_cast<double>(h) /
                          static_cast<double>(out_h) -
                      0.5;
    const double sx = (static_cast<double>(ox) + 0.5) * static_cast<double>(w) /
                          static_cast<double>(out_w) -
                      0.5;
    return sample(sy, sx);
}

RegionMask full_mask(std::vector<std::size_t> shape) {
    return RegionMask(Tensor::full(std::move(shape), 1.0));
}

// Exhaustive Otsu oracle: recompute class moments from raw pixels for every
// candidate split.
double otsu_bruteforce(const Tensor& gray, std::size_t levels) {
    const auto [lo_it, hi_it] = std::minmax_element(gray.vec().begin(), gray.vec().end());
    const double lo = *lo_it, hi = *hi_it;
    const double bin_w = (hi - lo) / static_cast<double>(levels);
    auto bin_of = [&](double v) {
        auto b = static_cast<std::size_t>((v - lo) / bin_w);
        return std::min(b, levels - 1);
    };
    double best = -1.0;
    std::size_t best_t = 0;
    for (std::size_t t = 0; t + 1 < levels; ++t) {
        double c0 = 0, c1 = 0, s0 = 0, s1 = 0;
        for (double v : gray.vec()) {
            if (bin_of(v) <= t) {
                c0 += 1;
                s0 += v;
            } else {
                c1 += 1;
                s1 += v;
            }
        }
        if (c0 == 0 || c1 == 0) continue;
        const double n = c0 + c1;
        const double d = s0 / c0 - s1 / c1;
        const double sigma = (c0 / n) * (c1 / n) * d * d;
        if (sigma > best) {
            best = sigma;
            best_t = t;
        }
    }
    return lo + static_cast<double>(best_t + 1) * bin_w;
}

}  // namespace

TEST_CASE("aggressiveness truth table") {
    using preprocess::LesionLabel;
    using preprocess::label_aggressiveness;
    // necrosis forces aggressive at any grade; otherwise grade >= 3 does.
    CHECK(label_aggressiveness(2, true) == LesionLabel::aggressive);
    CHECK(label_aggressiveness(1, false) == LesionLabel::indolent);
    CHECK(label_aggressiveness(4, false) == LesionLabel::aggressive);
    for (int grade = 1; grade <= 4; ++grade) {
        for (bool necrosis : {false, true}) {
            const bool aggressive =
                label_aggressiveness(grade, necrosis) == LesionLabel::aggressive;
            CHECK(aggressive == (necrosis || grade >= 3));
        }
    }
    CHECK_THROWS_AS(label_aggressiveness(0, false), InputError);
    CHECK_THROWS_AS(label_aggressiveness(5, true), InputError);
}

TEST_CASE("lesion record derives its label") {
    auto rec = preprocess::LesionRecord::make("p1", {}, 2, true);
    CHECK(rec.label == preprocess::LesionLabel::aggressive);
    CHECK(preprocess::to_string(rec.label) == "aggressive");
}

TEST_CASE("crop_resize_lesion") {
    SeededRng rng(17);

    SUBCASE("full mask means resize only") {
        Tensor vol({1, 8, 8});
        for (double& v : vol.vec()) v = rng.normal();
        const Tensor out = preprocess::crop_resize_lesion(vol, full_mask({1, 8, 8}), 16);
        CHECK(out.shape() == std::vector<std::size_t>{1, 16, 16});
        Tensor plane({8, 8});
        std::copy(vol.data(), vol.data() + 64, plane.data());
        for (std::size_t y = 0; y < 16; ++y) {
            for (std::size_t x = 0; x < 16; ++x) {
                CHECK(out.at(0, y, x) ==
                      doctest::Approx(reference_bilinear_at(plane, y, x, 16, 16)).epsilon(1e-12));
            }
        }
    }

    SUBCASE("single-pixel mask broadcasts a constant") {
        Tensor vol({1, 5, 5});
        for (double& v : vol.vec()) v = rng.normal();
        Tensor mask_values({1, 5, 5});
        mask_values.at(0, 2, 3) = 1.0;
        const Tensor out =
            preprocess::crop_resize_lesion(vol, RegionMask(mask_values), 7);
        for (std::size_t i = 0; i < out.numel(); ++i) {
            CHECK(out.at(i) == doctest::Approx(vol.at(0, 2, 3)).epsilon(1e-15));
        }
    }

    SUBCASE("interior box equals the reference resample of the crop") {
        const std::size_t h = 120, w = 150;
        Tensor vol({2, h, w});
        for (double& v : vol.vec()) v = rng.normal();
        Tensor mask_values({2, h, w});
        // 30x55 box; union over slices defines the frame.
        for (std::size_t y = 20; y < 50; ++y) {
            for (std::size_t x = 40; x < 95; ++x) mask_values.at(0, y, x) = 1.0;
        }
        const Tensor out =
            preprocess::crop_resize_lesion(vol, RegionMask(mask_values), 64);
        CHECK(out.shape() == std::vector<std::size_t>{2, 64, 64});

        Tensor crop({30, 55});
        for (std::size_t y = 0; y < 30; ++y) {
            for (std::size_t x = 0; x < 55; ++x) crop.at(y, x) = vol.at(1, 20 + y, 40 + x);
        }
        for (std::size_t y = 0; y < 64; ++y) {
            for (std::size_t x = 0; x < 64; ++x) {
                CHECK(out.at(1, y, x) ==
                      doctest::Approx(reference_bilinear_at(crop, y, x, 64, 64)).epsilon(1e-12));
            }
        }
    }

    SUBCASE("empty mask errors") {
        Tensor vol({1, 4, 4});
        CHECK_THROWS_AS(
            preprocess::crop_resize_lesion(vol, RegionMask(Tensor({1, 4, 4})), 8), InputError);
    }
}

TEST_CASE("zscore normalization") {
    SUBCASE("two-value lesion maps to -1 and +1") {
        Tensor vol({1, 1, 4}, {2.0, 4.0, 100.0, -7.0});
        Tensor mask_values({1, 1, 4}, {1.0, 1.0, 0.0, 0.0});
        const Tensor out = preprocess::zscore_normalize_lesion(vol, RegionMask(mask_values));
        CHECK(out.at(0) == doctest::Approx(-1.0));
        CHECK(out.at(1) == doctest::Approx(1.0));
    }
    SUBCASE("constant lesion returns zeros") {
        Tensor vol = Tensor::full({1, 2, 2}, 3.5);
        const Tensor out = preprocess::zscore_normalize_lesion(vol, full_mask({1, 2, 2}));
        for (double v : out.vec()) CHECK(v == 0.0);
    }
    SUBCASE("masked moments are 0 and 1 after normalization") {
        SeededRng rng(23);
        Tensor vol({3, 16, 16});
        for (double& v : vol.vec()) v = 5.0 + 3.0 * rng.normal();
        Tensor mask_values({3, 16, 16});
        for (double& v : mask_values.vec()) v = rng.uniform() < 0.3 ? 1.0 : 0.0;
        mask_values.at(0) = 1.0;
        mask_values.at(1) = 1.0;
        const RegionMask mask(mask_values);
        const Tensor out = preprocess::zscore_normalize_lesion(vol, mask);

        double sum = 0.0, count = 0.0;
        for (std::size_t i = 0; i < out.numel(); ++i) {
            if (mask.on(i)) {
                sum += out.at(i);
                count += 1;
            }
        }
        const double mean = sum / count;
        double sq = 0.0;
        for (std::size_t i = 0; i < out.numel(); ++i) {
            if (mask.on(i)) sq += (out.at(i) - mean) * (out.at(i) - mean);
        }
        const double stddev = std::sqrt(sq / count);
        CHECK(std::abs(mean) < 1e-9);
        CHECK(std::abs(stddev - 1.0) < 1e-9);
    }
}

TEST_CASE("otsu thresholding") {
    SUBCASE("perfect bimodal image, tie toward the lower bin") {
        Tensor img({2, 4}, {0, 0, 0, 0, 255, 255, 255, 255});
        const auto r = preprocess::otsu_threshold(img);
        CHECK(r.threshold > 0.0);
        CHECK(r.threshold < 255.0);
        CHECK(r.threshold == doctest::Approx(255.0 / 256.0));  // first bin edge
        CHECK(r.mask.count() == 4);  // dark pixels are foreground by default
        CHECK(r.mask.on(0));
        CHECK(!r.mask.on(4));
    }
    SUBCASE("bright foreground flips the mask") {
        Tensor img({2, 4}, {0, 0, 0, 0, 255, 255, 255, 255});
        const auto r = preprocess::otsu_threshold(img, 256, preprocess::OtsuForeground::bright);
        CHECK(!r.mask.on(0));
        CHECK(r.mask.on(4));
    }
    SUBCASE("constant image errors") {
        CHECK_THROWS_AS(preprocess::otsu_threshold(Tensor::full({4, 4}, 9.0)), InputError);
    }
    SUBCASE("two-Gaussian mixtures match the exhaustive sweep exactly") {
        SeededRng rng(31);
        for (int rep = 0; rep < 10; ++rep) {
            Tensor img({48, 48});
            for (double& v : img.vec()) {
                v = rng.uniform() < 0.4 ? 60.0 + 12.0 * rng.normal() : 170.0 + 20.0 * rng.normal();
            }
            const auto r = preprocess::otsu_threshold(img);
            CHECK(r.threshold == doctest::Approx(otsu_bruteforce(img, 256)).epsilon(1e-12));
        }
    }
    SUBCASE("uniform random images match the sweep too") {
        SeededRng rng(37);
        for (int rep = 0; rep < 10; ++rep) {
            Tensor img({32, 32});
            for (double& v : img.vec()) v = rng.uniform(0.0, 255.0);
            const auto r = preprocess::otsu_threshold(img);
            CHECK(r.threshold == doctest::Approx(otsu_bruteforce(img, 256)).epsilon(1e-12));
        }
    }
}
