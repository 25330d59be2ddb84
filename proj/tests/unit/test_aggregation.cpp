#include <doctest.h>

#include <set>

#include "corrfabr/aggregate/aggregation.hpp"
#include "corrfabr/core/rng.hpp"

using namespace corrfabr;
using core::RegionMask;
using core::SeededRng;
using core::Tensor;

namespace {

Tensor random_map(std::size_t h, std::size_t w, std::size_t c, SeededRng& rng) {
    Tensor t({h, w, c});
    for (double& v : t.vec()) v = rng.normal();
    return t;
}

}  // namespace

TEST_CASE("pixel-pixel balancing and widths") {
    SeededRng rng(3);
    const std::size_t h = 10, w = 10;
    const Tensor rad1 = random_map(h, w, 64, rng);
    const Tensor rad2 = random_map(h, w, 64, rng);
    const Tensor pat = random_map(h, w, 64, rng);

    Tensor mask_values({h, w});
    for (std::size_t i = 0; i < 30; ++i) mask_values.at(i) = 1.0;  // 30 cancer, 70 normal
    const RegionMask mask(mask_values);

    SUBCASE("two sequences concatenate to width 128 and balance to 60 rows") {
        SeededRng pair_rng(7);
        const auto set = aggregate::aggregate_pixel_pixel({rad1, rad2}, pat, mask, pair_rng);
        CHECK(set.rad.shape() == std::vector<std::size_t>{60, 128});
        CHECK(set.pat.shape() == std::vector<std::size_t>{60, 64});
        CHECK(!set.balance_warning);
        std::size_t lesions = 0;
        for (auto t : set.tags) lesions += t == aggregate::RowTag::lesion;
        CHECK(lesions == 30);
        CHECK(set.tags.size() - lesions == 30);
    }

    SUBCASE("rows are true pixel pairs") {
        SeededRng pair_rng(7);
        const auto set = aggregate::aggregate_pixel_pixel({rad1}, pat, mask, pair_rng);
        // Every row must exist verbatim among the original pixels.
        for (std::size_t r = 0; r < set.rows(); ++r) {
            bool found = false;
            for (std::size_t p = 0; p < h * w && !found; ++p) {
                bool same = true;
                for (std::size_t ch = 0; ch < 64 && same; ++ch) {
                    same = set.rad.at(r, ch) == rad1.at(p * 64 + ch) &&
                           set.pat.at(r, ch) == pat.at(p * 64 + ch);
                }
                found = same;
            }
            CHECK(found);
        }
    }

    SUBCASE("cap limits the total with exact balance") {
        SeededRng pair_rng(9);
        const auto set = aggregate::aggregate_pixel_pixel({rad1}, pat, mask, pair_rng, 20);
        CHECK(set.rows() == 20);
        std::size_t lesions = 0;
        for (auto t : set.tags) lesions += t == aggregate::RowTag::lesion;
        CHECK(lesions == 10);
    }

    SUBCASE("single-class mask returns everything with a warning") {
        SeededRng pair_rng(11);
        const auto set = aggregate::aggregate_pixel_pixel(
            {rad1}, pat, RegionMask(Tensor::full({h, w}, 1.0)), pair_rng);
        CHECK(set.balance_warning);
        CHECK(set.rows() == h * w);
    }

    SUBCASE("same seed gives the same subsample") {
        SeededRng a(13), b(13);
        const auto s1 = aggregate::aggregate_pixel_pixel({rad1}, pat, mask, a, 40);
        const auto s2 = aggregate::aggregate_pixel_pixel({rad1}, pat, mask, b, 40);
        REQUIRE(s1.rows() == s2.rows());
        for (std::size_t i = 0; i < s1.rad.numel(); ++i) CHECK(s1.rad.at(i) == s2.rad.at(i));
    }

    SUBCASE("shape mismatch is rejected") {
        SeededRng pair_rng(15);
        const Tensor bad = random_map(h, w + 1, 64, rng);
        CHECK_THROWS_AS(aggregate::aggregate_pixel_pixel({bad}, pat, mask, pair_rng), InputError);
    }
}

TEST_CASE("merge_pixel_sets rebalances across slices under the cap") {
    SeededRng rng(17);
    const Tensor rad = random_map(6, 6, 4, rng);
    const Tensor pat = random_map(6, 6, 4, rng);
    Tensor mask_values({6, 6});
    for (std::size_t i = 0; i < 12; ++i) mask_values.at(i) = 1.0;
    const RegionMask mask(mask_values);

    SeededRng r1(1), r2(2), r3(3);
    const auto s1 = aggregate::aggregate_pixel_pixel({rad}, pat, mask, r1);
    const auto s2 = aggregate::aggregate_pixel_pixel({rad}, pat, mask, r2);
    const auto merged = aggregate::merge_pixel_sets({s1, s2}, r3, 30);
    CHECK(merged.rows() == 30);
    std::size_t lesions = 0;
    for (auto t : merged.tags) lesions += t == aggregate::RowTag::lesion;
    CHECK(lesions == 15);
}

TEST_CASE("region mean") {
    SeededRng rng(19);
    SUBCASE("constant map gives the constant") {
        const Tensor feat = Tensor::full({4, 4, 3}, 2.5);
        Tensor mask_values({4, 4});
        mask_values.at(0) = 1.0;
        mask_values.at(7) = 1.0;
        const Tensor v = aggregate::aggregate_region_mean(feat, RegionMask(mask_values));
        for (std::size_t ch = 0; ch < 3; ++ch) CHECK(v.at(ch) == doctest::Approx(2.5));
    }
    SUBCASE("single-pixel mask returns that pixel") {
        const Tensor feat = random_map(5, 5, 6, rng);
        Tensor mask_values({5, 5});
        mask_values.at(2, 3) = 1.0;
        const Tensor v = aggregate::aggregate_region_mean(feat, RegionMask(mask_values));
        for (std::size_t ch = 0; ch < 6; ++ch) CHECK(v.at(ch) == feat.at(2, 3, ch));
    }
    SUBCASE("matches an explicit accumulation loop") {
        const Tensor feat = random_map(8, 8, 64, rng);
        Tensor mask_values({8, 8});
        for (double& v : mask_values.vec()) v = rng.uniform() < 0.5 ? 1.0 : 0.0;
        mask_values.at(0) = 1.0;
        const RegionMask mask(mask_values);
        const Tensor v = aggregate::aggregate_region_mean(feat, mask);
        for (std::size_t ch = 0; ch < 64; ++ch) {
            double acc = 0.0;
            std::size_t n = 0;
            for (std::size_t y = 0; y < 8; ++y) {
                for (std::size_t x = 0; x < 8; ++x) {
                    if (mask.on(y, x)) {
                        acc += feat.at(y, x, ch);
                        ++n;
                    }
                }
            }
            CHECK(v.at(ch) == doctest::Approx(acc / n).epsilon(1e-12));
        }
    }
    SUBCASE("empty mask errors") {
        CHECK_THROWS_AS(
            aggregate::aggregate_region_mean(Tensor({2, 2, 1}), RegionMask(Tensor({2, 2}))),
            InputError);
    }
}

TEST_CASE("region p95 via nearest rank") {
    features::PatchGridFeatures grid;
    grid.grid_h = 10;
    grid.grid_w = 10;
    grid.vectors = Tensor({10, 10, 64});

    SUBCASE("channel values 1..100 give 95") {
        for (std::size_t i = 0; i < 100; ++i) {
            for (std::size_t ch = 0; ch < 64; ++ch) {
                grid.vectors.at(i * 64 + ch) = static_cast<double>(i + 1);
            }
        }
        std::vector<std::pair<std::size_t, std::size_t>> cells;
        for (std::size_t gy = 0; gy < 10; ++gy) {
            for (std::size_t gx = 0; gx < 10; ++gx) cells.emplace_back(gy, gx);
        }
        const Tensor v = aggregate::aggregate_region_p95(grid, cells);
        for (std::size_t ch = 0; ch < 64; ++ch) CHECK(v.at(ch) == 95.0);
    }
    SUBCASE("singleton region returns that vector") {
        SeededRng rng(23);
        for (double& x : grid.vectors.vec()) x = rng.normal();
        const Tensor v = aggregate::aggregate_region_p95(grid, {{3, 4}});
        for (std::size_t ch = 0; ch < 64; ++ch) CHECK(v.at(ch) == grid.vectors.at(3, 4, ch));
    }
    SUBCASE("matches a sort-based oracle on random cells") {
        SeededRng rng(29);
        for (double& x : grid.vectors.vec()) x = rng.normal();
        std::vector<std::pair<std::size_t, std::size_t>> cells;
        for (std::size_t gy = 0; gy < 10; ++gy) {
            for (std::size_t gx = 0; gx < 10; ++gx) {
                if (rng.uniform() < 0.37) cells.emplace_back(gy, gx);
            }
        }
        if (cells.empty()) cells.emplace_back(0, 0);
        const Tensor v = aggregate::aggregate_region_p95(grid, cells);
        for (std::size_t ch = 0; ch < 64; ++ch) {
            std::vector<double> vals;
            for (const auto& [gy, gx] : cells) vals.push_back(grid.vectors.at(gy, gx, ch));
            std::sort(vals.begin(), vals.end());
            const auto rank = static_cast<std::size_t>(std::ceil(0.95 * vals.size()));
            CHECK(v.at(ch) == vals[rank - 1]);
        }
    }
    SUBCASE("empty region errors") {
        CHECK_THROWS_AS(aggregate::aggregate_region_p95(grid, {}), InputError);
    }
}

TEST_CASE("normal region sampling") {
    SeededRng data_rng(31);
    const std::size_t h = 64, w = 64, c = 8;
    const Tensor feat = random_map(h, w, c, data_rng);

    Tensor organ_values = Tensor::full({h, w}, 1.0);
    Tensor lesion_values({h, w});
    for (std::size_t y = 20; y < 44; ++y) {
        for (std::size_t x = 20; x < 44; ++x) lesion_values.at(y, x) = 1.0;
    }
    const RegionMask organ(organ_values);
    const RegionMask lesion(lesion_values);

    SUBCASE("windows avoid the lesion entirely") {
        SeededRng rng(1);
        const auto vecs = aggregate::sample_normal_regions(feat, organ, lesion, 10, 5, rng);
        CHECK(vecs.size() == 5);
        // Verified indirectly: re-deriving each window from its mean is hard,
        // so instead sample again with the same seed and check the means are
        // reproducible and correspond to real windows via a direct search.
        SeededRng rng2(1);
        const auto again = aggregate::sample_normal_regions(feat, organ, lesion, 10, 5, rng2);
        for (std::size_t i = 0; i < 5; ++i) {
            for (std::size_t ch = 0; ch < c; ++ch) CHECK(vecs[i].at(ch) == again[i].at(ch));
        }
        for (const auto& vec : vecs) {
            bool matched = false;
            for (std::size_t y = 0; y + 10 <= h && !matched; ++y) {
                for (std::size_t x = 0; x + 10 <= w && !matched; ++x) {
                    double acc = 0.0;
                    bool overlaps = false;
                    for (std::size_t wy = 0; wy < 10; ++wy) {
                        for (std::size_t wx = 0; wx < 10; ++wx) {
                            overlaps |= lesion.on(y + wy, x + wx);
                            acc += feat.at(y + wy, x + wx, 0);
                        }
                    }
                    if (!overlaps && vec.at(0) == doctest::Approx(acc / 100.0).epsilon(1e-12)) {
                        matched = true;
                    }
                }
            }
            CHECK(matched);
        }
    }

    SUBCASE("organ equal to lesion has no feasible window") {
        SeededRng rng(2);
        CHECK_THROWS_WITH_AS(
            aggregate::sample_normal_regions(feat, lesion, lesion, 10, 1, rng),
            doctest::Contains("no feasible window"), InputError);
    }
}

TEST_CASE("region pairing") {
    SeededRng data_rng(37);
    auto vec = [&](double base) {
        Tensor t({4});
        for (std::size_t i = 0; i < 4; ++i) t.at(i) = base + static_cast<double>(i);
        return t;
    };

    aggregate::RegionVectors vecs;
    vecs.rad_lesion.push_back({vec(0), vec(10), vec(20)});  // lesion 0, three slices
    vecs.rad_lesion.push_back({vec(30)});                   // lesion 1, one slice
    vecs.pat_lesion.emplace_back(0, vec(100));
    vecs.pat_lesion.emplace_back(1, vec(200));
    vecs.rad_normal = {vec(40), vec(50)};
    vecs.pat_normal = {vec(300), vec(400), vec(500)};

    SUBCASE("random_slice gives exactly j + k rows") {
        SeededRng rng(5);
        const auto set =
            aggregate::build_pairs_by_region(vecs, aggregate::PairingMode::random_slice, rng);
        CHECK(set.rows() == 2 + 3);
        std::size_t lesions = 0;
        for (auto t : set.tags) lesions += t == aggregate::RowTag::lesion;
        CHECK(lesions == 2);
        // Lesion 1 has a single slice: deterministic pair.
        CHECK(set.rad.at(1, 0) == 30.0);
        CHECK(set.pat.at(1, 0) == 200.0);
        // Every lesion row uses a slice of its own lesion.
        CHECK((set.rad.at(0, 0) == 0.0 || set.rad.at(0, 0) == 10.0 || set.rad.at(0, 0) == 20.0));
    }

    SUBCASE("same seed reproduces the pairing") {
        SeededRng a(9), b(9);
        const auto s1 =
            aggregate::build_pairs_by_region(vecs, aggregate::PairingMode::random_slice, a);
        const auto s2 =
            aggregate::build_pairs_by_region(vecs, aggregate::PairingMode::random_slice, b);
        for (std::size_t i = 0; i < s1.rad.numel(); ++i) CHECK(s1.rad.at(i) == s2.rad.at(i));
    }

    SUBCASE("every_slice pairs the section with each slice") {
        aggregate::RegionVectors kidney;
        kidney.rad_lesion.push_back({vec(0), vec(10), vec(20)});
        kidney.pat_lesion.emplace_back(0, vec(100));
        SeededRng rng(11);
        const auto set =
            aggregate::build_pairs_by_region(kidney, aggregate::PairingMode::every_slice, rng);
        CHECK(set.rows() == 3);
        for (std::size_t r = 0; r < 3; ++r) CHECK(set.pat.at(r, 0) == 100.0);
        CHECK(set.rad.at(0, 0) == 0.0);
        CHECK(set.rad.at(1, 0) == 10.0);
        CHECK(set.rad.at(2, 0) == 20.0);
    }

    SUBCASE("empty lesion inputs error") {
        aggregate::RegionVectors empty;
        SeededRng rng(13);
        CHECK_THROWS_AS(
            aggregate::build_pairs_by_region(empty, aggregate::PairingMode::random_slice, rng),
            InputError);
    }
}
