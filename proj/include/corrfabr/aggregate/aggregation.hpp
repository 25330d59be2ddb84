#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "corrfabr/core/mask.hpp"
#include "corrfabr/core/rng.hpp"
#include "corrfabr/core/tensor.hpp"
#include "corrfabr/features/extractor.hpp"

namespace corrfabr::aggregate {

enum class RowTag : unsigned char { lesion, normal };

// Matched radiology/pathology feature rows fed to fusion: rad is [N, 64*n]
// for n radiology sequences, pat is [N, 64].
struct PairedFeatureSet {
    core::Tensor rad;
    core::Tensor pat;
    std::vector<RowTag> tags;
    // Set when pixel-pixel balancing was impossible because only one class
    // was present; all rows are returned in that case.
    bool balance_warning = false;

    std::size_t rows() const { return tags.size(); }
};

// Per-pixel pairing of spatially aligned maps. Radiology sequences are
// concatenated channel-wise; rows are subsampled (seeded) to an exact
// cancer/non-cancer balance and at most `cap` rows in total. Selected rows
// keep pixel order, cancer rows first.
PairedFeatureSet aggregate_pixel_pixel(const std::vector<core::Tensor>& rad,
                                       const core::Tensor& pat,
                                       const core::RegionMask& cancer_mask, core::SeededRng& rng,
                                       std::size_t cap = 1000000);

// Re-balances and caps the union of per-slice pixel sets (the per-training-set
// version of the 1M cap).
PairedFeatureSet merge_pixel_sets(const std::vector<PairedFeatureSet>& sets, core::SeededRng& rng,
                                  std::size_t cap = 1000000);

// Per-channel mean of feat [H,W,C] over mask-1 positions.
core::Tensor aggregate_region_mean(const core::Tensor& feat, const core::RegionMask& mask);

// Per-channel nearest-rank 95th percentile (rank = ceil(0.95*m)) over the
// selected (row, col) grid cells of a patch grid.
core::Tensor aggregate_region_p95(const features::PatchGridFeatures& patches,
                                  const std::vector<std::pair<std::size_t, std::size_t>>& region);

// k seeded size x size windows fully inside the organ and disjoint from the
// lesion, each mean-aggregated. Rejection-sampled with a 10000-attempt cap
// per window.
std::vector<core::Tensor> sample_normal_regions(const core::Tensor& feat,
                                                const core::RegionMask& organ_mask,
                                                const core::RegionMask& lesion_mask,
                                                std::size_t size, std::size_t count,
                                                core::SeededRng& rng);

// Region-level pairing inputs. rad_lesion[l] holds one radiology vector per
// slice of lesion l; pat_lesion entries are (lesion index, pathology vector).
struct RegionVectors {
    std::vector<std::vector<core::Tensor>> rad_lesion;
    std::vector<core::Tensor> rad_normal;
    std::vector<std::pair<std::size_t, core::Tensor>> pat_lesion;
    std::vector<core::Tensor> pat_normal;
};

// random_slice: each pathology lesion vector pairs with one seeded-random
// slice of its lesion (the biopsy/section regimes). every_slice: each
// pathology vector pairs with every slice of its lesion (the kidney regime,
// one section per CT volume).
enum class PairingMode { random_slice, every_slice };

PairedFeatureSet build_pairs_by_region(const RegionVectors& vecs, PairingMode mode,
                                       core::SeededRng& rng);

}  // namespace corrfabr::aggregate
