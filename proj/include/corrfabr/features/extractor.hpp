#pragma once

#include <cstdint>
#include <filesystem>

#include "corrfabr/core/rng.hpp"
#include "corrfabr/core/tensor.hpp"

namespace corrfabr::features {

inline constexpr std::size_t kFeatureChannels = 64;
inline constexpr std::size_t kPatchSize = 224;

// Two 3x3 same-padding convolution stages with ReLU, C -> 64 -> 64. Weights
// either come from files or from the deterministic seeded filter bank, so the
// pipeline runs hermetically without pretrained checkpoints.
struct FeatureExtractor {
    std::size_t in_channels = 1;
    core::Tensor w1;  // [64, C, 3, 3]
    core::Tensor b1;  // [64]
    core::Tensor w2;  // [64, 64, 3, 3]
    core::Tensor b2;  // [64]
};

// Seeded uniform weights scaled by 1/sqrt(fan-in); byte-identical across runs
// for equal seeds.
FeatureExtractor make_builtin_extractor(std::uint64_t seed, std::size_t in_channels);

// Loads w1/b1/w2/b2 from CFTN files stored in one directory (weights1.cftn,
// bias1.cftn, weights2.cftn, bias2.cftn).
FeatureExtractor load_extractor(const std::filesystem::path& dir);
void save_extractor(const FeatureExtractor& fx, const std::filesystem::path& dir);

// Image is [H,W] (single channel) or [H,W,C]; channels must match the
// extractor. Output is [H,W,64] with spatial extents preserved.
core::Tensor extract_lowres(const core::Tensor& image, const FeatureExtractor& fx);

// Per-patch mean feature vectors over a non-overlapping 224x224 tiling from
// the top-left; margins smaller than one patch are dropped.
struct PatchGridFeatures {
    std::size_t grid_h = 0;
    std::size_t grid_w = 0;
    core::Tensor vectors;  // [grid_h, grid_w, 64]
};

PatchGridFeatures extract_highres_patches(const core::Tensor& wsi, const FeatureExtractor& fx);

}  // namespace corrfabr::features
