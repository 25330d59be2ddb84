#pragma once

#include <array>

#include "corrfabr/core/tensor.hpp"

namespace corrfabr::preprocess {

// Two-stain optical-density basis with the 99th-percentile concentration of
// each stain. Stain vectors are unit-norm with nonnegative components;
// stain1 is the one with the larger red OD component.
struct StainBasis {
    std::array<double, 3> stain1{};
    std::array<double, 3> stain2{};
    double c1_99 = 0.0;
    double c2_99 = 0.0;
};

// Macenko stain estimation on an RGB image with values in [0, 255].
// Optical density is -log10((I+1)/256); pixels whose OD vector norm is below
// beta are treated as background. The stain directions are the alpha and
// (100 - alpha) percentile angles of the tissue cloud within its leading
// 2-D OD plane.
StainBasis macenko_fit(const core::Tensor& rgb, double beta = 0.15, double alpha = 1.0);

// Re-renders the image with target stains: per-pixel nonnegative least
// squares concentrations against the source basis, rescaled by the
// target/source concentration maxima. Output clamped to [0, 255].
core::Tensor macenko_normalize(const core::Tensor& rgb, const StainBasis& source,
                               const StainBasis& target);

}  // namespace corrfabr::preprocess
