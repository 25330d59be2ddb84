#pragma once

#include "corrfabr/core/mask.hpp"
#include "corrfabr/core/tensor.hpp"

namespace corrfabr::preprocess {

// (volume - mu) / sigma with mu, sigma the mean and population standard
// deviation of the voxels where mask = 1. If sigma < 1e-8 the result is all
// zeros (constant crops occur in degenerate inputs).
core::Tensor zscore_normalize_lesion(const core::Tensor& volume, const core::RegionMask& mask);

}  // namespace corrfabr::preprocess
