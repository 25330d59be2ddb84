#pragma once

#include "corrfabr/core/mask.hpp"
#include "corrfabr/core/tensor.hpp"

namespace corrfabr::preprocess {

// Which side of the threshold counts as foreground (tissue). H&E tissue is
// darker than the white background, so dark-is-foreground is the default.
enum class OtsuForeground { dark, bright };

struct OtsuResult {
    double threshold = 0.0;
    core::RegionMask mask;
};

// Histogram Otsu: builds a `levels`-bin histogram over [min, max], picks the
// bin split maximizing between-class variance, ties broken toward the lower
// threshold. The returned threshold is the upper edge of the last bin in the
// low class; with foreground = dark the mask is (gray < threshold), so the
// mask agrees exactly with the histogram split.
OtsuResult otsu_threshold(const core::Tensor& gray, std::size_t levels = 256,
                          OtsuForeground foreground = OtsuForeground::dark);

}  // namespace corrfabr::preprocess
