#include "corrfabr/preprocess/normalize.hpp"

#include <cmath>

#include "corrfabr/core/error.hpp"

namespace corrfabr::preprocess {

core::Tensor zscore_normalize_lesion(const core::Tensor& volume, const core::RegionMask& mask) {
    if (!volume.same_shape(mask.tensor())) throw InputError("volume and mask shapes differ");

    const std::size_t n = volume.numel();
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (mask.on(i)) {
            sum += volume.at(i);
            ++count;
        }
    }
    if (count == 0) throw InputError("empty mask in zscore_normalize_lesion");
    const double mean = sum / static_cast<double>(count);

    double sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (mask.on(i)) {
            const double d = volume.at(i) - mean;
            sq += d * d;
        }
    }
    const double sigma = std::sqrt(sq / static_cast<double>(count));

    core::Tensor out(volume.shape());
    if (sigma < 1e-8) return out;  // constant lesion maps to all zeros
    for (std::size_t i = 0; i < n; ++i) out.at(i) = (volume.at(i) - mean) / sigma;
    return out;
}

}  // namespace corrfabr::preprocess
