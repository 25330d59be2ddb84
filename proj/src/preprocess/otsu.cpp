#include "corrfabr/preprocess/otsu.hpp"

#include <algorithm>
#include <vector>

#include "corrfabr/core/error.hpp"

namespace corrfabr::preprocess {

OtsuResult otsu_threshold(const core::Tensor& gray, std::size_t levels, OtsuForeground foreground) {
    if (levels < 2) throw InputError("otsu needs at least 2 histogram levels");
    const std::size_t n = gray.numel();
    if (n == 0) throw InputError("empty image");

    const auto [lo_it, hi_it] = std::minmax_element(gray.vec().begin(), gray.vec().end());
    const double lo = *lo_it, hi = *hi_it;
    if (lo == hi) throw InputError("constant image has no Otsu threshold");

    // Per-bin counts and sums of the actual pixel values, so class means are
    // exact rather than bin-center approximations.
    const double bin_w = (hi - lo) / static_cast<double>(levels);
    std::vector<std::size_t> bin_of(n);
    std::vector<double> count(levels, 0.0), sum(levels, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        auto b = static_cast<std::size_t>((gray.at(i) - lo) / bin_w);
        if (b >= levels) b = levels - 1;
        bin_of[i] = b;
        count[b] += 1.0;
        sum[b] += gray.at(i);
    }

    const double total_count = static_cast<double>(n);
    double total_sum = 0.0;
    for (double s : sum) total_sum += s;

    // Between-class variance w0*w1*(mu0-mu1)^2 over every split; ties go to
    // the lower threshold (strict > when scanning upward).
    double best = -1.0;
    std::size_t best_t = 0;
    double c0 = 0.0, s0 = 0.0;
    for (std::size_t t = 0; t + 1 < levels; ++t) {
        c0 += count[t];
        s0 += sum[t];
        const double c1 = total_count - c0;
        if (c0 == 0.0 || c1 == 0.0) continue;
        const double mu0 = s0 / c0;
        const double mu1 = (total_sum - s0) / c1;
        const double d = mu0 - mu1;
        const double sigma_b = (c0 / total_count) * (c1 / total_count) * d * d;
        if (sigma_b > best) {
            best = sigma_b;
            best_t = t;
        }
    }
    if (best < 0.0) throw InputError("constant image has no Otsu threshold");

    OtsuResult result;
    result.threshold = lo + static_cast<double>(best_t + 1) * bin_w;
    core::Tensor mask(gray.shape());
    const bool dark = foreground == OtsuForeground::dark;
    for (std::size_t i = 0; i < n; ++i) {
        const bool low_class = bin_of[i] <= best_t;
        mask.at(i) = (low_class == dark) ? 1.0 : 0.0;
    }
    result.mask = core::RegionMask(std::move(mask));
    return result;
}

}  // namespace corrfabr::preprocess
