#include "corrfabr/core/mask.hpp"

#include <utility>

#include "corrfabr/core/error.hpp"

namespace corrfabr::core {

RegionMask::RegionMask(Tensor values) : values_(std::move(values)) {
    for (double v : values_.vec()) {
        if (v != 0.0 && v != 1.0) throw InputError("mask values must be 0 or 1");
    }
}

RegionMask RegionMask::zeros(std::vector<std::size_t> shape) {
    RegionMask m;
    m.values_ = Tensor(std::move(shape));
    return m;
}

std::size_t RegionMask::count() const {
    std::size_t c = 0;
    for (double v : values_.vec()) c += v != 0.0;
    return c;
}

RegionMask RegionMask::slice(std::size_t d) const {
    if (values_.ndim() != 3) throw InputError("slice() requires a [D,H,W] mask");
    const std::size_t h = values_.extent(1), w = values_.extent(2);
    Tensor out({h, w});
    const double* src = values_.data() + d * h * w;
    for (std::size_t i = 0; i < h * w; ++i) out.at(i) = src[i];
    RegionMask m;
    m.values_ = std::move(out);
    return m;
}

}  // namespace corrfabr::core
