#pragma once

#include <cstddef>

#include "corrfabr/core/tensor.hpp"

namespace corrfabr::core {

// Binary region mask over a [H,W] or [D,H,W] grid. Construction validates
// that every value is exactly 0 or 1.
class RegionMask {
public:
    RegionMask() = default;
    explicit RegionMask(Tensor values);

    static RegionMask zeros(std::vector<std::size_t> shape);

    const Tensor& tensor() const { return values_; }
    const std::vector<std::size_t>& shape() const { return values_.shape(); }
    std::size_t ndim() const { return values_.ndim(); }

    bool on(std::size_t i) const { return values_.at(i) != 0.0; }
    bool on(std::size_t y, std::size_t x) const { return values_.at(y, x) != 0.0; }
    bool on(std::size_t d, std::size_t y, std::size_t x) const { return values_.at(d, y, x) != 0.0; }

    void set(std::size_t i, bool v) { values_.at(i) = v ? 1.0 : 0.0; }

    std::size_t count() const;
    bool empty() const { return count() == 0; }

    // For [D,H,W] masks, the [H,W] mask of one slice.
    RegionMask slice(std::size_t d) const;

private:
    Tensor values_;
};

}  // namespace corrfabr::core
