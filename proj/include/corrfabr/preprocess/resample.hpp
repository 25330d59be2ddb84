#pragma once

#include <array>
#include <cstddef>

#include "corrfabr/core/mask.hpp"
#include "corrfabr/core/tensor.hpp"

namespace corrfabr::preprocess {

// In-plane bounding box, inclusive pixel coordinates.
struct BoundingBox {
    std::size_t row0 = 0, row1 = 0, col0 = 0, col1 = 0;
    std::size_t height() const { return row1 - row0 + 1; }
    std::size_t width() const { return col1 - col0 + 1; }
};

// Union over slices of the in-plane extent of a [H,W] or [D,H,W] mask.
BoundingBox mask_bounding_box(const core::RegionMask& mask);

// Bilinear resize with half-pixel sample centers and edge clamping:
// source coordinate = (dst + 0.5) * src_extent / dst_extent - 0.5.
core::Tensor bilinear_resize(const core::Tensor& image, std::size_t out_h, std::size_t out_w);

// Per-slice crop of the mask's in-plane bounding box (union over slices),
// bilinearly resized to out_size x out_size. Slice count is unchanged.
core::Tensor crop_resize_lesion(const core::Tensor& volume, const core::RegionMask& mask,
                                std::size_t out_size = 224);

// Nearest-neighbour mask resize (keeps values binary).
core::RegionMask resize_mask(const core::RegionMask& mask, std::size_t out_h, std::size_t out_w);

// The mask analogue of crop_resize_lesion, for carrying lesion masks through
// the same crop geometry.
core::RegionMask crop_resize_mask(const core::RegionMask& mask, const BoundingBox& box,
                                  std::size_t out_size = 224);

}  // namespace corrfabr::preprocess
