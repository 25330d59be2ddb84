#pragma once

#include <filesystem>

#include "corrfabr/core/tensor.hpp"

namespace corrfabr::io {

// Reads a PNG or PNM (P2/P3/P5/P6) image as a [H,W] or [H,W,3] tensor with
// values in [0, 255]. 16-bit and paletted PNGs are converted to 8-bit;
// alpha is dropped.
core::Tensor read_image(const std::filesystem::path& path);

// Writes [H,W] as binary PGM (P5) or [H,W,3] as binary PPM (P6); values are
// clamped to [0, 255] and rounded.
void write_pnm(const core::Tensor& image, const std::filesystem::path& path);

}  // namespace corrfabr::io
