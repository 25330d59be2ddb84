#pragma once

#include <filesystem>

#include "corrfabr/core/tensor.hpp"

namespace corrfabr::io {

// On-disk dtype of the payload. In memory everything is f64; f32 files are
// widened on load.
enum class DType : unsigned char { f32 = 1, f64 = 2 };

// CFTN tensor file layout, little-endian throughout:
//   bytes 0..3   magic "CFTN"
//   byte  4      version (1)
//   byte  5      dtype (1 = f32, 2 = f64)
//   byte  6      ndim
//   then ndim x u64 extents, then the row-major payload.
void save_tensor(const core::Tensor& t, const std::filesystem::path& path, DType dtype = DType::f64);

core::Tensor load_tensor(const std::filesystem::path& path);

}  // namespace corrfabr::io
