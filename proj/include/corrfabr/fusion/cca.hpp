#pragma once

#include <vector>

#include "corrfabr/core/tensor.hpp"

namespace corrfabr::fusion {

struct CcaResult {
    std::vector<double> correlations;  // top-k, descending, in [0, 1]
    core::Tensor x_directions;         // [Dx, k]
    core::Tensor y_directions;         // [Dy, k]
};

// Classical canonical correlation analysis via whitening and an SVD of the
// cross-covariance. Used as the closed-form verification oracle for the
// trained fusion model: CCA upper-bounds the correlation any linear encoder
// pair can reach.
CcaResult cca_oracle(const core::Tensor& x, const core::Tensor& y, std::size_t k,
                     double ridge = 1e-6);

}  // namespace corrfabr::fusion
