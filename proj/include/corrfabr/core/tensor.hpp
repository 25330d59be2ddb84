#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace corrfabr::core {

// Dense row-major N-dimensional grid of doubles. The universal carrier for
// images, masks, feature maps and model parameters. Treat instances as
// immutable once fully constructed; sharing across threads is then safe.
class Tensor {
public:
    Tensor() = default;

    // Zero-filled tensor of the given shape.
    explicit Tensor(std::vector<std::size_t> shape);

    // Takes ownership of data; data.size() must equal the shape product.
    Tensor(std::vector<std::size_t> shape, std::vector<double> data);

    static Tensor full(std::vector<std::size_t> shape, double value);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t ndim() const { return shape_.size(); }
    std::size_t numel() const { return data_.size(); }
    std::size_t extent(std::size_t axis) const;

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& vec() { return data_; }
    const std::vector<double>& vec() const { return data_; }

    double& at(std::size_t i) { return data_[i]; }
    double at(std::size_t i) const { return data_[i]; }
    double& at(std::size_t i, std::size_t j) { return data_[i * stride_[0] + j]; }
    double at(std::size_t i, std::size_t j) const { return data_[i * stride_[0] + j]; }
    double& at(std::size_t i, std::size_t j, std::size_t k) {
        return data_[i * stride_[0] + j * stride_[1] + k];
    }
    double at(std::size_t i, std::size_t j, std::size_t k) const {
        return data_[i * stride_[0] + j * stride_[1] + k];
    }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool all_finite() const;

    // Reinterprets the flat data under a new shape with the same element count.
    Tensor reshaped(std::vector<std::size_t> shape) const;

private:
    std::vector<std::size_t> shape_;
    std::vector<std::size_t> stride_;  // row-major strides, innermost = 1
    std::vector<double> data_;

    void compute_strides();
};

std::size_t shape_product(const std::vector<std::size_t>& shape);
std::string shape_string(const std::vector<std::size_t>& shape);

}  // namespace corrfabr::core
