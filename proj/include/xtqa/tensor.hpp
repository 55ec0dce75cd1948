#pragma once

#include <cstddef>
#include <vector>

namespace xtqa {

// Dense row-major tensor of 64-bit reals. Training math is all double;
// 32-bit floats appear only in checkpoint blobs and the diagram feature file.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::vector<std::size_t> shape_, std::vector<double> data_)
        : shape(std::move(shape_)), data(std::move(data_)) {}

    static Tensor zeros(std::vector<std::size_t> shape);
    static Tensor vec(std::vector<double> values);
    static Tensor scalar(double v);

    std::size_t size() const { return data.size(); }

    std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
    std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }

    double& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    bool all_finite() const;
    bool same_shape(const Tensor& other) const { return shape == other.shape; }
};

}  // namespace xtqa
