#pragma once

#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <vector>

namespace rfcloak::nn {

// Dense row-major float64 array.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> dims, double fill = 0.0)
        : shape(std::move(dims)), data(count(shape), fill) {}

    static std::size_t count(std::span<const int> dims) {
        return std::accumulate(dims.begin(), dims.end(), std::size_t{1},
                               [](std::size_t a, int d) { return a * static_cast<std::size_t>(d); });
    }

    std::size_t size() const { return data.size(); }
    int dim(std::size_t i) const { return shape[i]; }
    int rank() const { return static_cast<int>(shape.size()); }
    double* ptr() { return data.data(); }
    const double* ptr() const { return data.data(); }
    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    bool all_finite() const;
    bool operator==(const Tensor&) const = default;
};

}  // namespace rfcloak::nn
