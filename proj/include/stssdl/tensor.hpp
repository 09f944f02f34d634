#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "stssdl/errors.hpp"

namespace stssdl {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major tensor of 64-bit reals. Immutable by convention once it
// enters the autodiff graph; plain mutable storage elsewhere.
struct Tensor {
    Shape shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(Shape s, double fill = 0.0)
        : shape(std::move(s)), data(shape_numel(shape), fill) {}
    Tensor(Shape s, std::vector<double> values);

    static Tensor zeros(Shape s) { return Tensor(std::move(s)); }
    static Tensor full(Shape s, double v) { return Tensor(std::move(s), v); }
    static Tensor scalar(double v) { return Tensor(Shape{1}, std::vector<double>{v}); }

    std::size_t size() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }
    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    // 2-D accessors; callers guarantee rank 2.
    std::size_t rows() const { return shape[0]; }
    std::size_t cols() const { return shape[1]; }
    double& at(std::size_t i, std::size_t j) { return data[i * shape[1] + j]; }
    double at(std::size_t i, std::size_t j) const { return data[i * shape[1] + j]; }

    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    bool all_finite() const;
};

void require_rank(const Tensor& t, std::size_t rank, const char* op);
void require_same_shape(const Tensor& a, const Tensor& b, const char* op);

}  // namespace stssdl
