#pragma once

#include <cstdint>
#include <random>

#include "stssdl/tensor.hpp"

namespace stssdl {

// Seeded generator used everywhere randomness is needed. Reproducibility is
// guaranteed per build (std:: distributions are deterministic for a fixed
// standard library).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    double normal(double mean = 0.0, double stddev = 1.0) {
        std::normal_distribution<double> d(mean, stddev);
        return d(eng_);
    }

    double uniform(double lo, double hi) {
        std::uniform_real_distribution<double> d(lo, hi);
        return d(eng_);
    }

    std::uint64_t integer(std::uint64_t n) {
        std::uniform_int_distribution<std::uint64_t> d(0, n - 1);
        return d(eng_);
    }

    Tensor normal_tensor(Shape shape, double stddev, double mean = 0.0) {
        Tensor t(std::move(shape));
        for (double& v : t.data) v = normal(mean, stddev);
        return t;
    }

    Tensor uniform_tensor(Shape shape, double lo, double hi) {
        Tensor t(std::move(shape));
        for (double& v : t.data) v = uniform(lo, hi);
        return t;
    }

    std::mt19937_64& engine() { return eng_; }

private:
    std::mt19937_64 eng_;
};

}  // namespace stssdl
