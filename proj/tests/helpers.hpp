#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "stssdl/autodiff.hpp"
#include "stssdl/rng.hpp"

namespace stssdl::testing {

// Builds a scalar-valued graph from fresh leaves; called once per
// evaluation so the dynamic tape is rebuilt every time.
using GraphFn = std::function<NodePtr(const std::vector<NodePtr>&)>;

inline std::vector<NodePtr> as_leaves(const std::vector<Tensor>& values) {
    std::vector<NodePtr> leaves;
    leaves.reserve(values.size());
    for (const Tensor& v : values) leaves.push_back(leaf(v));
    return leaves;
}

inline double eval_scalar(const GraphFn& f, const std::vector<Tensor>& values) {
    return f(as_leaves(values))->value[0];
}

// Max relative error between analytic gradients and central finite
// differences over every coordinate of every input.
inline double max_fd_rel_err(const GraphFn& f, std::vector<Tensor> values, double step = 1e-6) {
    auto leaves = as_leaves(values);
    backward(f(leaves));

    double worst = 0.0;
    for (std::size_t k = 0; k < values.size(); ++k) {
        for (std::size_t i = 0; i < values[k].size(); ++i) {
            const double saved = values[k][i];
            values[k][i] = saved + step;
            const double up = eval_scalar(f, values);
            values[k][i] = saved - step;
            const double down = eval_scalar(f, values);
            values[k][i] = saved;
            const double fd = (up - down) / (2.0 * step);
            const double an = leaves[k]->grad[i];
            worst = std::max(worst, std::abs(fd - an) / std::max(1.0, std::abs(fd)));
        }
    }
    return worst;
}

// Plain triple-loop product, independent of the library kernels.
inline Tensor dense_mm(const Tensor& a, const Tensor& b) {
    Tensor out({a.rows(), b.cols()});
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) s += a.at(i, k) * b.at(k, j);
            out.at(i, j) = s;
        }
    return out;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
    return worst;
}

}  // namespace stssdl::testing
