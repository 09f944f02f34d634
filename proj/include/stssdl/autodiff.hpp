#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <vector>

#include "stssdl/tensor.hpp"

namespace stssdl {

// Dynamic reverse-mode autodiff over dense tensors. The graph is rebuilt on
// every forward pass; backward() walks it once in reverse topological order.
// Gradients accumulate additively across paths and are zeroed explicitly at
// the start of each backward pass.

enum class OpKind : std::uint8_t {
    leaf,
    matmul,          // a[m,k] · b[k,n]
    matmul_nt,       // a[m,k] · b[n,k]^T
    add,
    sub,
    mul_elementwise,
    linear,          // x·w + b, bias broadcast over rows
    sigmoid,
    tanh,
    relu,            // also serves as max_with_zero
    exp,
    sqrt,
    div_elementwise,
    softmax_rows,
    concat_features, // column-wise concat of rank-2 inputs
    l1_norm_rows,    // [n,d] -> [n]
    sq_l2_norm_rows, // [n,d] -> [n]
    sum_rows,        // [n,d] -> [n]
    abs,
    mean_all,        // -> [1]
    scale,           // multiply by constant
    shift,           // add constant
    gather_rows,     // row selection with scatter-add adjoint
    stop_grad,
};

const char* op_name(OpKind kind);

class Node;
using NodePtr = std::shared_ptr<Node>;

// One vertex of the dynamic graph: value, gradient slot of identical shape,
// parent links, and the local-rule identity needed for the backward sweep.
class Node {
public:
    Tensor value;
    Tensor grad;
    OpKind kind = OpKind::leaf;
    bool stop = false;  // backward deposits nothing into parents when set
    std::vector<NodePtr> parents;
    double attr_scalar = 0.0;
    std::vector<std::size_t> attr_indices;
    std::uint64_t visit_mark = 0;  // traversal stamp owned by backward()

    explicit Node(Tensor v, OpKind k = OpKind::leaf) : value(std::move(v)), kind(k) {}

    // The gradient slot is materialized on first use; backward() zeroes
    // every reachable slot before accumulating.
    void zero_grad() {
        if (grad.data.size() != value.data.size()) {
            grad = Tensor::zeros(value.shape);
        } else {
            std::fill(grad.data.begin(), grad.data.end(), 0.0);
        }
    }
};

NodePtr leaf(Tensor value);
NodePtr constant(Tensor value);  // a leaf whose gradient nobody reads

NodePtr matmul(const NodePtr& a, const NodePtr& b);
NodePtr matmul_nt(const NodePtr& a, const NodePtr& b);
NodePtr add(const NodePtr& a, const NodePtr& b);
NodePtr sub(const NodePtr& a, const NodePtr& b);
NodePtr mul(const NodePtr& a, const NodePtr& b);
NodePtr linear(const NodePtr& x, const NodePtr& w, const NodePtr& b);
NodePtr sigmoid(const NodePtr& x);
NodePtr tanh(const NodePtr& x);
NodePtr relu(const NodePtr& x);
NodePtr max_with_zero(const NodePtr& x);
NodePtr exp(const NodePtr& x);
NodePtr sqrt(const NodePtr& x);
NodePtr div(const NodePtr& a, const NodePtr& b);
NodePtr softmax_rows(const NodePtr& x);
NodePtr concat_features(const std::vector<NodePtr>& parts);
NodePtr l1_norm_rows(const NodePtr& x);
NodePtr sq_l2_norm_rows(const NodePtr& x);
NodePtr sum_rows(const NodePtr& x);
NodePtr abs(const NodePtr& x);
NodePtr mean_all(const NodePtr& x);
NodePtr scale(const NodePtr& x, double factor);
NodePtr shift(const NodePtr& x, double offset);
NodePtr gather_rows(const NodePtr& m, std::vector<std::size_t> indices);
NodePtr stop_gradient(const NodePtr& x);

// Seeds root (scalar-shaped) with gradient 1 and propagates. Zeroes every
// reachable gradient slot first, so repeat calls are bitwise reproducible.
void backward(const NodePtr& root);

// Capture/replay of stop_gradient sites for the finite-difference harness.
// Backward treats stopped branches as constants, so a faithful FD probe
// must hold them at their base-point values while parameters move: record
// one forward pass, then play the captured tensors back into every
// perturbed evaluation (sites are visited in construction order).
enum class StopTapeMode { record, playback };

class StopTape {
public:
    StopTape(StopTapeMode mode, std::vector<Tensor>* storage);
    ~StopTape();
    StopTape(const StopTape&) = delete;
    StopTape& operator=(const StopTape&) = delete;
};

}  // namespace stssdl
