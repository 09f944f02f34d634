#pragma once

#include "stssdl/autodiff.hpp"

namespace stssdl {

// M learnable prototype vectors plus the query projections for the current
// and anchor streams (query_proj_a aliases query_proj_c when shared).
struct PrototypeBank {
    NodePtr prototypes;    // [M x d]
    NodePtr query_proj_c;  // [h x d]
    NodePtr query_proj_a;  // [h x d]

    std::size_t count() const { return prototypes->value.rows(); }
    std::size_t dim() const { return prototypes->value.cols(); }
};

// Per-node attention over the bank plus the top-2 ranking. pos/neg are the
// argmax and second argmax per row; ties break toward the lower index.
struct AttentionResult {
    NodePtr alpha;  // [N x M], rows sum to 1
    std::vector<std::size_t> pos_idx;
    std::vector<std::size_t> neg_idx;
};

NodePtr project_query(const NodePtr& h, const NodePtr& proj);

// alpha[n,i] = softmax_i(Q_n · P_i / sqrt(d)). Index selection carries no
// gradient; alpha itself is differentiable.
AttentionResult prototype_attention(const NodePtr& q, const PrototypeBank& bank);

// V = alpha · P
NodePtr aggregate_value(const NodePtr& alpha, const PrototypeBank& bank);

// Row n of the result is P[idx[n]]; gradient lands only on selected rows.
NodePtr gather_prototypes(const std::vector<std::size_t>& idx, const PrototypeBank& bank);

}  // namespace stssdl
