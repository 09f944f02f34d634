#include "stssdl/prototype.hpp"

#include <cmath>

namespace stssdl {

NodePtr project_query(const NodePtr& h, const NodePtr& proj) { return matmul(h, proj); }

AttentionResult prototype_attention(const NodePtr& q, const PrototypeBank& bank) {
    if (bank.count() < 2) {
        throw ContractError("prototype_attention: top-2 retrieval needs at least 2 prototypes");
    }
    if (q->value.cols() != bank.dim()) {
        throw DimensionError("prototype_attention: query width " + shape_str(q->value.shape) +
                             " does not match bank " + shape_str(bank.prototypes->value.shape));
    }

    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(bank.dim()));
    AttentionResult res;
    res.alpha = softmax_rows(scale(matmul_nt(q, bank.prototypes), inv_sqrt_d));

    const Tensor& a = res.alpha->value;
    const std::size_t n = a.rows(), m = a.cols();
    res.pos_idx.resize(n);
    res.neg_idx.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t best = 0, second = 1;
        if (a.at(i, second) > a.at(i, best)) std::swap(best, second);
        for (std::size_t j = 2; j < m; ++j) {
            const double v = a.at(i, j);
            if (v > a.at(i, best)) {
                second = best;
                best = j;
            } else if (v > a.at(i, second)) {
                second = j;
            }
        }
        res.pos_idx[i] = best;
        res.neg_idx[i] = second;
    }
    return res;
}

NodePtr aggregate_value(const NodePtr& alpha, const PrototypeBank& bank) {
    return matmul(alpha, bank.prototypes);
}

NodePtr gather_prototypes(const std::vector<std::size_t>& idx, const PrototypeBank& bank) {
    return gather_rows(bank.prototypes, idx);
}

}  // namespace stssdl
