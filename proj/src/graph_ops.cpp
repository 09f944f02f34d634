#include "stssdl/graph_ops.hpp"

#include <cmath>

namespace stssdl {

Adjacency make_row_stochastic(NodePtr matrix) {
    require_rank(matrix->value, 2, "adjacency");
    const Tensor& m = matrix->value;
    if (m.rows() != m.cols()) {
        throw DimensionError("adjacency: expected square matrix, got " + shape_str(m.shape));
    }
    for (std::size_t i = 0; i < m.rows(); ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < m.cols(); ++j) {
            const double v = m.at(i, j);
            if (v < 0.0) throw NumericError("adjacency: negative entry in row-stochastic matrix");
            sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-9) {
            throw NumericError("adjacency: row " + std::to_string(i) + " sums to " +
                               std::to_string(sum) + ", expected 1");
        }
    }
    return Adjacency{std::move(matrix), AdjacencyKind::row_stochastic};
}

NodePtr cheb_graph_conv(const NodePtr& z, const Adjacency& adj, const ChebWeights& w) {
    if (w.order < 0) throw ContractError("cheb_graph_conv: negative order");
    if (w.weights.size() != static_cast<std::size_t>(w.order) + 1) {
        throw ContractError("cheb_graph_conv: expected " + std::to_string(w.order + 1) +
                            " weight tensors, got " + std::to_string(w.weights.size()));
    }
    require_rank(z->value, 2, "cheb_graph_conv");
    const Tensor& a = adj.matrix->value;
    if (a.rows() != z->value.rows()) {
        throw DimensionError("cheb_graph_conv: adjacency " + shape_str(a.shape) +
                             " does not match input " + shape_str(z->value.shape));
    }

    // k = 0 carries the bias; higher powers accumulate on top.
    NodePtr out = linear(z, w.weights[0], w.bias);
    NodePtr propagated = z;
    for (int k = 1; k <= w.order; ++k) {
        propagated = matmul(adj.matrix, propagated);
        out = add(out, matmul(propagated, w.weights[static_cast<std::size_t>(k)]));
    }
    return out;
}

Adjacency gram_graph(const NodePtr& h) {
    return make_row_stochastic(softmax_rows(relu(matmul_nt(h, h))));
}

Adjacency adaptive_graph(const NodePtr& hc, const NodePtr& vc, const NodePtr& ha,
                         const NodePtr& va, const NodePtr& w, const NodePtr& b) {
    const std::size_t n = hc->value.rows();
    for (const NodePtr& part : {vc, ha, va}) {
        if (part->value.rows() != n) {
            throw DimensionError("adaptive_graph: row counts disagree, " +
                                 shape_str(hc->value.shape) + " vs " +
                                 shape_str(part->value.shape));
        }
    }
    NodePtr h_prime = linear(concat_features({hc, vc, ha, va}), w, b);
    return gram_graph(h_prime);
}

Adjacency node_embedding_graph(const NodePtr& emb) {
    require_rank(emb->value, 2, "node_embedding_graph");
    if (emb->value.cols() < 1) {
        throw DimensionError("node_embedding_graph: embedding width must be >= 1");
    }
    return gram_graph(emb);
}

}  // namespace stssdl
