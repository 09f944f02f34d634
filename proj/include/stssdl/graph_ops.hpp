#pragma once

#include "stssdl/autodiff.hpp"

namespace stssdl {

enum class AdjacencyKind { row_stochastic, raw };

// N x N graph topology. row_stochastic adjacencies are validated on
// construction: rows sum to 1 within 1e-9 and entries are non-negative.
struct Adjacency {
    NodePtr matrix;
    AdjacencyKind kind = AdjacencyKind::raw;
};

Adjacency make_row_stochastic(NodePtr matrix);

// Chebyshev polynomial weights to order K: K+1 weight matrices plus a bias.
struct ChebWeights {
    int order = 0;
    std::vector<NodePtr> weights;  // K+1 tensors [h_in x h_out]
    NodePtr bias;                  // [h_out]
};

// sum_{k=0..K} A^k · Z · W_k + bias, with A^0 = identity. Powers of A are
// built by iterated multiplication.
NodePtr cheb_graph_conv(const NodePtr& z, const Adjacency& adj, const ChebWeights& w);

// softmax_rows(relu(H'·H'^T)) with H' = [Hc|Vc|Ha|Va]·W + b.
Adjacency adaptive_graph(const NodePtr& hc, const NodePtr& vc, const NodePtr& ha,
                         const NodePtr& va, const NodePtr& w, const NodePtr& b);

// softmax_rows(relu(H·H^T)) for any [N x k] representation; the shared form
// behind both graph builders.
Adjacency gram_graph(const NodePtr& h);

// Same functional form over a learnable embedding table; used where no
// predefined sensor graph exists.
Adjacency node_embedding_graph(const NodePtr& emb);

}  // namespace stssdl
