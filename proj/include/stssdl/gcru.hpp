#pragma once

#include "stssdl/graph_ops.hpp"

namespace stssdl {

// Gate parameters of one Graph Convolution Recurrent Unit. All three gates
// share the Chebyshev order, the concatenated input extent (f_in + h) and
// the hidden extent h.
struct GcruParams {
    ChebWeights theta_r;
    ChebWeights theta_u;
    ChebWeights theta_c;
};

// One recurrent step:
//   r = sigmoid([X|H] * theta_r), u = sigmoid([X|H] * theta_u),
//   c = tanh([X | r.H] * theta_c), H' = u.H + (1-u).c
NodePtr gcru_cell(const NodePtr& x_t, const NodePtr& h_prev, const Adjacency& adj,
                  const GcruParams& p);

// Left-to-right recurrence over T inputs; returns the last hidden state.
NodePtr encode_sequence(const std::vector<NodePtr>& inputs, const Adjacency& adj,
                        const GcruParams& p, const NodePtr& h0);

// As above but keeping every hidden state, for stacked layers.
std::vector<NodePtr> encode_sequence_all(const std::vector<NodePtr>& inputs, const Adjacency& adj,
                                         const GcruParams& p, const NodePtr& h0);

// Autoregressive decoding: step 1 consumes a zero go-value concatenated with
// that step's embeddings; each projected prediction feeds the next input.
// step_embeddings[t] is [N x (f_in - C)]; returns T' predictions [N x C].
std::vector<NodePtr> decode_sequence(const NodePtr& h_init, const Adjacency& adj_adaptive,
                                     const GcruParams& p_dec, const NodePtr& out_proj,
                                     std::size_t steps,
                                     const std::vector<NodePtr>& step_embeddings);

// Stacked variant: one hidden state and parameter set per layer; the top
// layer's state is projected to the prediction.
std::vector<NodePtr> decode_sequence_stacked(const std::vector<NodePtr>& h_init,
                                             const Adjacency& adj_adaptive,
                                             const std::vector<GcruParams>& p_dec,
                                             const NodePtr& out_proj, std::size_t steps,
                                             const std::vector<NodePtr>& step_embeddings);

}  // namespace stssdl
