#include "stssdl/gcru.hpp"

namespace stssdl {

NodePtr gcru_cell(const NodePtr& x_t, const NodePtr& h_prev, const Adjacency& adj,
                  const GcruParams& p) {
    NodePtr xh = concat_features({x_t, h_prev});
    NodePtr r = sigmoid(cheb_graph_conv(xh, adj, p.theta_r));
    NodePtr u = sigmoid(cheb_graph_conv(xh, adj, p.theta_u));
    NodePtr c = tanh(cheb_graph_conv(concat_features({x_t, mul(r, h_prev)}), adj, p.theta_c));
    // u.H + (1-u).c, written as u.(H-c) + c to save a node
    return add(mul(u, sub(h_prev, c)), c);
}

NodePtr encode_sequence(const std::vector<NodePtr>& inputs, const Adjacency& adj,
                        const GcruParams& p, const NodePtr& h0) {
    if (inputs.empty()) throw ContractError("encode_sequence: empty input sequence");
    NodePtr h = h0;
    for (const NodePtr& x : inputs) h = gcru_cell(x, h, adj, p);
    return h;
}

std::vector<NodePtr> encode_sequence_all(const std::vector<NodePtr>& inputs, const Adjacency& adj,
                                         const GcruParams& p, const NodePtr& h0) {
    if (inputs.empty()) throw ContractError("encode_sequence: empty input sequence");
    std::vector<NodePtr> states;
    states.reserve(inputs.size());
    NodePtr h = h0;
    for (const NodePtr& x : inputs) {
        h = gcru_cell(x, h, adj, p);
        states.push_back(h);
    }
    return states;
}

std::vector<NodePtr> decode_sequence(const NodePtr& h_init, const Adjacency& adj_adaptive,
                                     const GcruParams& p_dec, const NodePtr& out_proj,
                                     std::size_t steps,
                                     const std::vector<NodePtr>& step_embeddings) {
    return decode_sequence_stacked({h_init}, adj_adaptive, {p_dec}, out_proj, steps,
                                   step_embeddings);
}

std::vector<NodePtr> decode_sequence_stacked(const std::vector<NodePtr>& h_init,
                                             const Adjacency& adj_adaptive,
                                             const std::vector<GcruParams>& p_dec,
                                             const NodePtr& out_proj, std::size_t steps,
                                             const std::vector<NodePtr>& step_embeddings) {
    if (steps < 1) throw ContractError("decode_sequence: steps must be >= 1");
    if (step_embeddings.size() != steps) {
        throw ContractError("decode_sequence: expected " + std::to_string(steps) +
                            " step embeddings, got " + std::to_string(step_embeddings.size()));
    }
    if (h_init.size() != p_dec.size() || h_init.empty()) {
        throw ContractError("decode_sequence: one initial state per layer required");
    }

    const std::size_t n = h_init[0]->value.rows();
    const std::size_t channels = out_proj->value.cols();
    std::vector<NodePtr> layer_state = h_init;
    std::vector<NodePtr> predictions;
    predictions.reserve(steps);

    NodePtr fed_value = constant(Tensor::zeros({n, channels}));  // go symbol
    for (std::size_t t = 0; t < steps; ++t) {
        NodePtr layer_input = concat_features({fed_value, step_embeddings[t]});
        for (std::size_t l = 0; l < p_dec.size(); ++l) {
            layer_state[l] = gcru_cell(layer_input, layer_state[l], adj_adaptive, p_dec[l]);
            layer_input = layer_state[l];
        }
        NodePtr pred = matmul(layer_state.back(), out_proj);
        predictions.push_back(pred);
        fed_value = pred;
    }
    return predictions;
}

}  // namespace stssdl
