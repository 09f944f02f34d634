#include "stssdl/model.hpp"

#include <cmath>

#include "stssdl/rng.hpp"

namespace stssdl {

Variant parse_variant(const std::string& text) {
    if (text == "full") return Variant::full;
    if (text == "no-con") return Variant::no_con;
    if (text == "no-dev") return Variant::no_dev;
    if (text == "no-both") return Variant::no_both;
    if (text == "no-ssdl") return Variant::no_ssdl;
    if (text == "naive") return Variant::naive;
    throw ConfigError("unknown variant '" + text +
                      "', expected full|no-con|no-dev|no-both|no-ssdl|naive");
}

const char* variant_name(Variant v) {
    switch (v) {
        case Variant::full: return "full";
        case Variant::no_con: return "no-con";
        case Variant::no_dev: return "no-dev";
        case Variant::no_both: return "no-both";
        case Variant::no_ssdl: return "no-ssdl";
        case Variant::naive: return "naive";
    }
    return "?";
}

double ModelConfig::effective_lambda_con() const {
    if (variant == Variant::no_con || variant == Variant::no_both ||
        variant == Variant::no_ssdl || variant == Variant::naive) {
        return 0.0;
    }
    return lambda_con;
}

double ModelConfig::effective_lambda_dev() const {
    if (variant == Variant::no_dev || variant == Variant::no_both || variant == Variant::no_ssdl) {
        return 0.0;
    }
    return lambda_dev;
}

void ModelConfig::validate() const {
    if (n_nodes == 0 || channels == 0 || input_len == 0 || horizon == 0 || hidden == 0 ||
        query_dim == 0 || e_input == 0 || e_node == 0 || e_tod == 0 || e_graph == 0 ||
        steps_per_day == 0 || enc_layers == 0 || dec_layers == 0) {
        throw ConfigError("model config: all extents must be positive");
    }
    if (uses_prototypes() && prototype_count < 2) {
        throw ConfigError("model config: top-2 retrieval needs at least 2 prototypes");
    }
    if (cheb_order < 0) throw ConfigError("model config: cheb_order must be >= 0");
    if (lambda_con < 0.0 || lambda_dev < 0.0) {
        throw ConfigError("model config: loss weights must be non-negative");
    }
    if (margin <= 0.0) throw ConfigError("model config: margin must be positive");
}

namespace {

ChebWeights init_cheb(std::size_t f_in, std::size_t h, int order, Rng& rng) {
    ChebWeights w;
    w.order = order;
    const std::size_t in = f_in + h;
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    for (int k = 0; k <= order; ++k) {
        w.weights.push_back(leaf(rng.uniform_tensor({in, h}, -bound, bound)));
    }
    w.bias = leaf(Tensor::zeros({h}));
    return w;
}

GcruParams init_gcru(std::size_t f_in, std::size_t h, int order, Rng& rng) {
    GcruParams p;
    p.theta_r = init_cheb(f_in, h, order, rng);
    p.theta_u = init_cheb(f_in, h, order, rng);
    p.theta_c = init_cheb(f_in, h, order, rng);
    return p;
}

NodePtr init_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
    return leaf(rng.uniform_tensor({rows, cols}, -bound, bound));
}

NodePtr init_embedding(std::size_t rows, std::size_t cols, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
    return leaf(rng.uniform_tensor({rows, cols}, -bound, bound));
}

std::size_t enc_input_width(const ModelConfig& cfg) {
    return cfg.e_input + cfg.e_node + cfg.e_tod;
}

std::size_t dec_input_width(const ModelConfig& cfg) {
    return cfg.channels + cfg.e_node + cfg.e_tod;
}

std::size_t adapt_input_width(const ModelConfig& cfg) {
    return cfg.variant == Variant::naive ? 2 * cfg.hidden : 2 * (cfg.hidden + cfg.query_dim);
}

void collect_gcru(const std::string& prefix, const GcruParams& p,
                  std::vector<std::pair<std::string, NodePtr>>& out) {
    const struct {
        const char* name;
        const ChebWeights& w;
    } gates[] = {{"theta_r", p.theta_r}, {"theta_u", p.theta_u}, {"theta_c", p.theta_c}};
    for (const auto& g : gates) {
        for (std::size_t k = 0; k < g.w.weights.size(); ++k) {
            out.emplace_back(prefix + "." + g.name + ".w" + std::to_string(k), g.w.weights[k]);
        }
        out.emplace_back(prefix + "." + g.name + ".bias", g.w.bias);
    }
}

}  // namespace

std::vector<std::pair<std::string, NodePtr>> ModelParams::all() const {
    std::vector<std::pair<std::string, NodePtr>> out;
    for (std::size_t l = 0; l < encoder.size(); ++l) {
        collect_gcru("encoder." + std::to_string(l), encoder[l], out);
    }
    for (std::size_t l = 0; l < decoder.size(); ++l) {
        collect_gcru("decoder." + std::to_string(l), decoder[l], out);
    }
    out.emplace_back("node_emb", node_emb);
    out.emplace_back("tod_table", tod_table);
    out.emplace_back("input_lift", input_lift);
    out.emplace_back("graph_emb", graph_emb);
    if (bank.prototypes) {
        out.emplace_back("prototypes", bank.prototypes);
        out.emplace_back("query_proj_c", bank.query_proj_c);
        if (bank.query_proj_a != bank.query_proj_c) {
            out.emplace_back("query_proj_a", bank.query_proj_a);
        }
    }
    if (adapt_w) {
        out.emplace_back("adapt_w", adapt_w);
        out.emplace_back("adapt_b", adapt_b);
    }
    for (std::size_t l = 0; l < dec_init.size(); ++l) {
        out.emplace_back("dec_init." + std::to_string(l), dec_init[l]);
    }
    out.emplace_back("out_proj", out_proj);
    return out;
}

ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Rng rng(seed);
    ModelParams p;

    for (std::size_t l = 0; l < cfg.enc_layers; ++l) {
        const std::size_t f_in = l == 0 ? enc_input_width(cfg) : cfg.hidden;
        p.encoder.push_back(init_gcru(f_in, cfg.hidden, cfg.cheb_order, rng));
    }
    for (std::size_t l = 0; l < cfg.dec_layers; ++l) {
        const std::size_t f_in = l == 0 ? dec_input_width(cfg) : cfg.hidden;
        p.decoder.push_back(init_gcru(f_in, cfg.hidden, cfg.cheb_order, rng));
    }

    p.node_emb = init_embedding(cfg.n_nodes, cfg.e_node, rng);
    p.tod_table = init_embedding(cfg.steps_per_day, cfg.e_tod, rng);
    p.input_lift = init_matrix(cfg.channels, cfg.e_input, rng);
    p.graph_emb = init_embedding(cfg.n_nodes, cfg.e_graph, rng);

    if (cfg.uses_prototypes()) {
        // Near-uniform initial attention: logits stay O(1) when prototypes
        // are drawn with deviation 1/sqrt(d).
        const double proto_std = 1.0 / std::sqrt(static_cast<double>(cfg.query_dim));
        p.bank.prototypes =
            leaf(rng.normal_tensor({cfg.prototype_count, cfg.query_dim}, proto_std));
        p.bank.query_proj_c = init_matrix(cfg.hidden, cfg.query_dim, rng);
        p.bank.query_proj_a =
            cfg.share_query_proj ? p.bank.query_proj_c : init_matrix(cfg.hidden, cfg.query_dim, rng);
    }

    if (cfg.variant != Variant::no_ssdl) {
        p.adapt_w = init_matrix(adapt_input_width(cfg), cfg.query_dim, rng);
        p.adapt_b = leaf(Tensor::zeros({cfg.query_dim}));
    }

    if (cfg.uses_prototypes()) {
        // Identity block on the hidden part, zero block on the prototype
        // part: decoding starts from the encoder state and learns how much
        // of V^c to blend in.
        for (std::size_t l = 0; l < cfg.dec_layers; ++l) {
            Tensor w({cfg.hidden + cfg.query_dim, cfg.hidden});
            for (std::size_t i = 0; i < cfg.hidden; ++i) w.at(i, i) = 1.0;
            p.dec_init.push_back(leaf(std::move(w)));
        }
    }

    p.out_proj = init_matrix(cfg.hidden, cfg.channels, rng);

    std::size_t actual = 0;
    for (const auto& [name, node] : p.all()) actual += node->value.size();
    const std::size_t expected = expected_param_count(cfg);
    if (actual != expected) {
        throw ContractError("init_params: parameter count " + std::to_string(actual) +
                            " does not match closed form " + std::to_string(expected));
    }
    return p;
}

std::size_t expected_param_count(const ModelConfig& cfg) {
    const std::size_t h = cfg.hidden, d = cfg.query_dim;
    const std::size_t per_gate_k = static_cast<std::size_t>(cfg.cheb_order) + 1;
    auto gcru_count = [&](std::size_t f_in) { return 3 * (per_gate_k * (f_in + h) * h + h); };

    std::size_t total = 0;
    for (std::size_t l = 0; l < cfg.enc_layers; ++l) {
        total += gcru_count(l == 0 ? enc_input_width(cfg) : h);
    }
    for (std::size_t l = 0; l < cfg.dec_layers; ++l) {
        total += gcru_count(l == 0 ? dec_input_width(cfg) : h);
    }
    total += cfg.n_nodes * cfg.e_node + cfg.steps_per_day * cfg.e_tod +
             cfg.channels * cfg.e_input + cfg.n_nodes * cfg.e_graph;
    if (cfg.uses_prototypes()) {
        total += cfg.prototype_count * d + h * d;
        if (!cfg.share_query_proj) total += h * d;
        total += cfg.dec_layers * (h + d) * h;
    }
    if (cfg.variant != Variant::no_ssdl) total += adapt_input_width(cfg) * d + d;
    total += h * cfg.channels;
    return total;
}

std::vector<NodePtr> embed_inputs(const Tensor& x_norm, const std::vector<std::size_t>& tods,
                                  const ModelParams& params, const ModelConfig& cfg) {
    require_rank(x_norm, 3, "embed_inputs");
    const std::size_t steps = x_norm.shape[0], n = x_norm.shape[1], c = x_norm.shape[2];
    if (tods.size() < steps) throw ContractError("embed_inputs: missing time-of-day indices");

    std::vector<NodePtr> out;
    out.reserve(steps);
    for (std::size_t t = 0; t < steps; ++t) {
        if (tods[t] >= cfg.steps_per_day) {
            throw ContractError("embed_inputs: time-of-day index " + std::to_string(tods[t]) +
                                " out of range");
        }
        Tensor step({n, c});
        std::copy(x_norm.data.begin() + static_cast<std::ptrdiff_t>(t * n * c),
                  x_norm.data.begin() + static_cast<std::ptrdiff_t>((t + 1) * n * c),
                  step.data.begin());
        NodePtr lifted = matmul(constant(std::move(step)), params.input_lift);
        NodePtr tod = gather_rows(params.tod_table, std::vector<std::size_t>(n, tods[t]));
        out.push_back(concat_features({lifted, params.node_emb, tod}));
    }
    return out;
}

namespace {

// Encode through all layers; returns the final hidden state of each layer.
std::vector<NodePtr> encode_stack(const std::vector<NodePtr>& inputs, const Adjacency& adj,
                                  const std::vector<GcruParams>& layers, std::size_t n,
                                  std::size_t h) {
    std::vector<NodePtr> finals;
    std::vector<NodePtr> seq = inputs;
    for (const GcruParams& layer : layers) {
        seq = encode_sequence_all(seq, adj, layer, constant(Tensor::zeros({n, h})));
        finals.push_back(seq.back());
    }
    return finals;
}

Tensor flatten_per_node(const Tensor& x) {  // [T x N x C] -> [N x T*C]
    const std::size_t steps = x.shape[0], n = x.shape[1], c = x.shape[2];
    Tensor out({n, steps * c});
    for (std::size_t t = 0; t < steps; ++t)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t ch = 0; ch < c; ++ch)
                out.at(i, t * c + ch) = x.data[(t * n + i) * c + ch];
    return out;
}

std::vector<Tensor> slice_steps(const Tensor& x) {  // [T x N x C] -> T tensors [N x C]
    const std::size_t steps = x.shape[0], n = x.shape[1], c = x.shape[2];
    std::vector<Tensor> out;
    out.reserve(steps);
    for (std::size_t t = 0; t < steps; ++t) {
        Tensor step({n, c});
        std::copy(x.data.begin() + static_cast<std::ptrdiff_t>(t * n * c),
                  x.data.begin() + static_cast<std::ptrdiff_t>((t + 1) * n * c),
                  step.data.begin());
        out.push_back(std::move(step));
    }
    return out;
}

}  // namespace

ForwardOutput st_ssdl_forward(const ForwardInputs& in, const ModelParams& params,
                              const ModelConfig& cfg, const Normalizer& norm) {
    const std::size_t n = cfg.n_nodes, h = cfg.hidden;
    if (in.xc_norm.shape != Shape{cfg.input_len, n, cfg.channels}) {
        throw DimensionError("st_ssdl_forward: input window is " + shape_str(in.xc_norm.shape) +
                             ", config expects " +
                             shape_str({cfg.input_len, n, cfg.channels}));
    }
    if (cfg.uses_anchor_stream()) {
        require_same_shape(in.xc_norm, in.xa_norm, "st_ssdl_forward");
    }
    if (in.tod_indices.size() < cfg.input_len + cfg.horizon) {
        throw ContractError("st_ssdl_forward: need time-of-day indices for input and horizon");
    }

    ForwardOutput out;
    const Adjacency enc_graph = node_embedding_graph(params.graph_emb);

    const std::vector<NodePtr> hc_finals =
        encode_stack(embed_inputs(in.xc_norm, in.tod_indices, params, cfg), enc_graph,
                     params.encoder, n, h);
    const NodePtr hc = hc_finals.back();

    std::vector<NodePtr> ha_finals;
    NodePtr ha;
    if (cfg.uses_anchor_stream()) {
        ha_finals = encode_stack(embed_inputs(in.xa_norm, in.tod_indices, params, cfg), enc_graph,
                                 params.encoder, n, h);
        ha = ha_finals.back();
    }

    NodePtr l_con = constant(Tensor::scalar(0.0));
    NodePtr l_dev = constant(Tensor::scalar(0.0));
    Adjacency dec_graph = enc_graph;
    std::vector<NodePtr> h_init = hc_finals;

    if (cfg.uses_prototypes()) {
        out.qc = project_query(hc, params.bank.query_proj_c);
        out.qa = project_query(ha, params.bank.query_proj_a);
        out.att_c = prototype_attention(out.qc, params.bank);
        out.att_a = prototype_attention(out.qa, params.bank);

        NodePtr pos_c = gather_prototypes(out.att_c.pos_idx, params.bank);
        NodePtr neg_c = gather_prototypes(out.att_c.neg_idx, params.bank);
        NodePtr pos_a = gather_prototypes(out.att_a.pos_idx, params.bank);

        l_con = contrastive_loss(out.qc, pos_c, neg_c, cfg.margin, !cfg.disable_stopgrad);
        auto [dev, diag] = deviation_loss(out.qc, out.qa, pos_c, pos_a, !cfg.disable_stopgrad);
        l_dev = dev;
        out.deviation = std::move(diag);

        NodePtr vc = aggregate_value(out.att_c.alpha, params.bank);
        NodePtr va = aggregate_value(out.att_a.alpha, params.bank);
        dec_graph = adaptive_graph(hc, vc, ha, va, params.adapt_w, params.adapt_b);
        h_init.clear();
        for (std::size_t l = 0; l < params.decoder.size(); ++l) {
            h_init.push_back(matmul(concat_features({hc_finals[l], vc}), params.dec_init[l]));
        }
    } else if (cfg.variant == Variant::naive) {
        l_dev = naive_deviation_loss(flatten_per_node(in.xc_orig), flatten_per_node(in.xa_orig),
                                     hc, ha);
        dec_graph = gram_graph(linear(concat_features({hc, ha}), params.adapt_w, params.adapt_b));
    }
    out.adaptive_adj = dec_graph.matrix->value;

    // Decoder step embeddings at future timesteps (known at prediction time).
    std::vector<NodePtr> dec_embeddings;
    dec_embeddings.reserve(cfg.horizon);
    for (std::size_t t = 0; t < cfg.horizon; ++t) {
        const std::size_t tod = in.tod_indices[cfg.input_len + t];
        if (tod >= cfg.steps_per_day) {
            throw ContractError("st_ssdl_forward: time-of-day index out of range");
        }
        NodePtr tod_emb = gather_rows(params.tod_table, std::vector<std::size_t>(n, tod));
        dec_embeddings.push_back(concat_features({params.node_emb, tod_emb}));
    }

    const std::vector<NodePtr> preds_norm = decode_sequence_stacked(
        h_init, dec_graph, params.decoder, params.out_proj, cfg.horizon, dec_embeddings);

    // Forecasting error is taken on original-scale values.
    out.prediction_steps.reserve(cfg.horizon);
    for (const NodePtr& p : preds_norm) {
        out.prediction_steps.push_back(shift(scale(p, norm.std), norm.mean));
    }

    out.l_mae_node = mae_loss(out.prediction_steps, slice_steps(in.target), in.null_value);
    out.l_con_node = l_con;
    out.l_dev_node = l_dev;
    out.total = total_loss(out.l_mae_node, l_con, l_dev, cfg.effective_lambda_con(),
                           cfg.effective_lambda_dev());

    out.prediction = Tensor({cfg.horizon, n, cfg.channels});
    for (std::size_t t = 0; t < cfg.horizon; ++t) {
        std::copy(out.prediction_steps[t]->value.data.begin(),
                  out.prediction_steps[t]->value.data.end(),
                  out.prediction.data.begin() + static_cast<std::ptrdiff_t>(t * n * cfg.channels));
    }

    out.losses.l_mae = out.l_mae_node->value[0];
    out.losses.l_con = l_con->value[0];
    out.losses.l_dev = l_dev->value[0];
    out.losses.lambda_con = cfg.effective_lambda_con();
    out.losses.lambda_dev = cfg.effective_lambda_dev();
    out.losses.total = out.total->value[0];
    return out;
}

ForwardInputs Model::prepare(const Window& w) const {
    ForwardInputs in;
    in.xc_norm = w.input;
    in.target = w.target;
    in.tod_indices = w.tod_indices;
    in.null_value = null_value;
    if (cfg.uses_anchor_stream()) {
        in.xa_orig = retrieve_anchor(anchors, w.window_start, cfg.input_len);
        in.xa_norm = in.xa_orig;
        for (double& v : in.xa_norm.data) v = norm.apply(v);
    }
    if (cfg.variant == Variant::naive) {
        in.xc_orig = w.input;
        for (double& v : in.xc_orig.data) v = norm.invert(v);
    }
    return in;
}

ForwardOutput Model::run(const Window& w) const { return st_ssdl_forward(prepare(w), params, cfg, norm); }

std::vector<PrototypePattern> prototype_physical_patterns(const Model& model,
                                                          const WindowSet& windows) {
    if (!model.cfg.uses_prototypes()) {
        throw ContractError("prototype_physical_patterns: variant has no prototype bank");
    }
    if (windows.size() == 0) throw ContractError("prototype_physical_patterns: no windows");
    if (model.cfg.channels != 1) {
        throw ContractError("prototype_physical_patterns: defined for single-channel series");
    }

    const std::size_t m = model.cfg.prototype_count;
    const std::size_t steps = windows.input_len;
    const std::size_t n = model.cfg.n_nodes;
    std::vector<std::vector<double>> sum(m, std::vector<double>(steps, 0.0));
    std::vector<std::vector<double>> sum_sq(m, std::vector<double>(steps, 0.0));
    std::vector<std::size_t> counts(m, 0);

    for (const Window& w : windows.windows) {
        ForwardOutput out = model.run(w);
        for (std::size_t node = 0; node < n; ++node) {
            const std::size_t k = out.att_c.pos_idx[node];
            ++counts[k];
            for (std::size_t t = 0; t < steps; ++t) {
                const double v = model.norm.invert(w.input.data[(t * n + node)]);
                sum[k][t] += v;
                sum_sq[k][t] += v * v;
            }
        }
    }

    std::vector<PrototypePattern> patterns(m);
    for (std::size_t k = 0; k < m; ++k) {
        patterns[k].count = counts[k];
        if (counts[k] == 0) continue;
        patterns[k].mean.resize(steps);
        patterns[k].stddev.resize(steps);
        const double c = static_cast<double>(counts[k]);
        for (std::size_t t = 0; t < steps; ++t) {
            const double mu = sum[k][t] / c;
            patterns[k].mean[t] = mu;
            patterns[k].stddev[t] = std::sqrt(std::max(sum_sq[k][t] / c - mu * mu, 0.0));
        }
    }
    return patterns;
}

namespace {

// Power iteration on the d x d scatter matrix; start vector fixed for
// reproducibility.
std::vector<double> top_eigenvector(std::vector<double>& cov, std::size_t d, double* eigenvalue) {
    std::vector<double> v(d, 1.0 / std::sqrt(static_cast<double>(d)));
    std::vector<double> next(d);
    for (int iter = 0; iter < 200; ++iter) {
        for (std::size_t i = 0; i < d; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < d; ++j) s += cov[i * d + j] * v[j];
            next[i] = s;
        }
        double norm_sq = 0.0;
        for (double x : next) norm_sq += x * x;
        const double nrm = std::sqrt(norm_sq);
        if (nrm < 1e-300) break;  // degenerate direction
        double delta = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            next[i] /= nrm;
            delta = std::max(delta, std::abs(next[i] - v[i]));
        }
        v = next;
        if (delta < 1e-9) break;
    }
    double lambda = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j) s += cov[i * d + j] * v[j];
        lambda += v[i] * s;
    }
    // Canonical sign: largest-magnitude component positive.
    std::size_t arg = 0;
    for (std::size_t i = 1; i < d; ++i)
        if (std::abs(v[i]) > std::abs(v[arg])) arg = i;
    if (v[arg] < 0.0)
        for (double& x : v) x = -x;
    *eigenvalue = lambda;
    return v;
}

}  // namespace

std::vector<PcaPoint> pca_project_prototypes(const Tensor& prototypes, const Tensor& queries,
                                             const std::vector<std::size_t>& assigned) {
    require_rank(prototypes, 2, "pca_project_prototypes");
    require_rank(queries, 2, "pca_project_prototypes");
    if (queries.rows() < 2) throw ContractError("pca_project_prototypes: need at least 2 queries");
    if (queries.cols() != prototypes.cols()) {
        throw DimensionError("pca_project_prototypes: query width " + shape_str(queries.shape) +
                             " does not match prototypes " + shape_str(prototypes.shape));
    }
    if (assigned.size() != queries.rows()) {
        throw ContractError("pca_project_prototypes: one assignment per query required");
    }

    const std::size_t m = prototypes.rows(), q = queries.rows(), d = prototypes.cols();
    const std::size_t rows = m + q;
    std::vector<double> stacked(rows * d);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < d; ++j) stacked[i * d + j] = prototypes.at(i, j);
    for (std::size_t i = 0; i < q; ++i)
        for (std::size_t j = 0; j < d; ++j) stacked[(m + i) * d + j] = queries.at(i, j);

    for (std::size_t j = 0; j < d; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < rows; ++i) mean += stacked[i * d + j];
        mean /= static_cast<double>(rows);
        for (std::size_t i = 0; i < rows; ++i) stacked[i * d + j] -= mean;
    }

    std::vector<double> cov(d * d, 0.0);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t a = 0; a < d; ++a)
            for (std::size_t b = 0; b < d; ++b)
                cov[a * d + b] += stacked[i * d + a] * stacked[i * d + b];

    double lambda1 = 0.0, lambda2 = 0.0;
    const std::vector<double> v1 = top_eigenvector(cov, d, &lambda1);
    for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = 0; b < d; ++b) cov[a * d + b] -= lambda1 * v1[a] * v1[b];
    std::vector<double> v2 = top_eigenvector(cov, d, &lambda2);
    const bool rank_deficient = lambda2 <= 1e-12 * std::max(lambda1, 1.0);

    std::vector<PcaPoint> points(rows);
    for (std::size_t i = 0; i < rows; ++i) {
        double x = 0.0, y = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            x += stacked[i * d + j] * v1[j];
            y += stacked[i * d + j] * v2[j];
        }
        points[i].x = x;
        points[i].y = rank_deficient ? 0.0 : y;
        points[i].is_prototype = i < m;
        points[i].label = i < m ? i : assigned[i - m];
    }
    return points;
}

}  // namespace stssdl
