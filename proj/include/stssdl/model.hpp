#pragma once

#include "stssdl/anchor.hpp"
#include "stssdl/data.hpp"
#include "stssdl/gcru.hpp"
#include "stssdl/losses.hpp"
#include "stssdl/prototype.hpp"

namespace stssdl {

// Ablation variants. no_con/no_dev/no_both only zero the loss weights;
// no_ssdl drops the anchor stream and prototype machinery entirely; naive
// keeps the dual streams but replaces the prototype losses with the
// cosine-difference objective.
enum class Variant { full, no_con, no_dev, no_both, no_ssdl, naive };

Variant parse_variant(const std::string& text);
const char* variant_name(Variant v);

struct ModelConfig {
    std::size_t n_nodes = 0;
    std::size_t channels = 1;
    std::size_t input_len = 12;   // T
    std::size_t horizon = 12;     // T'
    std::size_t hidden = 32;      // h
    std::size_t query_dim = 64;   // d
    std::size_t prototype_count = 20;
    int cheb_order = 2;
    std::size_t enc_layers = 1;
    std::size_t dec_layers = 1;
    std::size_t e_input = 8;
    std::size_t e_node = 8;
    std::size_t e_tod = 8;
    std::size_t e_graph = 8;
    std::size_t steps_per_day = 24;
    double margin = 1.0;
    double lambda_con = 0.1;
    double lambda_dev = 0.1;
    bool share_query_proj = false;
    bool disable_stopgrad = false;  // test-only diagnostic
    Variant variant = Variant::full;

    bool uses_prototypes() const {
        return variant != Variant::no_ssdl && variant != Variant::naive;
    }
    bool uses_anchor_stream() const { return variant != Variant::no_ssdl; }
    // effective loss weights after the lambda-only ablations
    double effective_lambda_con() const;
    double effective_lambda_dev() const;
    void validate() const;
};

// Every trainable tensor, registered in a fixed order for deterministic
// initialization, optimization and checkpointing.
struct ModelParams {
    std::vector<GcruParams> encoder;
    std::vector<GcruParams> decoder;
    NodePtr node_emb;    // [N x e_node]
    NodePtr tod_table;   // [steps_per_day x e_tod]
    NodePtr input_lift;  // [C x e_input]
    NodePtr graph_emb;   // [N x e_graph]
    PrototypeBank bank;                // absent for no_ssdl / naive
    NodePtr adapt_w;                   // Eq-8 projection, absent for no_ssdl
    NodePtr adapt_b;
    std::vector<NodePtr> dec_init;     // [(h+d) x h] per decoder layer, full family only
    NodePtr out_proj;    // [h x C]

    std::vector<std::pair<std::string, NodePtr>> all() const;
};

ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed);
std::size_t expected_param_count(const ModelConfig& cfg);

struct ForwardInputs {
    Tensor xc_norm;  // [T x N x C]
    Tensor xa_norm;  // same shape; ignored by no_ssdl
    Tensor xc_orig;  // original scale, naive ablation only
    Tensor xa_orig;
    Tensor target;   // [T' x N x C], original scale
    std::vector<std::size_t> tod_indices;  // length T + T'
    std::optional<double> null_value;      // masked out of the forecasting loss
};

struct ForwardOutput {
    std::vector<NodePtr> prediction_steps;  // [N x C] per step, original scale
    Tensor prediction;                      // [T' x N x C] copy of the above
    LossBreakdown losses;
    NodePtr total;  // graph root
    NodePtr l_mae_node;
    NodePtr l_con_node;
    NodePtr l_dev_node;
    NodePtr qc;
    NodePtr qa;
    AttentionResult att_c;
    AttentionResult att_a;
    DeviationDiagnostics deviation;
    Tensor adaptive_adj;
};

// Per-timestep enrichment: concat(X_t · input_lift, node_emb, tod_emb).
std::vector<NodePtr> embed_inputs(const Tensor& x_norm, const std::vector<std::size_t>& tods,
                                  const ModelParams& params, const ModelConfig& cfg);

// One full pass: encode both streams, prototype interaction, adaptive
// graph, autoregressive decoding, and the weighted objective.
ForwardOutput st_ssdl_forward(const ForwardInputs& in, const ModelParams& params,
                              const ModelConfig& cfg, const Normalizer& norm);

// Convenience bundle: parameters plus the fitted context needed to run
// windows end to end.
class Model {
public:
    ModelConfig cfg;
    ModelParams params;
    Normalizer norm;
    AnchorTable anchors;
    std::optional<double> null_value;

    Model(ModelConfig c, std::uint64_t seed) : cfg(c), params(init_params(cfg, seed)) {}

    ForwardInputs prepare(const Window& w) const;
    ForwardOutput run(const Window& w) const;
};

// Fig-6 style export: per prototype, the pointwise mean/stddev of all
// original-scale input sequences whose current-stream query selected it.
struct PrototypePattern {
    std::size_t count = 0;
    std::vector<double> mean;    // length T when count > 0
    std::vector<double> stddev;
};

std::vector<PrototypePattern> prototype_physical_patterns(const Model& model,
                                                          const WindowSet& windows);

struct PcaPoint {
    double x = 0.0;
    double y = 0.0;
    std::size_t label = 0;  // own index for prototypes, assigned positive for queries
    bool is_prototype = false;
};

// Centers the stacked prototype+query matrix and projects onto the top two
// principal directions found by power iteration with deflation (200
// iterations, tolerance 1e-9). Rank-deficient input yields zero y.
std::vector<PcaPoint> pca_project_prototypes(const Tensor& prototypes, const Tensor& queries,
                                             const std::vector<std::size_t>& assigned);

}  // namespace stssdl
