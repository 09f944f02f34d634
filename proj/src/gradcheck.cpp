#include "stssdl/gradcheck.hpp"

#include <cmath>

#include "stssdl/rng.hpp"

namespace stssdl {

namespace {

struct Probe {
    double loss = 0.0;
    std::vector<std::size_t> selection;  // concatenated pos/neg indices of both streams
};

Probe run_probe(const ForwardInputs& in, const ModelParams& params, const ModelConfig& cfg,
                const Normalizer& norm) {
    ForwardOutput out = st_ssdl_forward(in, params, cfg, norm);
    Probe p;
    p.loss = out.total->value[0];
    if (cfg.uses_prototypes()) {
        for (const auto* att : {&out.att_c, &out.att_a}) {
            p.selection.insert(p.selection.end(), att->pos_idx.begin(), att->pos_idx.end());
            p.selection.insert(p.selection.end(), att->neg_idx.begin(), att->neg_idx.end());
        }
    }
    return p;
}

}  // namespace

GradCheckReport grad_check(const ModelConfig& cfg, std::uint64_t seed, double tolerance,
                           std::size_t probe_count) {
    cfg.validate();
    const std::size_t total_params = expected_param_count(cfg);
    if (total_params > 5000) {
        throw ContractError("grad_check: config has " + std::to_string(total_params) +
                            " parameters, limit is 5000");
    }

    Rng rng(seed);
    ModelParams params = init_params(cfg, seed + 1);
    Normalizer norm;  // identity scaling keeps the probe readable
    norm.mean = 0.0;
    norm.std = 1.0;

    ForwardInputs in;
    in.xc_norm = rng.normal_tensor({cfg.input_len, cfg.n_nodes, cfg.channels}, 1.0);
    in.xa_norm = rng.normal_tensor({cfg.input_len, cfg.n_nodes, cfg.channels}, 1.0);
    in.xc_orig = in.xc_norm;
    in.xa_orig = in.xa_norm;
    in.target = rng.normal_tensor({cfg.horizon, cfg.n_nodes, cfg.channels}, 1.0);
    for (std::size_t t = 0; t < cfg.input_len + cfg.horizon; ++t) {
        in.tod_indices.push_back(t % cfg.steps_per_day);
    }

    auto named = params.all();
    for (auto& [name, node] : named) node->zero_grad();
    std::vector<Tensor> frozen_stops;
    NodePtr base_total;
    {
        StopTape tape(StopTapeMode::record, &frozen_stops);
        base_total = st_ssdl_forward(in, params, cfg, norm).total;
    }
    backward(base_total);
    std::vector<Tensor> analytic;
    analytic.reserve(named.size());
    for (const auto& [name, node] : named) analytic.push_back(node->grad);

    constexpr double kStep = 1e-6;
    GradCheckReport report;
    report.probes = probe_count;

    std::size_t done = 0;
    std::size_t attempts = 0;
    const std::size_t max_attempts = probe_count * 20;
    while (done < probe_count && attempts < max_attempts) {
        ++attempts;
        const std::size_t k = rng.integer(named.size());
        Node& node = *named[k].second;
        const std::size_t i = rng.integer(node.value.size());

        const double saved = node.value[i];
        node.value[i] = saved + kStep;
        Probe plus, minus;
        {
            StopTape tape(StopTapeMode::playback, &frozen_stops);
            plus = run_probe(in, params, cfg, norm);
        }
        node.value[i] = saved - kStep;
        {
            StopTape tape(StopTapeMode::playback, &frozen_stops);
            minus = run_probe(in, params, cfg, norm);
        }
        node.value[i] = saved;

        if (plus.selection != minus.selection) {
            ++report.redraws;  // argmax not unique near this point
            continue;
        }

        const double fd = (plus.loss - minus.loss) / (2.0 * kStep);
        const double an = analytic[k][i];
        const double rel = std::abs(fd - an) / std::max(1.0, std::abs(fd));
        if (rel > report.max_rel_err) {
            report.max_rel_err = rel;
            report.worst_coordinate = named[k].first + "[" + std::to_string(i) + "]";
        }
        ++done;
    }

    report.pass = done == probe_count && report.max_rel_err < tolerance;
    return report;
}

}  // namespace stssdl
