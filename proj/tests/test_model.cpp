#include <doctest.h>

#include <cmath>
#include <map>

#include "helpers.hpp"
#include "stssdl/gradcheck.hpp"
#include "stssdl/model.hpp"

using namespace stssdl;
using namespace stssdl::testing;

namespace {

ModelConfig tiny_config(Variant variant = Variant::full) {
    ModelConfig cfg;
    cfg.n_nodes = 4;
    cfg.input_len = 3;
    cfg.horizon = 2;
    cfg.hidden = 8;
    cfg.query_dim = 8;
    cfg.prototype_count = 3;
    cfg.cheb_order = 2;
    cfg.e_input = 8;
    cfg.e_node = 8;
    cfg.e_tod = 8;
    cfg.e_graph = 8;
    cfg.steps_per_day = 24;
    cfg.variant = variant;
    return cfg;
}

ForwardInputs random_inputs(const ModelConfig& cfg, std::uint64_t seed) {
    Rng rng(seed);
    ForwardInputs in;
    in.xc_norm = rng.normal_tensor({cfg.input_len, cfg.n_nodes, cfg.channels}, 1.0);
    in.xa_norm = rng.normal_tensor({cfg.input_len, cfg.n_nodes, cfg.channels}, 1.0);
    in.xc_orig = in.xc_norm;
    in.xa_orig = in.xa_norm;
    in.target = rng.normal_tensor({cfg.horizon, cfg.n_nodes, cfg.channels}, 1.0);
    for (std::size_t t = 0; t < cfg.input_len + cfg.horizon; ++t) {
        in.tod_indices.push_back((seed + t) % cfg.steps_per_day);
    }
    return in;
}

Normalizer identity_norm() { return Normalizer{0.0, 1.0}; }

}  // namespace

TEST_CASE("embedding with identity lift and zero tables broadcasts the input") {
    ModelConfig cfg = tiny_config();
    cfg.e_input = 1;
    ModelParams params = init_params(cfg, 1);
    params.input_lift->value = Tensor({1, 1}, {1.0});
    params.node_emb->value = Tensor::zeros({cfg.n_nodes, cfg.e_node});
    params.tod_table->value = Tensor::zeros({cfg.steps_per_day, cfg.e_tod});

    Rng rng(3);
    const Tensor x = rng.normal_tensor({cfg.input_len, cfg.n_nodes, 1}, 1.0);
    auto steps = embed_inputs(x, {0, 1, 2}, params, cfg);
    REQUIRE(steps.size() == cfg.input_len);
    for (std::size_t t = 0; t < cfg.input_len; ++t) {
        CHECK(steps[t]->value.cols() == 1 + cfg.e_node + cfg.e_tod);
        for (std::size_t n = 0; n < cfg.n_nodes; ++n) {
            CHECK(steps[t]->value.at(n, 0) == x.data[t * cfg.n_nodes + n]);
            for (std::size_t j = 1; j < steps[t]->value.cols(); ++j) {
                CHECK(steps[t]->value.at(n, j) == 0.0);
            }
        }
    }
}

TEST_CASE("embedding equals the direct concat oracle") {
    ModelConfig cfg = tiny_config();
    ModelParams params = init_params(cfg, 5);
    Rng rng(6);
    const Tensor x = rng.normal_tensor({cfg.input_len, cfg.n_nodes, 1}, 1.0);
    const std::vector<std::size_t> tods = {7, 0, 23};
    auto steps = embed_inputs(x, tods, params, cfg);

    for (std::size_t t = 0; t < cfg.input_len; ++t) {
        for (std::size_t n = 0; n < cfg.n_nodes; ++n) {
            std::vector<double> expect;
            for (std::size_t j = 0; j < cfg.e_input; ++j) {
                expect.push_back(x.data[t * cfg.n_nodes + n] * params.input_lift->value.at(0, j));
            }
            for (std::size_t j = 0; j < cfg.e_node; ++j) {
                expect.push_back(params.node_emb->value.at(n, j));
            }
            for (std::size_t j = 0; j < cfg.e_tod; ++j) {
                expect.push_back(params.tod_table->value.at(tods[t], j));
            }
            for (std::size_t j = 0; j < expect.size(); ++j) {
                CHECK(steps[t]->value.at(n, j) == doctest::Approx(expect[j]).epsilon(1e-14));
            }
        }
    }
}

TEST_CASE("embedding rejects out-of-range time indices") {
    ModelConfig cfg = tiny_config();
    ModelParams params = init_params(cfg, 1);
    Tensor x({1, cfg.n_nodes, 1});
    CHECK_THROWS_AS(embed_inputs(x, {cfg.steps_per_day}, params, cfg), ContractError);
}

TEST_CASE("parameter count matches the closed form across variants") {
    for (Variant v : {Variant::full, Variant::no_con, Variant::no_ssdl, Variant::naive}) {
        ModelConfig cfg = tiny_config(v);
        ModelParams params = init_params(cfg, 9);  // ctor asserts the closed form
        std::size_t total = 0;
        for (const auto& [name, node] : params.all()) total += node->value.size();
        CHECK(total == expected_param_count(cfg));
    }
    ModelConfig shared = tiny_config();
    shared.share_query_proj = true;
    ModelConfig separate = tiny_config();
    CHECK(expected_param_count(separate) - expected_param_count(shared) ==
          separate.hidden * separate.query_dim);

    ModelConfig stacked = tiny_config();
    stacked.enc_layers = 2;
    stacked.dec_layers = 2;
    init_params(stacked, 9);
}

TEST_CASE("tiny config stays within the gradcheck parameter budget") {
    CHECK(expected_param_count(tiny_config()) <= 5000);
}

TEST_CASE("forward validates window shape") {
    ModelConfig cfg = tiny_config();
    ModelParams params = init_params(cfg, 2);
    ForwardInputs in = random_inputs(cfg, 3);
    in.xc_norm = Tensor({cfg.input_len, cfg.n_nodes + 1, 1});
    CHECK_THROWS_AS(st_ssdl_forward(in, params, cfg, identity_norm()), DimensionError);
}

TEST_CASE("loss breakdown satisfies the weighted-total identity") {
    for (Variant v : {Variant::full, Variant::no_con, Variant::no_dev, Variant::no_both,
                      Variant::no_ssdl, Variant::naive}) {
        ModelConfig cfg = tiny_config(v);
        ModelParams params = init_params(cfg, 11);
        ForwardOutput out = st_ssdl_forward(random_inputs(cfg, 4), params, cfg, identity_norm());
        const LossBreakdown& l = out.losses;
        CHECK(std::abs(l.total - (l.l_mae + l.lambda_con * l.l_con + l.lambda_dev * l.l_dev)) <
              1e-12);
        CHECK(l.l_con >= 0.0);
        CHECK(l.l_dev >= 0.0);
    }
}

TEST_CASE("zero loss weights reduce the total to pure forecasting error") {
    ModelConfig cfg = tiny_config(Variant::no_both);
    ModelParams params = init_params(cfg, 12);
    ForwardOutput out = st_ssdl_forward(random_inputs(cfg, 5), params, cfg, identity_norm());
    CHECK(out.losses.total == out.losses.l_mae);
    CHECK(out.losses.lambda_con == 0.0);
    CHECK(out.losses.lambda_dev == 0.0);
    // The auxiliary losses are still reported for the history file.
    CHECK(out.losses.l_con >= 0.0);
}

TEST_CASE("the no-ssdl variant runs without anchors or prototypes") {
    ModelConfig cfg = tiny_config(Variant::no_ssdl);
    ModelParams params = init_params(cfg, 13);
    CHECK_FALSE(params.bank.prototypes);
    CHECK_FALSE(params.adapt_w);
    CHECK(params.dec_init.empty());

    ForwardInputs in = random_inputs(cfg, 6);
    in.xa_norm = Tensor();  // anchor stream must be ignored entirely
    ForwardOutput out = st_ssdl_forward(in, params, cfg, identity_norm());
    CHECK(out.losses.l_con == 0.0);
    CHECK(out.losses.l_dev == 0.0);
    CHECK(out.losses.total == out.losses.l_mae);
    // Decoder graph falls back to the embedding graph: row-stochastic.
    for (std::size_t i = 0; i < cfg.n_nodes; ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < cfg.n_nodes; ++j) sum += out.adaptive_adj.at(i, j);
        CHECK(std::abs(sum - 1.0) < 1e-9);
    }
}

TEST_CASE("the naive variant reports the cosine objective") {
    ModelConfig cfg = tiny_config(Variant::naive);
    ModelParams params = init_params(cfg, 14);
    CHECK_FALSE(params.bank.prototypes);
    REQUIRE(params.adapt_w);
    CHECK(params.adapt_w->value.rows() == 2 * cfg.hidden);

    ForwardOutput out = st_ssdl_forward(random_inputs(cfg, 7), params, cfg, identity_norm());
    CHECK(out.losses.l_con == 0.0);
    CHECK(out.losses.l_dev >= 0.0);
    CHECK(out.losses.lambda_dev == cfg.lambda_dev);
}

TEST_CASE("identical streams with a shared projection have zero deviation") {
    ModelConfig cfg = tiny_config();
    cfg.share_query_proj = true;
    ModelParams params = init_params(cfg, 15);
    ForwardInputs in = random_inputs(cfg, 8);
    in.xa_norm = in.xc_norm;
    ForwardOutput out = st_ssdl_forward(in, params, cfg, identity_norm());
    for (std::size_t n = 0; n < cfg.n_nodes; ++n) {
        CHECK(out.deviation.d_q[n] == 0.0);
        CHECK(out.att_c.pos_idx[n] == out.att_a.pos_idx[n]);
    }
    CHECK(out.losses.l_dev == 0.0);
}

TEST_CASE("stop-gradient exactness inside the assembled model") {
    ModelConfig cfg = tiny_config();
    ModelParams params = init_params(cfg, 16);
    ForwardInputs in = random_inputs(cfg, 9);

    ForwardOutput out = st_ssdl_forward(in, params, cfg, identity_norm());
    backward(out.l_con_node);
    for (double g : out.qc->grad.data) CHECK(g == 0.0);

    out = st_ssdl_forward(in, params, cfg, identity_norm());
    backward(out.l_dev_node);
    for (double g : out.qc->grad.data) CHECK(g == 0.0);
    for (double g : out.qa->grad.data) CHECK(g == 0.0);
    std::map<std::size_t, bool> selected;
    for (std::size_t n = 0; n < cfg.n_nodes; ++n) {
        selected[out.att_c.pos_idx[n]] = true;
        selected[out.att_a.pos_idx[n]] = true;
    }
    for (std::size_t r = 0; r < cfg.prototype_count; ++r) {
        double mass = 0.0;
        for (std::size_t j = 0; j < cfg.query_dim; ++j) {
            mass += std::abs(params.bank.prototypes->grad.at(r, j));
        }
        if (!selected.count(r)) CHECK(mass == 0.0);
    }
}

TEST_CASE("attention rows and adaptive rows are stochastic in the forward pass") {
    ModelConfig cfg = tiny_config();
    ModelParams params = init_params(cfg, 17);
    ForwardOutput out = st_ssdl_forward(random_inputs(cfg, 10), params, cfg, identity_norm());
    for (std::size_t i = 0; i < cfg.n_nodes; ++i) {
        double att_sum = 0.0, adj_sum = 0.0;
        for (std::size_t j = 0; j < cfg.prototype_count; ++j) {
            att_sum += out.att_c.alpha->value.at(i, j);
        }
        for (std::size_t j = 0; j < cfg.n_nodes; ++j) adj_sum += out.adaptive_adj.at(i, j);
        CHECK(std::abs(att_sum - 1.0) < 1e-9);
        CHECK(std::abs(adj_sum - 1.0) < 1e-9);
    }
}

TEST_CASE("fixed seed and config give identical loss breakdowns") {
    ModelConfig cfg = tiny_config();
    ForwardInputs in = random_inputs(cfg, 11);
    ModelParams a = init_params(cfg, 77);
    ModelParams b = init_params(cfg, 77);
    ForwardOutput oa = st_ssdl_forward(in, a, cfg, identity_norm());
    ForwardOutput ob = st_ssdl_forward(in, b, cfg, identity_norm());
    CHECK(oa.losses.total == ob.losses.total);
    CHECK(oa.losses.l_mae == ob.losses.l_mae);
    CHECK(oa.losses.l_con == ob.losses.l_con);
    CHECK(oa.losses.l_dev == ob.losses.l_dev);
}

TEST_CASE("full model gradients match finite differences") {
    ModelConfig cfg = tiny_config();
    GradCheckReport report = grad_check(cfg, 2024, 1e-4, 60);
    CAPTURE(report.worst_coordinate);
    CAPTURE(report.max_rel_err);
    CHECK(report.pass);
}

TEST_CASE("multi-layer stack gradients match finite differences") {
    ModelConfig cfg = tiny_config();
    cfg.n_nodes = 2;
    cfg.enc_layers = 2;
    cfg.dec_layers = 2;
    cfg.hidden = 4;
    cfg.query_dim = 4;
    cfg.e_input = 2;
    cfg.e_node = 2;
    cfg.e_tod = 2;
    cfg.e_graph = 2;
    GradCheckReport report = grad_check(cfg, 2025, 1e-4, 40);
    CAPTURE(report.worst_coordinate);
    CAPTURE(report.max_rel_err);
    CHECK(report.pass);
}

TEST_CASE("patterns: a single assignment echoes its sequence") {
    ModelConfig cfg = tiny_config();
    cfg.n_nodes = 1;
    cfg.e_node = 2;
    cfg.e_graph = 2;
    Model model(cfg, 21);
    model.norm = identity_norm();
    // One-week anchor table of zeros, enough for retrieval.
    model.anchors.t_w = 7 * cfg.steps_per_day;
    model.anchors.week_phase_of_origin = 0;
    model.anchors.xbar = Tensor({model.anchors.t_w, 1, 1});

    WindowSet set;
    set.input_len = cfg.input_len;
    set.horizon = cfg.horizon;
    Window w;
    Rng rng(22);
    w.input = rng.normal_tensor({cfg.input_len, 1, 1}, 1.0);
    w.target = rng.normal_tensor({cfg.horizon, 1, 1}, 1.0);
    w.window_start = 0;
    for (std::size_t t = 0; t < cfg.input_len + cfg.horizon; ++t) w.tod_indices.push_back(t);
    set.windows.push_back(w);

    auto patterns = prototype_physical_patterns(model, set);
    REQUIRE(patterns.size() == cfg.prototype_count);
    std::size_t assigned = 0, with_count = 0;
    for (std::size_t k = 0; k < patterns.size(); ++k) {
        if (patterns[k].count > 0) {
            ++with_count;
            assigned = k;
        } else {
            CHECK(patterns[k].mean.empty());
        }
    }
    REQUIRE(with_count == 1);
    CHECK(patterns[assigned].count == 1);
    for (std::size_t t = 0; t < cfg.input_len; ++t) {
        CHECK(patterns[assigned].mean[t] ==
              doctest::Approx(w.input.data[t]).epsilon(1e-12));
        CHECK(patterns[assigned].stddev[t] == 0.0);
    }
}

TEST_CASE("patterns equal a brute-force group-by mean") {
    ModelConfig cfg = tiny_config();
    Model model(cfg, 23);
    model.norm = identity_norm();
    model.anchors.t_w = 7 * cfg.steps_per_day;
    model.anchors.week_phase_of_origin = 0;
    model.anchors.xbar = Tensor({model.anchors.t_w, cfg.n_nodes, 1});

    WindowSet set;
    set.input_len = cfg.input_len;
    set.horizon = cfg.horizon;
    Rng rng(24);
    for (int i = 0; i < 6; ++i) {
        Window w;
        w.input = rng.normal_tensor({cfg.input_len, cfg.n_nodes, 1}, 1.0);
        w.target = rng.normal_tensor({cfg.horizon, cfg.n_nodes, 1}, 1.0);
        w.window_start = static_cast<std::size_t>(i);
        for (std::size_t t = 0; t < cfg.input_len + cfg.horizon; ++t) {
            w.tod_indices.push_back((i + t) % cfg.steps_per_day);
        }
        set.windows.push_back(w);
    }

    auto patterns = prototype_physical_patterns(model, set);

    // Independent group-by over fresh forward passes.
    std::vector<std::vector<std::vector<double>>> groups(cfg.prototype_count);
    for (const Window& w : set.windows) {
        ForwardOutput out = model.run(w);
        for (std::size_t n = 0; n < cfg.n_nodes; ++n) {
            std::vector<double> seq;
            for (std::size_t t = 0; t < cfg.input_len; ++t) {
                seq.push_back(w.input.data[t * cfg.n_nodes + n]);
            }
            groups[out.att_c.pos_idx[n]].push_back(seq);
        }
    }
    for (std::size_t k = 0; k < cfg.prototype_count; ++k) {
        CHECK(patterns[k].count == groups[k].size());
        if (groups[k].empty()) continue;
        for (std::size_t t = 0; t < cfg.input_len; ++t) {
            double mean = 0.0;
            for (const auto& seq : groups[k]) mean += seq[t];
            mean /= static_cast<double>(groups[k].size());
            CHECK(patterns[k].mean[t] == doctest::Approx(mean).epsilon(1e-10));
        }
    }
}

TEST_CASE("pca collapses collinear data onto the first axis") {
    // Points on a line in 3-D.
    Tensor protos({2, 3});
    Tensor queries({4, 3});
    const double dir[3] = {1.0, -2.0, 0.5};
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 3; ++j) protos.at(i, j) = static_cast<double>(i + 1) * dir[j];
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 3; ++j) queries.at(i, j) = static_cast<double>(i + 3) * dir[j];

    auto points = pca_project_prototypes(protos, queries, {0, 0, 1, 1});
    REQUIRE(points.size() == 6);
    for (const PcaPoint& p : points) CHECK(std::abs(p.y) < 1e-6);

    // Pairwise order along the first component is preserved (up to a fixed
    // orientation of the axis).
    const double sign = points[1].x > points[0].x ? 1.0 : -1.0;
    for (std::size_t i = 1; i < points.size(); ++i) {
        CHECK(sign * points[i].x > sign * points[i - 1].x);
    }
    CHECK(points[0].is_prototype);
    CHECK(points[2].label == 0);
    CHECK(points[5].label == 1);
}

TEST_CASE("pca top direction matches a dense eigensolver") {
    Rng rng(31);
    Tensor protos = rng.normal_tensor({2, 3}, 1.0);
    Tensor queries = rng.normal_tensor({3, 3}, 1.0);

    // Jacobi eigensolver on the 3x3 covariance of the centered stack.
    const std::size_t rows = 5, d = 3;
    std::vector<double> x(rows * d);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < d; ++j) x[i * d + j] = protos.at(i, j);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < d; ++j) x[(2 + i) * d + j] = queries.at(i, j);
    for (std::size_t j = 0; j < d; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < rows; ++i) mean += x[i * d + j];
        mean /= rows;
        for (std::size_t i = 0; i < rows; ++i) x[i * d + j] -= mean;
    }
    double a[3][3] = {};
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t p = 0; p < d; ++p)
            for (std::size_t q = 0; q < d; ++q) a[p][q] += x[i * d + p] * x[i * d + q];
    double v[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    for (int sweep = 0; sweep < 100; ++sweep) {
        for (int p = 0; p < 3; ++p) {
            for (int q = p + 1; q < 3; ++q) {
                if (std::abs(a[p][q]) < 1e-14) continue;
                const double theta = 0.5 * std::atan2(2.0 * a[p][q], a[q][q] - a[p][p]);
                const double c = std::cos(theta), s = std::sin(theta);
                for (int k = 0; k < 3; ++k) {
                    const double akp = a[k][p], akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for (int k = 0; k < 3; ++k) {
                    const double apk = a[p][k], aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                    const double vkp = v[k][p], vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    int top = 0;
    for (int i = 1; i < 3; ++i)
        if (a[i][i] > a[top][top]) top = i;

    // Recover the implementation's first direction from the projections.
    auto points = pca_project_prototypes(protos, queries, {0, 0, 0});
    double impl_dir[3] = {};
    // Least-squares direction: x_i coordinates regress the centered rows.
    double xx = 0.0;
    for (std::size_t i = 0; i < rows; ++i) xx += points[i].x * points[i].x;
    for (std::size_t j = 0; j < d; ++j) {
        double xy = 0.0;
        for (std::size_t i = 0; i < rows; ++i) xy += points[i].x * x[i * d + j];
        impl_dir[j] = xy / xx;
    }
    double dot = 0.0, nrm = 0.0;
    for (int j = 0; j < 3; ++j) {
        dot += impl_dir[j] * v[j][top];
        nrm += impl_dir[j] * impl_dir[j];
    }
    CHECK(std::abs(dot) / std::sqrt(nrm) >= 0.999);
}

TEST_CASE("pca requires at least two queries") {
    Tensor protos({2, 2});
    Tensor queries({1, 2});
    CHECK_THROWS_AS(pca_project_prototypes(protos, queries, {0}), ContractError);
}
