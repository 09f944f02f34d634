#include "stssdl/trainer.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "stssdl/checkpoint.hpp"
#include "stssdl/rng.hpp"

namespace stssdl {

DatasetBundle prepare_dataset(const RunConfig& cfg) {
    if (cfg.data.empty()) throw ConfigError("config: 'data' path is required");
    return prepare_dataset(load_dataset(cfg.data + ".csv", cfg.data + ".meta.json"), cfg);
}

DatasetBundle prepare_dataset(SeriesTensor series, const RunConfig& cfg) {
    DatasetBundle bundle;
    bundle.full = std::move(series);
    auto splits = split_dataset(bundle.full, cfg.split_train, cfg.split_val, cfg.split_test);
    bundle.train = std::move(splits[0]);
    bundle.val = std::move(splits[1]);
    bundle.test = std::move(splits[2]);
    bundle.norm = Normalizer::fit(bundle.train);
    bundle.anchors = build_anchor_table(bundle.train, bundle.full.meta);
    const std::size_t t = cfg.model.input_len, horizon = cfg.model.horizon;
    bundle.train_windows = make_windows(bundle.train, t, horizon, bundle.norm);
    bundle.val_windows = make_windows(bundle.val, t, horizon, bundle.norm);
    bundle.test_windows = make_windows(bundle.test, t, horizon, bundle.norm);
    return bundle;
}

Model make_model(const RunConfig& cfg, const DatasetBundle& data) {
    ModelConfig mc = cfg.model;
    mc.n_nodes = data.full.nodes();
    mc.channels = data.full.channels();
    mc.steps_per_day = data.full.meta.steps_per_day;
    Model model(mc, cfg.seed);
    model.norm = data.norm;
    model.anchors = data.anchors;
    model.null_value = data.full.meta.null_value;
    return model;
}

TrainResult train_model(Model& model, const DatasetBundle& data, const RunConfig& cfg) {
    if (cfg.batch_size == 0 || cfg.epochs == 0) {
        throw ConfigError("config: batch_size and epochs must be positive");
    }

    auto named = model.params.all();
    std::vector<NodePtr> param_nodes;
    param_nodes.reserve(named.size());
    for (auto& [name, node] : named) param_nodes.push_back(node);
    Adam optimizer(param_nodes, AdamConfig{cfg.lr});

    Rng shuffle_rng(cfg.seed);
    std::vector<std::size_t> order(data.train_windows.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    TrainResult result;
    std::vector<Tensor> best_params;
    double best_val = 0.0;

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng.engine());

        double sum_mae = 0.0, sum_con = 0.0, sum_dev = 0.0, sum_total = 0.0;
        std::size_t batch_index = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_index) {
            const std::size_t count = std::min(cfg.batch_size, order.size() - start);
            NodePtr batch_sum;
            try {
                for (std::size_t b = 0; b < count; ++b) {
                    const Window& w = data.train_windows.windows[order[start + b]];
                    ForwardOutput out = model.run(w);
                    sum_mae += out.losses.l_mae;
                    sum_con += out.losses.l_con;
                    sum_dev += out.losses.l_dev;
                    sum_total += out.losses.total;
                    batch_sum = batch_sum ? add(batch_sum, out.total) : out.total;
                }
            } catch (const NumericError& e) {
                throw NumericError("epoch " + std::to_string(epoch) + " batch " +
                                   std::to_string(batch_index) + ": " + e.what());
            }
            NodePtr batch_loss = scale(batch_sum, 1.0 / static_cast<double>(count));
            backward(batch_loss);
            optimizer.step();
        }

        const double inv_n = 1.0 / static_cast<double>(order.size());
        EpochRecord rec;
        rec.epoch = epoch;
        rec.l_mae = sum_mae * inv_n;
        rec.l_con = sum_con * inv_n;
        rec.l_dev = sum_dev * inv_n;
        rec.total = sum_total * inv_n;
        rec.val_mae = evaluate(model, data.val_windows).average.mae;
        result.history.push_back(rec);

        if (result.best_epoch == 0 || rec.val_mae < best_val) {
            best_val = rec.val_mae;
            result.best_epoch = epoch;
            best_params.clear();
            for (const NodePtr& p : param_nodes) best_params.push_back(p->value);
        } else if (epoch - result.best_epoch >= cfg.patience) {
            break;
        }
    }

    for (std::size_t k = 0; k < param_nodes.size(); ++k) param_nodes[k]->value = best_params[k];
    result.best_val_mae = best_val;
    return result;
}

void write_history(const std::string& path, const std::vector<EpochRecord>& history) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write history file " + path);
    out << "epoch,l_mae,l_con,l_dev,total,val_mae\n";
    char buf[160];
    for (const EpochRecord& r : history) {
        std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.epoch, r.l_mae,
                      r.l_con, r.l_dev, r.total, r.val_mae);
        out << buf;
    }
}

void save_model(const std::string& dir, const Model& model, const RunConfig& cfg) {
    std::vector<std::pair<std::string, Tensor>> tensors;
    for (const auto& [name, node] : model.params.all()) tensors.emplace_back(name, node->value);
    save_tensors(dir, tensors);
    cfg.save(dir + "/config.txt");
}

Model load_model(const std::string& dir, const DatasetBundle& data, const RunConfig& cfg) {
    Model model = make_model(cfg, data);
    const auto tensors = load_tensors(dir);
    for (auto& [name, node] : model.params.all()) {
        auto it = tensors.find(name);
        if (it == tensors.end()) {
            throw ParseError("checkpoint is missing tensor '" + name + "'");
        }
        if (it->second.shape != node->value.shape) {
            throw DimensionError("checkpoint tensor '" + name + "' has shape " +
                                 shape_str(it->second.shape) + ", model expects " +
                                 shape_str(node->value.shape));
        }
        node->value = it->second;
    }
    return model;
}

}  // namespace stssdl
