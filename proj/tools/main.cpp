#include <CLI11.hpp>

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include "stssdl/gradcheck.hpp"
#include "stssdl/trainer.hpp"

namespace fs = std::filesystem;
using namespace stssdl;

namespace {

std::string fmt17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// Accepts either a path prefix (<prefix>.csv exists) or a directory holding
// exactly one series file.
std::string resolve_data_prefix(const std::string& arg) {
    if (fs::exists(arg + ".csv")) return arg;
    if (fs::is_directory(arg)) {
        std::vector<std::string> stems;
        for (const auto& entry : fs::directory_iterator(arg)) {
            if (entry.path().extension() == ".csv") {
                stems.push_back((entry.path().parent_path() / entry.path().stem()).string());
            }
        }
        std::sort(stems.begin(), stems.end());
        if (stems.size() == 1) return stems[0];
        throw ConfigError("expected exactly one .csv in " + arg + ", found " +
                          std::to_string(stems.size()));
    }
    throw ConfigError("no dataset at '" + arg + "' (need <prefix>.csv or a directory)");
}

std::ofstream open_artifact(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write " + path);
    return out;
}

void write_metrics_file(const std::string& path, const MetricsReport& model_report,
                        const MetricsReport& hi_report) {
    std::ofstream out = open_artifact(path);
    out << "method,horizon,mae,rmse,mape\n";
    auto emit = [&](const char* name, const MetricsReport& r) {
        for (std::size_t k = 0; k < r.per_horizon.size(); ++k) {
            out << name << ',' << k + 1 << ',' << fmt17(r.per_horizon[k].mae) << ','
                << fmt17(r.per_horizon[k].rmse) << ',' << fmt17(r.per_horizon[k].mape) << "\n";
        }
        out << name << ",avg," << fmt17(r.average.mae) << ',' << fmt17(r.average.rmse) << ','
            << fmt17(r.average.mape) << "\n";
    };
    emit("model", model_report);
    emit("hi", hi_report);
}

void print_metrics_row(const char* name, const MetricsReport& r) {
    std::printf("%-6s mae %.4f  rmse %.4f  mape %.2f%%  (windows %zu)\n", name, r.average.mae,
                r.average.rmse, r.average.mape, r.window_count);
}

const WindowSet& pick_split(const DatasetBundle& data, const std::string& split) {
    if (split == "train") return data.train_windows;
    if (split == "val") return data.val_windows;
    if (split == "test") return data.test_windows;
    throw ConfigError("unknown split '" + split + "'");
}

struct LoadedCheckpoint {
    RunConfig cfg;
    DatasetBundle data;
    Model model;
};

LoadedCheckpoint load_checkpoint(const std::string& ckpt_dir, const std::string& data_arg) {
    RunConfig cfg = RunConfig::parse_file(ckpt_dir + "/config.txt");
    if (!data_arg.empty()) cfg.data = resolve_data_prefix(data_arg);
    DatasetBundle data = prepare_dataset(cfg);
    Model model = load_model(ckpt_dir, data, cfg);
    return LoadedCheckpoint{std::move(cfg), std::move(data), std::move(model)};
}

int cmd_gen_data(const std::string& out_dir, std::size_t nodes, std::size_t weeks,
                 const std::string& deviation, std::uint64_t seed, std::size_t steps_per_day,
                 const std::string& name) {
    SynthConfig synth;
    synth.nodes = nodes;
    synth.weeks = weeks;
    synth.steps_per_day = steps_per_day;
    synth.level = parse_deviation_level(deviation);
    synth.seed = seed;
    SeriesTensor series = synth_generate(synth);
    if (!name.empty()) series.meta.name = name;
    fs::create_directories(out_dir);
    const std::string prefix = out_dir + "/" + series.meta.name;
    save_dataset(series, prefix + ".csv", prefix + ".meta.json");
    std::fprintf(stderr, "wrote %s.csv (%zu steps, %zu nodes)\n", prefix.c_str(), series.length(),
                 series.nodes());
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& out_dir) {
    RunConfig cfg = RunConfig::parse_file(config_path);
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (cfg.out_dir.empty()) throw ConfigError("no output directory (config out_dir or --out)");
    cfg.data = resolve_data_prefix(cfg.data);
    fs::create_directories(cfg.out_dir);

    DatasetBundle data = prepare_dataset(cfg);
    Model model = make_model(cfg, data);
    std::size_t param_count = 0;
    for (const auto& [n, p] : model.params.all()) param_count += p->value.size();
    std::fprintf(stderr, "variant %s, %zu parameters, %zu train windows\n",
                 variant_name(cfg.model.variant), param_count, data.train_windows.size());

    TrainResult result = train_model(model, data, cfg);
    write_history(cfg.out_dir + "/history.csv", result.history);
    save_model(cfg.out_dir, model, cfg);
    std::fprintf(stderr, "best val mae %.6f at epoch %zu (%zu epochs run)\n", result.best_val_mae,
                 result.best_epoch, result.history.size());
    return 0;
}

int cmd_eval(const std::string& ckpt_dir, const std::string& data_arg, const std::string& split,
             std::string out_path) {
    LoadedCheckpoint ck = load_checkpoint(ckpt_dir, data_arg);
    const WindowSet& windows = pick_split(ck.data, split);
    MetricsReport model_report = evaluate(ck.model, windows);
    MetricsReport hi_report = evaluate_hi(windows, ck.data.norm, ck.data.full.meta.null_value);
    if (out_path.empty()) out_path = ckpt_dir + "/metrics_" + split + ".csv";
    write_metrics_file(out_path, model_report, hi_report);
    print_metrics_row("model", model_report);
    print_metrics_row("hi", hi_report);
    return 0;
}

int cmd_forecast(const std::string& ckpt_dir, const std::string& data_arg,
                 std::size_t window_start, std::string out_path) {
    LoadedCheckpoint ck = load_checkpoint(ckpt_dir, data_arg);
    const std::size_t t_in = ck.cfg.model.input_len, horizon = ck.cfg.model.horizon;
    const SeriesTensor& full = ck.data.full;
    if (window_start + t_in + horizon > full.length()) {
        throw ConfigError("window at " + std::to_string(window_start) +
                          " runs past the series end");
    }

    Window w;
    w.window_start = window_start;
    w.input = Tensor({t_in, full.nodes(), full.channels()});
    w.target = Tensor({horizon, full.nodes(), full.channels()});
    const auto& nv = full.meta.null_value;
    for (std::size_t t = 0; t < t_in; ++t) {
        for (std::size_t n = 0; n < full.nodes(); ++n) {
            const double v = full.at(window_start + t, n, 0);
            w.input.data[t * full.nodes() + n] = (nv && v == *nv) ? v : ck.data.norm.apply(v);
        }
    }
    for (std::size_t t = 0; t < horizon; ++t) {
        for (std::size_t n = 0; n < full.nodes(); ++n) {
            w.target.data[t * full.nodes() + n] = full.at(window_start + t_in + t, n, 0);
        }
    }
    for (std::size_t t = 0; t < t_in + horizon; ++t) {
        w.tod_indices.push_back((window_start + t) % full.meta.steps_per_day);
    }

    ForwardOutput out = ck.model.run(w);
    const Tensor anchor = ck.cfg.model.uses_anchor_stream()
                              ? retrieve_anchor(ck.data.anchors, window_start, t_in + horizon)
                              : Tensor({t_in + horizon, full.nodes(), 1});

    if (out_path.empty()) {
        out_path = ckpt_dir + "/forecast_" + std::to_string(window_start) + ".csv";
    }
    std::ofstream file = open_artifact(out_path);
    file << "step,node,input,anchor,prediction,truth\n";
    for (std::size_t t = 0; t < t_in + horizon; ++t) {
        for (std::size_t n = 0; n < full.nodes(); ++n) {
            file << static_cast<long long>(t) - static_cast<long long>(t_in) << ',' << n << ',';
            if (t < t_in) {
                file << fmt17(full.at(window_start + t, n, 0)) << ','
                     << fmt17(anchor.data[t * full.nodes() + n]) << ",,";
            } else {
                file << ',' << fmt17(anchor.data[t * full.nodes() + n]) << ','
                     << fmt17(out.prediction.data[(t - t_in) * full.nodes() + n]) << ','
                     << fmt17(w.target.data[(t - t_in) * full.nodes() + n]);
            }
            file << "\n";
        }
    }
    std::fprintf(stderr, "wrote %s\n", out_path.c_str());
    return 0;
}

int cmd_inspect(const std::string& ckpt_dir, const std::string& data_arg, const std::string& mode,
                const std::string& split, std::size_t samples, std::size_t top,
                std::string out_path) {
    LoadedCheckpoint ck = load_checkpoint(ckpt_dir, data_arg);
    const WindowSet& windows = pick_split(ck.data, split);
    if (out_path.empty()) out_path = ckpt_dir + "/" + mode + ".csv";

    if (mode == "patterns") {
        auto patterns = prototype_physical_patterns(ck.model, windows);
        std::ofstream file = open_artifact(out_path);
        file << "prototype,count,step,mean,stddev\n";
        for (std::size_t k = 0; k < patterns.size(); ++k) {
            if (patterns[k].count == 0) {
                file << k << ",0,,,\n";
                continue;
            }
            for (std::size_t t = 0; t < patterns[k].mean.size(); ++t) {
                file << k << ',' << patterns[k].count << ',' << t << ','
                     << fmt17(patterns[k].mean[t]) << ',' << fmt17(patterns[k].stddev[t]) << "\n";
            }
        }
    } else if (mode == "pca" || mode == "assignments") {
        if (!ck.model.cfg.uses_prototypes()) {
            throw ConfigError("variant has no prototype bank to inspect");
        }
        std::vector<std::vector<double>> query_rows;  // one per (window, node)
        std::vector<std::size_t> assigned;
        std::vector<std::array<std::size_t, 4>> assignment_rows;
        for (const Window& w : windows.windows) {
            ForwardOutput out = ck.model.run(w);
            for (std::size_t n = 0; n < ck.model.cfg.n_nodes; ++n) {
                std::vector<double> row(ck.model.cfg.query_dim);
                for (std::size_t j = 0; j < row.size(); ++j) row[j] = out.qc->value.at(n, j);
                query_rows.push_back(std::move(row));
                assigned.push_back(out.att_c.pos_idx[n]);
                assignment_rows.push_back(
                    {w.window_start, n, out.att_c.pos_idx[n], out.att_c.neg_idx[n]});
            }
            if (mode == "pca" && query_rows.size() >= samples) break;
        }

        if (mode == "assignments") {
            std::ofstream file = open_artifact(out_path);
            file << "window_start,node,pos,neg\n";
            for (const auto& row : assignment_rows) {
                file << row[0] << ',' << row[1] << ',' << row[2] << ',' << row[3] << "\n";
            }
        } else {
            const std::size_t count = std::min(samples, query_rows.size());
            Tensor queries({count, ck.model.cfg.query_dim});
            std::vector<std::size_t> labels(count);
            for (std::size_t i = 0; i < count; ++i) {
                std::copy(query_rows[i].begin(), query_rows[i].end(),
                          queries.data.begin() +
                              static_cast<std::ptrdiff_t>(i * ck.model.cfg.query_dim));
                labels[i] = assigned[i];
            }
            auto points =
                pca_project_prototypes(ck.model.params.bank.prototypes->value, queries, labels);

            std::vector<bool> keep(ck.model.cfg.prototype_count, true);
            if (top > 0 && top < ck.model.cfg.prototype_count) {
                std::vector<std::pair<std::size_t, std::size_t>> freq;  // count, prototype
                for (std::size_t k = 0; k < ck.model.cfg.prototype_count; ++k) {
                    freq.emplace_back(0, k);
                }
                for (std::size_t i = 0; i < count; ++i) ++freq[labels[i]].first;
                std::sort(freq.begin(), freq.end(), [](const auto& a, const auto& b) {
                    return a.first != b.first ? a.first > b.first : a.second < b.second;
                });
                keep.assign(ck.model.cfg.prototype_count, false);
                for (std::size_t k = 0; k < top; ++k) keep[freq[k].second] = true;
            }

            std::ofstream file = open_artifact(out_path);
            file << "kind,label,x,y\n";
            for (const PcaPoint& p : points) {
                if (!keep[p.label]) continue;
                file << (p.is_prototype ? "prototype" : "query") << ',' << p.label << ','
                     << fmt17(p.x) << ',' << fmt17(p.y) << "\n";
            }
        }
    } else {
        throw ConfigError("unknown inspect mode '" + mode + "'");
    }
    std::fprintf(stderr, "wrote %s\n", out_path.c_str());
    return 0;
}

int cmd_gradcheck(const std::string& config_path, std::size_t nodes, std::size_t steps_per_day,
                  double tolerance, std::size_t probes) {
    RunConfig cfg = RunConfig::parse_file(config_path);
    ModelConfig mc = cfg.model;
    mc.n_nodes = nodes;
    mc.steps_per_day = steps_per_day;
    GradCheckReport report = grad_check(mc, cfg.seed, tolerance, probes);
    std::printf("gradcheck: %zu probes, %zu redraws, max rel err %.3g at %s -> %s\n",
                report.probes, report.redraws, report.max_rel_err,
                report.worst_coordinate.empty() ? "-" : report.worst_coordinate.c_str(),
                report.pass ? "pass" : "FAIL");
    return report.pass ? 0 : 1;
}

int cmd_ablate(const std::string& config_path, const std::string& variant,
               const std::string& out_dir) {
    RunConfig cfg = RunConfig::parse_file(config_path);
    cfg.model.variant = parse_variant(variant);
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (cfg.out_dir.empty()) throw ConfigError("no output directory (config out_dir or --out)");
    cfg.data = resolve_data_prefix(cfg.data);
    fs::create_directories(cfg.out_dir);

    DatasetBundle data = prepare_dataset(cfg);
    Model model = make_model(cfg, data);
    TrainResult result = train_model(model, data, cfg);
    write_history(cfg.out_dir + "/history.csv", result.history);
    save_model(cfg.out_dir, model, cfg);

    MetricsReport test_report = evaluate(model, data.test_windows);
    MetricsReport hi_report = evaluate_hi(data.test_windows, data.norm, data.full.meta.null_value);
    write_metrics_file(cfg.out_dir + "/metrics_test.csv", test_report, hi_report);
    std::printf("%-8s test mae %.4f rmse %.4f mape %.2f%%\n", variant.c_str(),
                test_report.average.mae, test_report.average.rmse, test_report.average.mape);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ST-SSDL spatio-temporal forecasting workbench"};
    app.require_subcommand(1);

    std::string gd_out, gd_deviation = "low", gd_name = "synth";
    std::size_t gd_nodes = 4, gd_weeks = 3, gd_spd = 24;
    std::uint64_t gd_seed = 1;
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
    gen->add_option("--out", gd_out, "output directory")->required();
    gen->add_option("--nodes", gd_nodes, "sensor count");
    gen->add_option("--weeks", gd_weeks, "number of weeks");
    gen->add_option("--deviation", gd_deviation, "low|medium|high");
    gen->add_option("--seed", gd_seed, "generator seed");
    gen->add_option("--steps-per-day", gd_spd, "timesteps per day");
    gen->add_option("--name", gd_name, "dataset name (file stem)");

    std::string tr_config, tr_out;
    auto* train = app.add_subcommand("train", "train a model from a config file");
    train->add_option("--config", tr_config, "run config file")->required();
    train->add_option("--out", tr_out, "output directory (overrides config out_dir)");

    std::string ev_ckpt, ev_data, ev_split = "test", ev_out;
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint against HI");
    eval_cmd->add_option("--checkpoint", ev_ckpt, "checkpoint directory")->required();
    eval_cmd->add_option("--data", ev_data, "dataset prefix or directory");
    eval_cmd->add_option("--split", ev_split, "train|val|test");
    eval_cmd->add_option("--out", ev_out, "metrics file path");

    std::string fc_ckpt, fc_data, fc_out;
    std::size_t fc_start = 0;
    auto* fc = app.add_subcommand("forecast", "export one window's forecast");
    fc->add_option("--checkpoint", fc_ckpt, "checkpoint directory")->required();
    fc->add_option("--data", fc_data, "dataset prefix or directory");
    fc->add_option("--window-start", fc_start, "global timestep of the window")->required();
    fc->add_option("--out", fc_out, "output file path");

    std::string in_ckpt, in_data, in_mode, in_split = "test", in_out;
    std::size_t in_samples = 400, in_top = 0;
    auto* insp = app.add_subcommand("inspect", "export prototype diagnostics");
    insp->add_option("--checkpoint", in_ckpt, "checkpoint directory")->required();
    insp->add_option("--data", in_data, "dataset prefix or directory");
    insp->add_option("--mode", in_mode, "patterns|pca|assignments")->required();
    insp->add_option("--split", in_split, "train|val|test");
    insp->add_option("--samples", in_samples, "query sample size for pca");
    insp->add_option("--top", in_top, "keep only the top-k most selected prototypes (0 = all)");
    insp->add_option("--out", in_out, "output file path");

    std::string gc_config;
    std::size_t gc_nodes = 4, gc_spd = 24, gc_probes = 200;
    double gc_tol = 1e-4;
    auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient check");
    gc->add_option("--config", gc_config, "run config file")->required();
    gc->add_option("--nodes", gc_nodes, "node count for the probe model");
    gc->add_option("--steps-per-day", gc_spd, "timesteps per day for the probe model");
    gc->add_option("--tolerance", gc_tol, "max relative error");
    gc->add_option("--probes", gc_probes, "probed parameter coordinates");

    std::string ab_config, ab_variant, ab_out;
    auto* ab = app.add_subcommand("ablate", "train and evaluate a model variant");
    ab->add_option("--config", ab_config, "run config file")->required();
    ab->add_option("--variant", ab_variant, "full|no-con|no-dev|no-both|no-ssdl|naive")
        ->required();
    ab->add_option("--out", ab_out, "output directory (overrides config out_dir)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
        app.exit(e);
        return 2;
    }

    try {
        if (gen->parsed()) {
            return cmd_gen_data(gd_out, gd_nodes, gd_weeks, gd_deviation, gd_seed, gd_spd,
                                gd_name);
        }
        if (train->parsed()) return cmd_train(tr_config, tr_out);
        if (eval_cmd->parsed()) return cmd_eval(ev_ckpt, ev_data, ev_split, ev_out);
        if (fc->parsed()) return cmd_forecast(fc_ckpt, fc_data, fc_start, fc_out);
        if (insp->parsed()) {
            return cmd_inspect(in_ckpt, in_data, in_mode, in_split, in_samples, in_top, in_out);
        }
        if (gc->parsed()) return cmd_gradcheck(gc_config, gc_nodes, gc_spd, gc_tol, gc_probes);
        if (ab->parsed()) return cmd_ablate(ab_config, ab_variant, ab_out);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 2;
}
