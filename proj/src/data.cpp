#include "stssdl/data.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "stssdl/rng.hpp"

namespace stssdl {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

std::string fmt_value(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    fields.push_back(cur);
    return fields;
}

}  // namespace

Normalizer Normalizer::fit(const SeriesTensor& train) {
    double sum = 0.0, sum_sq = 0.0;
    std::size_t count = 0;
    for (double v : train.values.data) {
        if (train.meta.null_value && v == *train.meta.null_value) continue;
        sum += v;
        sum_sq += v * v;
        ++count;
    }
    if (count == 0) throw ContractError("normalizer: no valid entries to fit");
    Normalizer n;
    n.mean = sum / static_cast<double>(count);
    const double var = sum_sq / static_cast<double>(count) - n.mean * n.mean;
    n.std = std::max(std::sqrt(std::max(var, 0.0)), 1e-8);
    return n;
}

SeriesTensor load_dataset(const std::string& series_path, const std::string& meta_path) {
    std::ifstream meta_in(meta_path);
    if (!meta_in) throw ParseError("cannot open metadata file " + meta_path);
    nlohmann::json meta_doc;
    try {
        meta_in >> meta_doc;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("metadata " + meta_path + ": " + e.what());
    }
    DatasetMeta meta;
    for (const char* field : {"steps_per_day", "start_weekday", "name"}) {
        if (!meta_doc.contains(field)) {
            throw ParseError("metadata " + meta_path + ": missing field " + field);
        }
    }
    meta.steps_per_day = meta_doc["steps_per_day"].get<std::size_t>();
    meta.start_weekday = meta_doc["start_weekday"].get<int>();
    meta.name = meta_doc["name"].get<std::string>();
    if (meta_doc.contains("null_value") && !meta_doc["null_value"].is_null()) {
        meta.null_value = meta_doc["null_value"].get<double>();
    }
    if (meta.steps_per_day == 0) throw ParseError("metadata: steps_per_day must be positive");
    if (meta.start_weekday < 0 || meta.start_weekday > 6) {
        throw ParseError("metadata: start_weekday must be in 0..6");
    }

    std::ifstream in(series_path);
    if (!in) throw ParseError("cannot open series file " + series_path);

    std::string line;
    std::size_t line_no = 1;
    if (!std::getline(in, line)) throw ParseError(series_path + ": empty file");
    const auto header = split_fields(line);
    if (header.size() < 2 || header[0] != "timestep") {
        throw ParseError(series_path + ": line 1: expected header 'timestep,s0,...'");
    }
    const std::size_t n_sensors = header.size() - 1;

    std::vector<double> rows;
    long long prev_ts = -1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = split_fields(line);
        if (fields.size() != n_sensors + 1) {
            throw ParseError(series_path + ": line " + std::to_string(line_no) + ": expected " +
                             std::to_string(n_sensors + 1) + " fields, got " +
                             std::to_string(fields.size()));
        }
        long long ts;
        try {
            std::size_t used = 0;
            ts = std::stoll(fields[0], &used);
            if (used != fields[0].size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw ParseError(series_path + ": line " + std::to_string(line_no) +
                             ": bad timestep '" + fields[0] + "'");
        }
        if (ts != prev_ts + 1) {
            throw ParseError(series_path + ": line " + std::to_string(line_no) +
                             ": non-monotone timestep " + std::to_string(ts));
        }
        prev_ts = ts;
        for (std::size_t s = 0; s < n_sensors; ++s) {
            try {
                std::size_t used = 0;
                rows.push_back(std::stod(fields[s + 1], &used));
                if (used != fields[s + 1].size()) throw std::invalid_argument("trailing");
            } catch (const std::exception&) {
                throw ParseError(series_path + ": line " + std::to_string(line_no) +
                                 ": bad value '" + fields[s + 1] + "'");
            }
        }
    }
    if (rows.empty()) throw ParseError(series_path + ": no data rows");

    const std::size_t t_all = rows.size() / n_sensors;
    SeriesTensor series;
    series.values = Tensor({t_all, n_sensors, 1}, std::move(rows));
    series.meta = std::move(meta);
    return series;
}

void save_dataset(const SeriesTensor& series, const std::string& series_path,
                  const std::string& meta_path) {
    if (series.channels() != 1) {
        throw ContractError("save_dataset: series files carry one channel per sensor");
    }
    std::ofstream out(series_path);
    if (!out) throw ParseError("cannot write series file " + series_path);
    out << "timestep";
    for (std::size_t s = 0; s < series.nodes(); ++s) out << ",s" << s;
    out << "\n";
    for (std::size_t t = 0; t < series.length(); ++t) {
        out << t;
        for (std::size_t s = 0; s < series.nodes(); ++s) out << ',' << fmt_value(series.at(t, s, 0));
        out << "\n";
    }

    nlohmann::json meta_doc;
    meta_doc["steps_per_day"] = series.meta.steps_per_day;
    meta_doc["start_weekday"] = series.meta.start_weekday;
    meta_doc["null_value"] =
        series.meta.null_value ? nlohmann::json(*series.meta.null_value) : nlohmann::json(nullptr);
    meta_doc["name"] = series.meta.name;
    std::ofstream meta_out(meta_path);
    if (!meta_out) throw ParseError("cannot write metadata file " + meta_path);
    meta_out << meta_doc.dump(2) << "\n";
}

std::array<SeriesTensor, 3> split_dataset(const SeriesTensor& x, double train_ratio,
                                          double val_ratio, double test_ratio) {
    if (train_ratio <= 0.0 || val_ratio <= 0.0 || test_ratio <= 0.0 ||
        std::abs(train_ratio + val_ratio + test_ratio - 1.0) > 1e-9) {
        throw ContractError("split_dataset: ratios must be positive and sum to 1");
    }
    const std::size_t t_all = x.length();
    const std::size_t n_train = static_cast<std::size_t>(t_all * train_ratio);
    const std::size_t n_val = static_cast<std::size_t>(t_all * val_ratio);
    const std::size_t n_test = t_all - n_train - n_val;  // remainder rows land here
    if (n_train == 0 || n_val == 0 || n_test == 0) {
        throw ContractError("split_dataset: a split is empty for length " + std::to_string(t_all));
    }

    auto slice = [&](std::size_t start, std::size_t len) {
        SeriesTensor part;
        part.meta = x.meta;
        part.origin = x.origin + start;
        part.values = Tensor({len, x.nodes(), x.channels()});
        const std::size_t row = x.nodes() * x.channels();
        std::copy(x.values.data.begin() + static_cast<std::ptrdiff_t>(start * row),
                  x.values.data.begin() + static_cast<std::ptrdiff_t>((start + len) * row),
                  part.values.data.begin());
        return part;
    };
    return {slice(0, n_train), slice(n_train, n_val), slice(n_train + n_val, n_test)};
}

WindowSet make_windows(const SeriesTensor& split, std::size_t input_len, std::size_t horizon,
                       const Normalizer& norm) {
    if (input_len < 1 || horizon < 1) throw ContractError("make_windows: T and T' must be >= 1");
    if (split.length() < input_len + horizon) {
        throw ContractError("make_windows: split length " + std::to_string(split.length()) +
                            " shorter than T+T' = " + std::to_string(input_len + horizon));
    }

    WindowSet set;
    set.input_len = input_len;
    set.horizon = horizon;
    const std::size_t count = split.length() - input_len - horizon + 1;
    const std::size_t n = split.nodes(), c = split.channels();
    const std::size_t spd = split.meta.steps_per_day;
    set.windows.reserve(count);
    for (std::size_t w = 0; w < count; ++w) {
        Window win;
        win.window_start = split.origin + w;
        win.input = Tensor({input_len, n, c});
        win.target = Tensor({horizon, n, c});
        for (std::size_t t = 0; t < input_len; ++t) {
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t ch = 0; ch < c; ++ch) {
                    const double v = split.at(w + t, i, ch);
                    const bool is_null = split.meta.null_value && v == *split.meta.null_value;
                    win.input.data[(t * n + i) * c + ch] = is_null ? v : norm.apply(v);
                }
            }
        }
        for (std::size_t t = 0; t < horizon; ++t) {
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t ch = 0; ch < c; ++ch) {
                    win.target.data[(t * n + i) * c + ch] = split.at(w + input_len + t, i, ch);
                }
            }
        }
        win.tod_indices.reserve(input_len + horizon);
        for (std::size_t t = 0; t < input_len + horizon; ++t) {
            win.tod_indices.push_back((win.window_start + t) % spd);
        }
        set.windows.push_back(std::move(win));
    }
    return set;
}

DeviationLevel parse_deviation_level(const std::string& text) {
    if (text == "low") return DeviationLevel::low;
    if (text == "medium") return DeviationLevel::medium;
    if (text == "high") return DeviationLevel::high;
    throw ConfigError("unknown deviation level '" + text + "', expected low|medium|high");
}

const char* deviation_level_name(DeviationLevel level) {
    switch (level) {
        case DeviationLevel::low: return "low";
        case DeviationLevel::medium: return "medium";
        case DeviationLevel::high: return "high";
    }
    return "?";
}

SeriesTensor synth_generate(const SynthConfig& cfg) {
    if (cfg.weeks < 2) throw ContractError("synth_generate: need at least 2 weeks");
    if (cfg.nodes < 1 || cfg.steps_per_day < 1) {
        throw ConfigError("synth_generate: nodes and steps_per_day must be positive");
    }

    double level_frac = 0.0;
    switch (cfg.level) {
        case DeviationLevel::low: level_frac = 0.05; break;
        case DeviationLevel::medium: level_frac = 0.25; break;
        case DeviationLevel::high: level_frac = 0.75; break;
    }

    const std::size_t spd = cfg.steps_per_day;
    const std::size_t t_all = cfg.weeks * 7 * spd;
    const std::size_t event_len = std::max<std::size_t>(1, spd / 24);  // one hour

    Rng rng(cfg.seed);
    std::vector<double> base_offset(cfg.nodes), amplitude(cfg.nodes), phase(cfg.nodes);
    for (std::size_t n = 0; n < cfg.nodes; ++n) {
        base_offset[n] = rng.uniform(40.0, 60.0);
        amplitude[n] = rng.uniform(5.0, 15.0);
        phase[n] = rng.uniform(0.0, kTwoPi);
    }

    SeriesTensor series;
    series.values = Tensor({t_all, cfg.nodes, 1});
    series.meta.steps_per_day = spd;
    series.meta.start_weekday = 0;
    series.meta.name = std::string("synth-") + deviation_level_name(cfg.level);
    for (std::size_t t = 0; t < t_all; ++t) {
        const double day_pos = static_cast<double>(t % spd) / static_cast<double>(spd);
        for (std::size_t n = 0; n < cfg.nodes; ++n) {
            series.at(t, n, 0) =
                base_offset[n] + amplitude[n] * std::sin(kTwoPi * day_pos + phase[n]);
        }
    }

    if (cfg.events) {
        // Deviation episodes follow a weekly schedule, the way recurring
        // congestion does: three slots per week (position, 2-5 hour run of
        // one-hour bumps, sign) are drawn once, then each slot fires in a
        // given week with probability 0.85. Bumps hit every node together
        // with amplitude level_frac * b_n and a half-sine profile per hour.
        // Skipped or extra-noisy weeks are what the anchor cannot explain.
        const std::size_t week_len = 7 * spd;
        struct Slot {
            std::size_t start;
            std::size_t span;
            double sign;
        };
        std::vector<Slot> schedule;
        for (int e = 0; e < 3; ++e) {
            const std::size_t span = (2 + rng.integer(4)) * event_len;
            const std::size_t start = rng.integer(week_len - span + 1);
            const double sign = rng.uniform(0.0, 1.0) < 0.5 ? -1.0 : 1.0;
            schedule.push_back({start, span, sign});
        }
        for (std::size_t w = 0; w < cfg.weeks; ++w) {
            for (const Slot& slot : schedule) {
                const bool fires = rng.uniform(0.0, 1.0) < 0.85;
                if (!fires) continue;
                for (std::size_t k = 0; k < slot.span; ++k) {
                    const double progress =
                        (static_cast<double>(k % event_len) + 0.5) /
                        static_cast<double>(event_len);
                    const double bump = std::sin(progress * kTwoPi / 2.0);
                    for (std::size_t n = 0; n < cfg.nodes; ++n) {
                        series.at(w * week_len + slot.start + k, n, 0) +=
                            slot.sign * level_frac * amplitude[n] * bump;
                    }
                }
            }
        }
    }

    if (cfg.noise) {
        for (std::size_t t = 0; t < t_all; ++t) {
            for (std::size_t n = 0; n < cfg.nodes; ++n) {
                series.at(t, n, 0) += rng.normal(0.0, 0.01 * amplitude[n]);
            }
        }
    }
    return series;
}

}  // namespace stssdl
