#include "stssdl/anchor.hpp"

namespace stssdl {

AnchorTable build_anchor_table(const SeriesTensor& train, const DatasetMeta& meta) {
    const std::size_t t_w = 7 * meta.steps_per_day;
    const std::size_t weeks = train.length() / t_w;
    if (weeks == 0) {
        throw ContractError("build_anchor_table: training split holds " +
                            std::to_string(train.length()) + " steps, need a full week of " +
                            std::to_string(t_w));
    }

    const std::size_t n = train.nodes(), c = train.channels();
    const std::size_t phase = static_cast<std::size_t>(meta.start_weekday) * meta.steps_per_day;

    AnchorTable table;
    table.t_w = t_w;
    table.week_phase_of_origin = phase % t_w;
    table.xbar = Tensor({t_w, n, c});

    // Retrieval indexes by absolute week position, so positions here must
    // account for the split's own offset into the dataset.
    Tensor counts({t_w, n, c});
    for (std::size_t s = 0; s < weeks; ++s) {
        for (std::size_t tau = 0; tau < t_w; ++tau) {
            const std::size_t row = s * t_w + tau;
            const std::size_t pos = (phase + train.origin + tau) % t_w;
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t ch = 0; ch < c; ++ch) {
                    const double v = train.at(row, i, ch);
                    if (meta.null_value && v == *meta.null_value) continue;
                    const std::size_t flat = (pos * n + i) * c + ch;
                    table.xbar.data[flat] += v;
                    counts.data[flat] += 1.0;
                }
            }
        }
    }

    // Global per-node fallback for positions every week left null.
    std::vector<double> node_mean(n * c, 0.0);
    std::vector<double> node_count(n * c, 0.0);
    for (std::size_t t = 0; t < train.length(); ++t) {
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t ch = 0; ch < c; ++ch) {
                const double v = train.at(t, i, ch);
                if (meta.null_value && v == *meta.null_value) continue;
                node_mean[i * c + ch] += v;
                node_count[i * c + ch] += 1.0;
            }
        }
    }
    for (std::size_t k = 0; k < node_mean.size(); ++k) {
        node_mean[k] = node_count[k] > 0.0 ? node_mean[k] / node_count[k] : 0.0;
    }

    for (std::size_t pos = 0; pos < t_w; ++pos) {
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t ch = 0; ch < c; ++ch) {
                const std::size_t flat = (pos * n + i) * c + ch;
                table.xbar.data[flat] = counts.data[flat] > 0.0
                                            ? table.xbar.data[flat] / counts.data[flat]
                                            : node_mean[i * c + ch];
            }
        }
    }
    return table;
}

Tensor retrieve_anchor(const AnchorTable& table, std::size_t window_start, std::size_t len) {
    if (len < 1) throw ContractError("retrieve_anchor: window length must be >= 1");
    const std::size_t n = table.xbar.shape[1], c = table.xbar.shape[2];
    Tensor out({len, n, c});
    for (std::size_t i = 0; i < len; ++i) {
        const std::size_t pos = (table.week_phase_of_origin + window_start + i) % table.t_w;
        for (std::size_t j = 0; j < n * c; ++j) {
            out.data[i * n * c + j] = table.xbar.data[pos * n * c + j];
        }
    }
    return out;
}

}  // namespace stssdl
