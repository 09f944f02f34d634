#include "stssdl/metrics.hpp"

#include <cmath>

namespace stssdl {

namespace {

struct Accumulator {
    double abs_sum = 0.0;
    double sq_sum = 0.0;
    double ape_sum = 0.0;
    std::size_t count = 0;
    std::size_t ape_count = 0;

    void add(double pred, double truth) {
        const double e = pred - truth;
        abs_sum += std::abs(e);
        sq_sum += e * e;
        ++count;
        if (std::abs(truth) > 1e-8) {
            ape_sum += std::abs(e / truth);
            ++ape_count;
        }
    }

    HorizonMetrics finish() const {
        if (count == 0) throw ContractError("evaluate: no valid entries at some horizon");
        HorizonMetrics h;
        h.mae = abs_sum / static_cast<double>(count);
        h.rmse = std::sqrt(sq_sum / static_cast<double>(count));
        h.mape = ape_count > 0 ? 100.0 * ape_sum / static_cast<double>(ape_count) : 0.0;
        return h;
    }
};

template <typename PredictFn>
MetricsReport run_metrics(const WindowSet& windows, std::optional<double> null_value,
                          PredictFn&& predict) {
    if (windows.size() == 0) throw ContractError("evaluate: empty window set");
    const std::size_t horizon = windows.horizon;
    std::vector<Accumulator> per_step(horizon);
    Accumulator pooled;

    for (const Window& w : windows.windows) {
        const Tensor pred = predict(w);  // [T' x N x C], original scale
        const std::size_t per = w.target.size() / horizon;
        for (std::size_t t = 0; t < horizon; ++t) {
            for (std::size_t j = 0; j < per; ++j) {
                const double truth = w.target.data[t * per + j];
                if (null_value && truth == *null_value) continue;
                per_step[t].add(pred.data[t * per + j], truth);
                pooled.add(pred.data[t * per + j], truth);
            }
        }
    }

    MetricsReport report;
    report.window_count = windows.size();
    report.per_horizon.reserve(horizon);
    for (const Accumulator& acc : per_step) report.per_horizon.push_back(acc.finish());
    report.average = pooled.finish();
    return report;
}

}  // namespace

MetricsReport evaluate(const Model& model, const WindowSet& windows) {
    return run_metrics(windows, model.null_value,
                       [&](const Window& w) { return model.run(w).prediction; });
}

Tensor hi_baseline(const Tensor& input_window, std::size_t horizon) {
    require_rank(input_window, 3, "hi_baseline");
    if (input_window.shape[0] < 1) throw ContractError("hi_baseline: empty input window");
    const std::size_t n = input_window.shape[1], c = input_window.shape[2];
    const std::size_t last = (input_window.shape[0] - 1) * n * c;
    Tensor out({horizon, n, c});
    for (std::size_t t = 0; t < horizon; ++t) {
        for (std::size_t j = 0; j < n * c; ++j) out.data[t * n * c + j] = input_window.data[last + j];
    }
    return out;
}

MetricsReport evaluate_hi(const WindowSet& windows, const Normalizer& norm,
                          std::optional<double> null_value) {
    return run_metrics(windows, null_value, [&](const Window& w) {
        Tensor input = w.input;
        for (double& v : input.data) v = norm.invert(v);
        return hi_baseline(input, windows.horizon);
    });
}

}  // namespace stssdl
