#pragma once

#include "stssdl/model.hpp"

namespace stssdl {

struct HorizonMetrics {
    double mae = 0.0;
    double rmse = 0.0;
    double mape = 0.0;  // percent
};

struct MetricsReport {
    std::vector<HorizonMetrics> per_horizon;  // steps 1..T'
    HorizonMetrics average;                   // pooled over all horizons
    std::size_t window_count = 0;
};

// Original-scale MAE / RMSE / MAPE per horizon plus the pooled average.
// Null targets are skipped; MAPE additionally skips |y| <= 1e-8.
MetricsReport evaluate(const Model& model, const WindowSet& windows);

// Historical Inertia: every forecast step repeats the last observed value.
Tensor hi_baseline(const Tensor& input_window, std::size_t horizon);

// HI metrics over a window set; inputs are denormalized first.
MetricsReport evaluate_hi(const WindowSet& windows, const Normalizer& norm,
                          std::optional<double> null_value);

}  // namespace stssdl
