#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>

#include "stssdl/tensor.hpp"

namespace stssdl {

// Calendar metadata of a series. Timestep 0 falls at midnight of
// start_weekday (0 = Monday).
struct DatasetMeta {
    std::size_t steps_per_day = 0;
    int start_weekday = 0;
    std::optional<double> null_value;
    std::string name;
};

// A [T_all x N x C] block of sensor observations. origin is the global
// timestep of row 0, nonzero for split views so that window indices keep
// their calendar alignment.
struct SeriesTensor {
    Tensor values;
    DatasetMeta meta;
    std::size_t origin = 0;

    std::size_t length() const { return values.shape[0]; }
    std::size_t nodes() const { return values.shape[1]; }
    std::size_t channels() const { return values.shape[2]; }
    double at(std::size_t t, std::size_t n, std::size_t c) const {
        return values.data[(t * nodes() + n) * channels() + c];
    }
    double& at(std::size_t t, std::size_t n, std::size_t c) {
        return values.data[(t * nodes() + n) * channels() + c];
    }
};

// Per-dataset z-score parameters fitted on non-null training entries.
struct Normalizer {
    double mean = 0.0;
    double std = 1.0;

    static Normalizer fit(const SeriesTensor& train);
    double apply(double x) const { return (x - mean) / std; }
    double invert(double z) const { return z * std + mean; }
};

struct Window {
    Tensor input;                          // [T x N x C], normalized
    Tensor target;                         // [T' x N x C], original scale
    std::size_t window_start = 0;          // global timestep of input row 0
    std::vector<std::size_t> tod_indices;  // length T + T'
};

struct WindowSet {
    std::vector<Window> windows;
    std::size_t input_len = 0;
    std::size_t horizon = 0;

    std::size_t size() const { return windows.size(); }
};

// Series files are CSV with header "timestep,s0,s1,...", one reading per
// sensor (C = 1). Metadata is a JSON document with steps_per_day,
// start_weekday, null_value (optional null), name.
SeriesTensor load_dataset(const std::string& series_path, const std::string& meta_path);
void save_dataset(const SeriesTensor& series, const std::string& series_path,
                  const std::string& meta_path);

// Contiguous chronological split by floor arithmetic; remainder rows go to
// the test split.
std::array<SeriesTensor, 3> split_dataset(const SeriesTensor& x, double train_ratio,
                                          double val_ratio, double test_ratio);

// Stride-1 windows fully inside the split; inputs normalized, targets kept
// original-scale, time-of-day indices attached for input and future steps.
WindowSet make_windows(const SeriesTensor& split, std::size_t input_len, std::size_t horizon,
                       const Normalizer& norm);

enum class DeviationLevel { low, medium, high };

DeviationLevel parse_deviation_level(const std::string& text);
const char* deviation_level_name(DeviationLevel level);

struct SynthConfig {
    std::size_t nodes = 4;
    std::size_t weeks = 3;
    std::size_t steps_per_day = 24;
    DeviationLevel level = DeviationLevel::low;
    std::uint64_t seed = 1;
    bool events = true;  // deviation bumps
    bool noise = true;   // observation noise
};

// Deterministic daily sinusoid per node with seeded deviation events
// (1-hour additive bumps scaled by level) and 1%-of-amplitude noise.
SeriesTensor synth_generate(const SynthConfig& cfg);

}  // namespace stssdl
