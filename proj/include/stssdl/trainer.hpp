#pragma once

#include "stssdl/config.hpp"
#include "stssdl/metrics.hpp"
#include "stssdl/optimizer.hpp"

namespace stssdl {

// Everything derived from one dataset under one split: the normalizer and
// anchor table come from the training split only.
struct DatasetBundle {
    SeriesTensor full;
    SeriesTensor train;
    SeriesTensor val;
    SeriesTensor test;
    Normalizer norm;
    AnchorTable anchors;
    WindowSet train_windows;
    WindowSet val_windows;
    WindowSet test_windows;
};

DatasetBundle prepare_dataset(const RunConfig& cfg);
DatasetBundle prepare_dataset(SeriesTensor series, const RunConfig& cfg);

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    double l_mae = 0.0;
    double l_con = 0.0;
    double l_dev = 0.0;
    double total = 0.0;
    double val_mae = 0.0;
};

struct TrainResult {
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0;
    double best_val_mae = 0.0;
};

// Builds a model for the bundle and optimizes it with Adam on seeded
// shuffled mini-batches; the gradient is the batch-mean of per-window
// losses. Keeps the best-validation parameters and restores them at the
// end. Early-stops after `patience` epochs without improvement.
Model make_model(const RunConfig& cfg, const DatasetBundle& data);
TrainResult train_model(Model& model, const DatasetBundle& data, const RunConfig& cfg);

void write_history(const std::string& path, const std::vector<EpochRecord>& history);

// Checkpoint directory: model.manifest + model.bin (parameters) plus
// anchors and normalizer so evaluation is self-contained.
void save_model(const std::string& dir, const Model& model, const RunConfig& cfg);
Model load_model(const std::string& dir, const DatasetBundle& data, const RunConfig& cfg);

}  // namespace stssdl
