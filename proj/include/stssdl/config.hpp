#pragma once

#include "stssdl/model.hpp"

namespace stssdl {

// Run configuration, serialized as flat "key = value" text. Unknown keys
// are rejected so sweep typos fail loudly. n_nodes, channels and
// steps_per_day always come from the dataset, never from the file.
struct RunConfig {
    std::string data;  // path prefix; <data>.csv and <data>.meta.json
    double split_train = 0.7;
    double split_val = 0.1;
    double split_test = 0.2;
    std::uint64_t seed = 1;
    std::size_t batch_size = 16;
    std::size_t epochs = 100;
    std::size_t patience = 30;
    double lr = 1e-3;
    std::string out_dir;
    ModelConfig model;

    static RunConfig parse_file(const std::string& path);
    static RunConfig parse_text(const std::string& text, const std::string& origin);
    void save(const std::string& path) const;
    std::string to_text() const;
};

}  // namespace stssdl
