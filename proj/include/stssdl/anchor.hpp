#pragma once

#include "stssdl/data.hpp"

namespace stssdl {

// Weekly positional average of the training split, indexed by absolute week
// position (0 = Monday midnight). Built once, then read-only.
struct AnchorTable {
    Tensor xbar;                            // [t_w x N x C], original scale
    std::size_t t_w = 0;                    // 7 * steps_per_day
    std::size_t week_phase_of_origin = 0;   // week position of dataset timestep 0

    double at(std::size_t pos, std::size_t n, std::size_t c) const {
        const std::size_t nodes = xbar.shape[1], channels = xbar.shape[2];
        return xbar.data[(pos * nodes + n) * channels + c];
    }
};

// Positional mean over the S complete weekly segments of the training
// split; the incomplete trailing segment is discarded. Null entries are
// excluded per position; positions with no valid sample fall back to the
// node's global mean.
AnchorTable build_anchor_table(const SeriesTensor& train, const DatasetMeta& meta);

// Timestamp-aligned retrieval: row i of the result is
// xbar[(phase + window_start + i) mod t_w]. Wraps across week boundaries.
Tensor retrieve_anchor(const AnchorTable& table, std::size_t window_start, std::size_t len);

}  // namespace stssdl
