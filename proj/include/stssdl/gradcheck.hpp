#pragma once

#include "stssdl/model.hpp"

namespace stssdl {

struct GradCheckReport {
    bool pass = false;
    double max_rel_err = 0.0;
    std::string worst_coordinate;
    std::size_t probes = 0;
    std::size_t redraws = 0;  // probes re-drawn because top-2 selection flipped
};

// Central finite differences (step 1e-6) on randomly probed parameter
// coordinates against analytic gradients of the total loss, on a synthetic
// window. Relative error uses denominator max(1, |fd|). Probes where the
// top-2 prototype selection differs between the two perturbed evaluations
// are re-drawn: the loss is only piecewise smooth there.
GradCheckReport grad_check(const ModelConfig& cfg, std::uint64_t seed, double tolerance,
                           std::size_t probe_count);

}  // namespace stssdl
