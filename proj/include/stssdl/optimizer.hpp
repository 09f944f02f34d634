#pragma once

#include "stssdl/autodiff.hpp"

namespace stssdl {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Standard bias-corrected Adam over a fixed parameter list. Moment tensors
// mirror parameter shapes; the step counter is shared.
class Adam {
public:
    Adam(std::vector<NodePtr> params, AdamConfig cfg = {});

    // Applies one update in place using the gradients currently held by the
    // parameter nodes.
    void step();

    std::size_t steps_taken() const { return t_; }

private:
    std::vector<NodePtr> params_;
    std::vector<Tensor> m_;
    std::vector<Tensor> v_;
    AdamConfig cfg_;
    std::size_t t_ = 0;
};

}  // namespace stssdl
