#pragma once

#include <vector>

namespace mvsweep {

struct AdamConfig {
    double lr = 1e-3;
    double b1 = 0.9;
    double b2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    long step = 0;

    void init(size_t n) {
        m.assign(n, 0.0);
        v.assign(n, 0.0);
        step = 0;
    }
};

// Bias-corrected adaptive-moment update, elementwise. Throws ShapeMismatch.
void adam_step(std::vector<double>& params, const std::vector<double>& grads,
               AdamState& state, const AdamConfig& cfg, double lr_mult = 1.0);

} // namespace mvsweep
