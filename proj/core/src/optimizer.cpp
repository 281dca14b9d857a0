#include "mvsweep/optimizer.hpp"

#include <cmath>

#include "mvsweep/error.hpp"

namespace mvsweep {

void adam_step(std::vector<double>& params, const std::vector<double>& grads,
               AdamState& state, const AdamConfig& cfg, double lr_mult) {
    require(params.size() == grads.size(), "ShapeMismatch",
            "parameter/gradient size mismatch");
    if (state.m.size() != params.size()) state.init(params.size());
    ++state.step;
    double bc1 = 1.0 - std::pow(cfg.b1, static_cast<double>(state.step));
    double bc2 = 1.0 - std::pow(cfg.b2, static_cast<double>(state.step));
    double lr = cfg.lr * lr_mult;
    for (size_t i = 0; i < params.size(); ++i) {
        double g = grads[i];
        state.m[i] = cfg.b1 * state.m[i] + (1.0 - cfg.b1) * g;
        state.v[i] = cfg.b2 * state.v[i] + (1.0 - cfg.b2) * g * g;
        double mhat = state.m[i] / bc1;
        double vhat = state.v[i] / bc2;
        params[i] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
}

} // namespace mvsweep
