#pragma once

#include <array>

#include "mvsweep/cost_volume.hpp"
#include "mvsweep/grid.hpp"
#include "mvsweep/rem.hpp"

namespace mvsweep {

struct LossWeights {
    std::array<double, 3> alpha{0.5, 1.0, 2.0};
    std::array<double, 2> beta{3.0, 0.0};
};

enum class ClampMode { hard, soft };

// Previous-stage distribution restricted to a per-pixel interval. Hard mode
// zeroes hypotheses (and their probabilities) outside the open interval;
// soft mode reweights by a sigmoid window of width tau so the result stays
// differentiable in the interval bounds.
struct RefinedDistribution {
    ClampMode mode = ClampMode::hard;
    double tau = 0.0;
    Volume hyps;      // clamped hypothesis depths
    Volume p;         // renormalized probabilities (0 rows where invalid)
    Grid valid;       // 0 where surviving mass fell below 1e-8
    // kept for the soft-mode backward pass
    Volume hyps_orig;
    Volume p_orig;
    Volume window;    // per-plane clamp weights
    Grid mass;        // per-pixel sum of p_orig * window
    Grid dmin;
    Grid dmax;
};

RefinedDistribution clamp_refine(const DepthHypotheses& hyps, const ProbabilityVolume& pv,
                                 const DepthRangeMap& range, ClampMode mode,
                                 double tau = 0.0);

struct DepthWithMask {
    Grid depth;
    Grid mask;
};

// Expected depth of the refined distribution; invalid pixels carry the mask.
DepthWithMask refined_depth(const RefinedDistribution& rd);

struct MaskedLoss {
    double value = 0.0;
    long count = 0;
    bool empty = false; // EmptyMask: no valid pixels, value forced to 0
};

// Mean over valid pixels of the smooth-L1 penalty with transition point 1
// (scene units).
MaskedLoss smooth_l1(const Grid& pred, const Grid& gt, const Grid& valid);

inline double smooth_l1_penalty(double r) {
    double a = r < 0.0 ? -r : r;
    return a < 1.0 ? 0.5 * r * r : a - 0.5;
}
inline double smooth_l1_grad(double r) {
    double a = r < 0.0 ? -r : r;
    return a < 1.0 ? r : (r > 0.0 ? 1.0 : -1.0);
}

double total_loss(const std::array<double, 3>& stage_losses,
                  const std::array<double, 2>& refined_losses, const LossWeights& w);

// Valid-pixel 2x2 block averaging, iterated for factor 4; gt <= 0 marks
// invalid pixels and stays 0 in the result.
Grid downsample_gt(const Grid& gt, int factor);

struct RangeGrad {
    Grid dmin;
    Grid dmax;
};

// Gradient of loss_scale * smooth_l1(refined_depth(rd), gt) with respect to
// the interval bounds, for a soft-mode distribution. loss_mask must be the
// mask the loss was evaluated with.
RangeGrad refined_loss_backward(const RefinedDistribution& rd, const Grid& gt,
                                const Grid& loss_mask, double loss_scale);

} // namespace mvsweep
