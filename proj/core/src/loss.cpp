#include "mvsweep/loss.hpp"

#include <cmath>

#include "mvsweep/error.hpp"

namespace mvsweep {

namespace {
constexpr double kMassFloor = 1e-8;
}

RefinedDistribution clamp_refine(const DepthHypotheses& hyps, const ProbabilityVolume& pv,
                                 const DepthRangeMap& range, ClampMode mode, double tau) {
    require(hyps.depths.same_shape(pv.p), "ShapeMismatch",
            "hypotheses and probabilities differ in shape");
    require(range.dmin.width == pv.p.width && range.dmin.height == pv.p.height,
            "ShapeMismatch", "range map shape");
    if (mode == ClampMode::soft)
        require(tau > 0.0, "NonPositiveTemperature", "soft clamp needs tau > 0");

    int W = pv.p.width, H = pv.p.height, D = pv.p.planes;
    RefinedDistribution rd;
    rd.mode = mode;
    rd.tau = tau;
    rd.hyps = Volume(W, H, D, 0.0);
    rd.p = Volume(W, H, D, 0.0);
    rd.valid = Grid(W, H, 0.0);
    rd.hyps_orig = hyps.depths;
    rd.p_orig = pv.p;
    rd.window = Volume(W, H, D, 0.0);
    rd.mass = Grid(W, H, 0.0);
    rd.dmin = range.dmin;
    rd.dmax = range.dmax;

    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            double lo = range.dmin.at(x, y), hi = range.dmax.at(x, y);
            double mass = 0.0;
            for (int j = 0; j < D; ++j) {
                double L = hyps.depths.at(x, y, j);
                double w;
                if (mode == ClampMode::hard) {
                    w = (L > lo && L < hi) ? 1.0 : 0.0;
                } else {
                    w = sigmoid((L - lo) / tau) * sigmoid((hi - L) / tau);
                }
                rd.window.at(x, y, j) = w;
                mass += pv.p.at(x, y, j) * w;
            }
            rd.mass.at(x, y) = mass;
            if (mass < kMassFloor) continue; // MassAllClamped: pixel invalid
            rd.valid.at(x, y) = 1.0;
            for (int j = 0; j < D; ++j) {
                double w = rd.window.at(x, y, j);
                rd.p.at(x, y, j) = pv.p.at(x, y, j) * w / mass;
                if (mode == ClampMode::hard)
                    rd.hyps.at(x, y, j) = w > 0.0 ? hyps.depths.at(x, y, j) : 0.0;
                else
                    rd.hyps.at(x, y, j) = hyps.depths.at(x, y, j);
            }
        }
    }
    return rd;
}

DepthWithMask refined_depth(const RefinedDistribution& rd) {
    int W = rd.p.width, H = rd.p.height, D = rd.p.planes;
    DepthWithMask out;
    out.depth = Grid(W, H, 0.0);
    out.mask = rd.valid;
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            if (rd.valid.at(x, y) <= 0.0) continue;
            double acc = 0.0;
            for (int j = 0; j < D; ++j) acc += rd.hyps.at(x, y, j) * rd.p.at(x, y, j);
            out.depth.at(x, y) = acc;
        }
    }
    return out;
}

MaskedLoss smooth_l1(const Grid& pred, const Grid& gt, const Grid& valid) {
    require(pred.same_shape(gt) && pred.same_shape(valid), "ShapeMismatch",
            "loss input shapes differ");
    MaskedLoss out;
    double acc = 0.0;
    for (size_t i = 0; i < pred.data.size(); ++i) {
        if (valid.data[i] <= 0.0) continue;
        acc += smooth_l1_penalty(pred.data[i] - gt.data[i]);
        ++out.count;
    }
    if (out.count == 0) {
        out.empty = true; // EmptyMask
        return out;
    }
    out.value = acc / static_cast<double>(out.count);
    return out;
}

double total_loss(const std::array<double, 3>& stage_losses,
                  const std::array<double, 2>& refined_losses, const LossWeights& w) {
    double acc = 0.0;
    for (int k = 0; k < 3; ++k)
        acc += w.alpha[static_cast<size_t>(k)] * stage_losses[static_cast<size_t>(k)];
    for (int k = 0; k < 2; ++k)
        acc += w.beta[static_cast<size_t>(k)] * refined_losses[static_cast<size_t>(k)];
    return acc;
}

Grid downsample_gt(const Grid& gt, int factor) {
    require(factor == 1 || factor == 2 || factor == 4, "BadDimensions",
            "downsample factor must be 1, 2 or 4");
    Grid cur = gt;
    while (factor > 1) {
        require(cur.width % 2 == 0 && cur.height % 2 == 0, "BadDimensions",
                "grid dimensions must stay even while halving");
        Grid next(cur.width / 2, cur.height / 2, 0.0);
        for (int y = 0; y < next.height; ++y) {
            for (int x = 0; x < next.width; ++x) {
                double acc = 0.0;
                int n = 0;
                for (int dy = 0; dy < 2; ++dy)
                    for (int dx = 0; dx < 2; ++dx) {
                        double v = cur.at(2 * x + dx, 2 * y + dy);
                        if (v > 0.0) {
                            acc += v;
                            ++n;
                        }
                    }
                next.at(x, y) = n > 0 ? acc / n : 0.0;
            }
        }
        cur = std::move(next);
        factor /= 2;
    }
    return cur;
}

RangeGrad refined_loss_backward(const RefinedDistribution& rd, const Grid& gt,
                                const Grid& loss_mask, double loss_scale) {
    require(rd.mode == ClampMode::soft, "ShapeMismatch",
            "refined loss backward requires a soft-mode distribution");
    int W = rd.p.width, H = rd.p.height, D = rd.p.planes;
    require(gt.width == W && gt.height == H && loss_mask.width == W &&
                loss_mask.height == H,
            "ShapeMismatch", "refined loss backward shapes");

    RangeGrad out;
    out.dmin = Grid(W, H, 0.0);
    out.dmax = Grid(W, H, 0.0);

    long count = 0;
    for (size_t i = 0; i < loss_mask.data.size(); ++i)
        if (loss_mask.data[i] > 0.0) ++count;
    if (count == 0) return out;

    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            if (loss_mask.at(x, y) <= 0.0 || rd.valid.at(x, y) <= 0.0) continue;
            double mass = rd.mass.at(x, y);
            double refined = 0.0;
            for (int j = 0; j < D; ++j) refined += rd.hyps.at(x, y, j) * rd.p.at(x, y, j);
            double dL_drefined = loss_scale *
                                 smooth_l1_grad(refined - gt.at(x, y)) /
                                 static_cast<double>(count);
            double lo = rd.dmin.at(x, y), hi = rd.dmax.at(x, y);
            double g_lo = 0.0, g_hi = 0.0;
            for (int j = 0; j < D; ++j) {
                double L = rd.hyps_orig.at(x, y, j);
                double p0 = rd.p_orig.at(x, y, j);
                if (p0 <= 0.0) continue;
                // d refined / d w_j = p0 * (L - refined) / mass
                double dref_dw = p0 * (L - refined) / mass;
                double a = sigmoid((L - lo) / rd.tau);
                double b = sigmoid((hi - L) / rd.tau);
                double dw_dlo = -(a * (1.0 - a) / rd.tau) * b;
                double dw_dhi = a * (b * (1.0 - b) / rd.tau);
                g_lo += dref_dw * dw_dlo;
                g_hi += dref_dw * dw_dhi;
            }
            out.dmin.at(x, y) = dL_drefined * g_lo;
            out.dmax.at(x, y) = dL_drefined * g_hi;
        }
    }
    return out;
}

} // namespace mvsweep
