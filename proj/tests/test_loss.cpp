#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mvsweep/loss.hpp"
#include "mvsweep/rng.hpp"
#include "mvsweep/trainer.hpp"

using namespace mvsweep;

namespace {

DepthRangeMap flat_range(int w, int h, double lo, double hi) {
    DepthRangeMap rm;
    rm.dmin = Grid(w, h, lo);
    rm.dmax = Grid(w, h, hi);
    rm.raw_len = Grid(w, h, hi - lo);
    rm.clip_lo = Grid(w, h, 0.0);
    rm.clip_hi = Grid(w, h, 0.0);
    return rm;
}

struct Pixel {
    DepthHypotheses hyps;
    ProbabilityVolume pv;
};

Pixel single_pixel(const std::vector<double>& depths, const std::vector<double>& probs) {
    Pixel px;
    int d = static_cast<int>(depths.size());
    px.hyps.depths = Volume(1, 1, d);
    px.pv.p = Volume(1, 1, d);
    px.pv.valid = Grid(1, 1, 1.0);
    for (int j = 0; j < d; ++j) {
        px.hyps.depths.at(0, 0, j) = depths[static_cast<size_t>(j)];
        px.pv.p.at(0, 0, j) = probs[static_cast<size_t>(j)];
    }
    return px;
}

} // namespace

TEST_CASE("clamp with a covering range leaves the distribution unchanged") {
    Pixel px = single_pixel({2, 3, 4}, {0.2, 0.5, 0.3});
    RefinedDistribution rd = clamp_refine(px.hyps, px.pv, flat_range(1, 1, 0.0, 10.0),
                                          ClampMode::hard);
    CHECK(rd.valid.at(0, 0) == 1.0);
    for (int j = 0; j < 3; ++j) {
        CHECK(rd.p.at(0, 0, j) == doctest::Approx(px.pv.p.at(0, 0, j)).epsilon(1e-15));
        CHECK(rd.hyps.at(0, 0, j) == px.hyps.depths.at(0, 0, j));
    }
}

TEST_CASE("hard clamp drops planes outside the open interval and renormalizes") {
    Pixel px = single_pixel({2, 3, 4}, {0.2, 0.5, 0.3});
    RefinedDistribution rd = clamp_refine(px.hyps, px.pv, flat_range(1, 1, 2.5, 4.5),
                                          ClampMode::hard);
    CHECK(rd.valid.at(0, 0) == 1.0);
    CHECK(rd.p.at(0, 0, 0) == 0.0);
    CHECK(rd.hyps.at(0, 0, 0) == 0.0);
    CHECK(rd.p.at(0, 0, 1) == doctest::Approx(0.625).epsilon(1e-12));
    CHECK(rd.p.at(0, 0, 2) == doctest::Approx(0.375).epsilon(1e-12));

    DepthWithMask dm = refined_depth(rd);
    CHECK(dm.depth.at(0, 0) == doctest::Approx(3.375).epsilon(1e-12));
    CHECK(dm.mask.at(0, 0) == 1.0);
}

TEST_CASE("empty support marks the pixel invalid") {
    Pixel px = single_pixel({2, 3, 4}, {0.2, 0.5, 0.3});
    RefinedDistribution rd = clamp_refine(px.hyps, px.pv, flat_range(1, 1, 10.0, 11.0),
                                          ClampMode::hard);
    CHECK(rd.valid.at(0, 0) == 0.0);
    DepthWithMask dm = refined_depth(rd);
    CHECK(dm.mask.at(0, 0) == 0.0);
    CHECK(dm.depth.at(0, 0) == 0.0);
}

TEST_CASE("single surviving hypothesis is returned exactly") {
    Pixel px = single_pixel({2, 3, 4}, {0.2, 0.5, 0.3});
    RefinedDistribution rd = clamp_refine(px.hyps, px.pv, flat_range(1, 1, 2.5, 3.5),
                                          ClampMode::hard);
    DepthWithMask dm = refined_depth(rd);
    CHECK(dm.depth.at(0, 0) == 3.0);
}

TEST_CASE("random single-pixel cases match a scalar brute-force oracle") {
    Rng rng(61);
    for (int trial = 0; trial < 500; ++trial) {
        int d = rng.uniform_int(2, 8);
        std::vector<double> depths(static_cast<size_t>(d)), probs(static_cast<size_t>(d));
        double base = rng.uniform(1.0, 100.0), step = rng.uniform(0.1, 5.0), sum = 0.0;
        for (int j = 0; j < d; ++j) {
            depths[static_cast<size_t>(j)] = base + step * j;
            probs[static_cast<size_t>(j)] = rng.uniform(0.0, 1.0);
            sum += probs[static_cast<size_t>(j)];
        }
        for (double& p : probs) p /= sum;
        double lo = rng.uniform(base - step, base + step * d);
        double hi = lo + rng.uniform(0.0, step * d);

        Pixel px = single_pixel(depths, probs);
        RefinedDistribution rd =
            clamp_refine(px.hyps, px.pv, flat_range(1, 1, lo, hi), ClampMode::hard);
        DepthWithMask dm = refined_depth(rd);

        // brute force
        double mass = 0.0, acc = 0.0;
        for (int j = 0; j < d; ++j) {
            if (depths[static_cast<size_t>(j)] > lo && depths[static_cast<size_t>(j)] < hi) {
                mass += probs[static_cast<size_t>(j)];
                acc += probs[static_cast<size_t>(j)] * depths[static_cast<size_t>(j)];
            }
        }
        if (mass < 1e-8) {
            CHECK(dm.mask.at(0, 0) == 0.0);
        } else {
            CHECK(dm.mask.at(0, 0) == 1.0);
            CHECK(std::abs(dm.depth.at(0, 0) - acc / mass) <= 1e-12);
        }
    }
}

TEST_CASE("soft clamp converges to the hard clamp as tau vanishes") {
    Pixel px = single_pixel({2, 3, 4, 5}, {0.1, 0.4, 0.3, 0.2});
    double spacing = 1.0, tau = 1e-4 * spacing;
    // boundaries at 2.6 and 4.4: every hypothesis is >= 10 tau away
    DepthRangeMap rm = flat_range(1, 1, 2.6, 4.4);
    RefinedDistribution hard = clamp_refine(px.hyps, px.pv, rm, ClampMode::hard);
    RefinedDistribution soft = clamp_refine(px.hyps, px.pv, rm, ClampMode::soft, tau);
    double dh = refined_depth(hard).depth.at(0, 0);
    double ds = refined_depth(soft).depth.at(0, 0);
    CHECK(std::abs(dh - ds) < 1e-6);
}

TEST_CASE("refined depth lies inside the interval for valid hard-mode pixels") {
    Rng rng(67);
    for (int trial = 0; trial < 200; ++trial) {
        int d = rng.uniform_int(3, 9);
        std::vector<double> depths(static_cast<size_t>(d)), probs(static_cast<size_t>(d));
        double base = rng.uniform(10.0, 50.0), step = rng.uniform(0.5, 3.0), sum = 0.0;
        for (int j = 0; j < d; ++j) {
            depths[static_cast<size_t>(j)] = base + step * j;
            probs[static_cast<size_t>(j)] = rng.uniform(0.01, 1.0);
            sum += probs[static_cast<size_t>(j)];
        }
        for (double& p : probs) p /= sum;
        double lo = base + rng.uniform(0.0, step * (d - 1));
        double hi = lo + rng.uniform(step, step * d);
        Pixel px = single_pixel(depths, probs);
        RefinedDistribution rd =
            clamp_refine(px.hyps, px.pv, flat_range(1, 1, lo, hi), ClampMode::hard);
        DepthWithMask dm = refined_depth(rd);
        if (dm.mask.at(0, 0) > 0.0) {
            CHECK(dm.depth.at(0, 0) >= lo);
            CHECK(dm.depth.at(0, 0) <= hi);
        }
    }
}

TEST_CASE("smooth L1 values") {
    Grid pred(4, 3, 0.0), gt(4, 3, 0.0), mask(4, 3, 1.0);
    for (double& v : pred.data) v = 0.5;
    MaskedLoss l = smooth_l1(pred, gt, mask);
    CHECK(l.value == doctest::Approx(0.125).epsilon(1e-15));
    CHECK(l.count == 12);

    for (double& v : pred.data) v = 2.0;
    CHECK(smooth_l1(pred, gt, mask).value == doctest::Approx(1.5).epsilon(1e-15));

    pred = gt;
    CHECK(smooth_l1(pred, gt, mask).value == 0.0);

    Grid none(4, 3, 0.0);
    MaskedLoss empty = smooth_l1(pred, gt, none);
    CHECK(empty.empty);
    CHECK(empty.value == 0.0);
}

TEST_CASE("total loss combines the stage and refined terms") {
    LossWeights w; // defaults alpha (0.5, 1, 2), beta (3, 0)
    CHECK(total_loss({1, 1, 1}, {1, 1}, w) == doctest::Approx(6.5).epsilon(1e-15));
    LossWeights nob = w;
    nob.beta = {0.0, 0.0};
    CHECK(total_loss({1, 2, 3}, {9, 9}, nob) ==
          doctest::Approx(0.5 + 2.0 + 6.0).epsilon(1e-15));
    CHECK(total_loss({0, 0, 0}, {0, 0}, w) == 0.0);
}

TEST_CASE("gt downsampling averages only valid pixels") {
    Grid gt(4, 2, 0.0);
    gt.at(0, 0) = 2.0;
    gt.at(1, 0) = 4.0;
    gt.at(0, 1) = 6.0; // one invalid (0) in this block
    gt.at(2, 0) = 0.0;
    gt.at(3, 0) = 0.0;
    gt.at(2, 1) = 0.0;
    gt.at(3, 1) = 0.0; // fully invalid block
    Grid half = downsample_gt(gt, 2);
    CHECK(half.width == 2);
    CHECK(half.at(0, 0) == doctest::Approx(4.0).epsilon(1e-15));
    CHECK(half.at(1, 0) == 0.0);
}

TEST_CASE("soft-clamp gradient with respect to the uncertainty map") {
    double err = grad_check_refined_wrt_uncertainty(/*seed=*/71, /*eps=*/1e-4);
    CHECK(err <= 1e-4);
}

TEST_CASE("soft mode has nonzero gradient for straddling pixels") {
    // hypotheses straddle the upper boundary: moving it moves mass
    Pixel px = single_pixel({2, 3, 4}, {0.3, 0.4, 0.3});
    DepthRangeMap rm = flat_range(1, 1, 1.5, 3.5);
    double tau = 0.5;
    RefinedDistribution rd = clamp_refine(px.hyps, px.pv, rm, ClampMode::soft, tau);
    Grid gt(1, 1, 3.2), mask(1, 1, 1.0);
    RangeGrad rg = refined_loss_backward(rd, gt, mask, 1.0);
    CHECK(std::abs(rg.dmax.at(0, 0)) > 1e-9);
}
