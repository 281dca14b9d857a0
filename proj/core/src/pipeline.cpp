#include "mvsweep/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "mvsweep/error.hpp"

namespace mvsweep {

namespace {

Grid constant_grid(int w, int h, double v) { return Grid(w, h, v); }

double mean_interval_spacing(const Grid& dmin, const Grid& dmax, int planes) {
    if (planes < 2) return 0.0;
    double acc = 0.0;
    for (size_t i = 0; i < dmin.data.size(); ++i)
        acc += (dmax.data[i] - dmin.data[i]) / (planes - 1);
    return acc / static_cast<double>(dmin.data.size());
}

} // namespace

NetWeights NetWeights::init(const StageConfig& cfg, uint64_t seed) {
    NetWeights w;
    Rng r1(splitmix64(seed ^ 0x11d3a5f1ULL));
    Rng r2(splitmix64(seed ^ 0x7be4c221ULL));
    w.rem1 = RemWeights::init(cfg.planes[0], r1);
    w.rem2 = RemWeights::init(cfg.planes[1], r2);
    if (cfg.trainable_features) {
        Rng rf(splitmix64(seed ^ 0x3c6ef372ULL));
        w.features = FeatureWeights::init(cfg.feature_channels, rf);
    }
    return w;
}

Grid upsample2(const Grid& in, bool nearest) {
    Grid out(in.width * 2, in.height * 2);
    for (int y = 0; y < out.height; ++y) {
        for (int x = 0; x < out.width; ++x) {
            if (nearest) {
                out.at(x, y) = in.at(x / 2, y / 2);
                continue;
            }
            double sx = 0.5 * x, sy = 0.5 * y;
            int x0 = std::min(static_cast<int>(sx), in.width - 1);
            int y0 = std::min(static_cast<int>(sy), in.height - 1);
            int x1 = std::min(x0 + 1, in.width - 1);
            int y1 = std::min(y0 + 1, in.height - 1);
            double fx = sx - x0, fy = sy - y0;
            out.at(x, y) = (1 - fx) * (1 - fy) * in.at(x0, y0) +
                           fx * (1 - fy) * in.at(x1, y0) +
                           (1 - fx) * fy * in.at(x0, y1) + fx * fy * in.at(x1, y1);
        }
    }
    return out;
}

Grid upsample2_adjoint(const Grid& fine_grad) {
    Grid out(fine_grad.width / 2, fine_grad.height / 2, 0.0);
    for (int y = 0; y < fine_grad.height; ++y) {
        for (int x = 0; x < fine_grad.width; ++x) {
            double g = fine_grad.at(x, y);
            if (g == 0.0) continue;
            double sx = 0.5 * x, sy = 0.5 * y;
            int x0 = std::min(static_cast<int>(sx), out.width - 1);
            int y0 = std::min(static_cast<int>(sy), out.height - 1);
            int x1 = std::min(x0 + 1, out.width - 1);
            int y1 = std::min(y0 + 1, out.height - 1);
            double fx = sx - x0, fy = sy - y0;
            out.at(x0, y0) += (1 - fx) * (1 - fy) * g;
            out.at(x1, y0) += fx * (1 - fy) * g;
            out.at(x0, y1) += (1 - fx) * fy * g;
            out.at(x1, y1) += fx * fy * g;
        }
    }
    return out;
}

DepthRangeMap upsample2_range(const DepthRangeMap& rm) {
    DepthRangeMap out;
    out.dmin = upsample2(rm.dmin);
    out.dmax = upsample2(rm.dmax);
    out.raw_len = upsample2(rm.raw_len);
    out.clip_lo = upsample2(rm.clip_lo, /*nearest=*/true);
    out.clip_hi = upsample2(rm.clip_hi, /*nearest=*/true);
    return out;
}

CascadeOutput run_cascade(const std::vector<Grid>& images,
                          const std::vector<CameraParams>& cams, double scene_lo,
                          double scene_hi, NetWeights& weights, const StageConfig& cfg,
                          const RangePolicy& policy, RemMode rem_mode, int threads,
                          bool retain_volumes, CascadeTrace* trace,
                          bool need_feature_grads) {
    if (images.size() < 2) fail("TooFewViews", "cascade needs a reference and a source");
    require(images.size() == cams.size(), "ShapeMismatch", "view/camera count mismatch");
    require(scene_hi > scene_lo, "EmptyRange", "scene range must have positive length");
    int W = images[0].width, H = images[0].height;
    if (W % 4 != 0 || H % 4 != 0)
        fail("BadDimensions", "image dimensions must divide by 4");
    for (const auto& img : images)
        require(img.width == W && img.height == H, "ShapeMismatch",
                "all views must share dimensions");
    for (int k = 0; k < 3; ++k)
        require(cfg.planes[static_cast<size_t>(k)] >= 1, "ZeroCount",
                "plane counts must be >= 1");

    int V = static_cast<int>(images.size());
    bool trainable = cfg.trainable_features && weights.features.has_value();

    // feature pyramids per view
    std::vector<FeaturePyramid> pyramids;
    pyramids.reserve(static_cast<size_t>(V));
    for (const auto& img : images) {
        if (trainable)
            pyramids.push_back(extract_pyramid(img, *weights.features, threads));
        else
            pyramids.push_back(extract_pyramid(img, threads));
    }
    if (trace && need_feature_grads) {
        for (const auto& img : images) {
            Grid half = box_downsample2(img);
            Grid quarter = box_downsample2(half);
            trace->fixed_banks_full.push_back(fixed_feature_bank(img, threads));
            trace->fixed_banks_half.push_back(fixed_feature_bank(half, threads));
            trace->fixed_banks_quarter.push_back(fixed_feature_bank(quarter, threads));
        }
    }
    if (trace) trace->pyramids = pyramids;

    CascadeOutput out;
    double scene_len = scene_hi - scene_lo;

    Grid cur_dmin, cur_dmax; // consuming-resolution interval of the next stage
    double nominal_len = scene_len;

    for (int k = 0; k < 3; ++k) {
        int div = StageConfig::divisors[static_cast<size_t>(k)];
        int Wk = W / div, Hk = H / div;
        int Dk = cfg.planes[static_cast<size_t>(k)];

        const FeatureMap* ref_feat = nullptr;
        std::vector<FeatureMap> src_feats;
        auto pick = [&](const FeaturePyramid& p) -> const FeatureMap& {
            return k == 0 ? p.quarter : (k == 1 ? p.half : p.full);
        };
        ref_feat = &pick(pyramids[0]);
        for (int i = 1; i < V; ++i) src_feats.push_back(pick(pyramids[static_cast<size_t>(i)]));

        std::vector<CameraParams> scams;
        CameraParams rcam = cams[0].scaled(1.0 / div);
        for (int i = 1; i < V; ++i)
            scams.push_back(cams[static_cast<size_t>(i)].scaled(1.0 / div));

        DepthHypotheses hyps;
        double spacing_mean;
        if (k == 0) {
            hyps = uniform_hypotheses(Wk, Hk, scene_lo, scene_hi, Dk);
            spacing_mean = Dk >= 2 ? scene_len / (Dk - 1) : scene_len;
        } else {
            hyps = per_pixel_hypotheses(cur_dmin, cur_dmax, Dk);
            spacing_mean = Dk >= 2 ? mean_interval_spacing(cur_dmin, cur_dmax, Dk)
                                   : mean_interval_spacing(cur_dmin, cur_dmax, 2);
        }

        StageTrace* st = trace ? &trace->stage[static_cast<size_t>(k)] : nullptr;
        CostVolumeCache* cvc = (st && need_feature_grads) ? &st->cvc : nullptr;
        CostVolume cv = build_cost_volume(*ref_feat, src_feats, rcam, scams, hyps,
                                          threads, cvc);
        RegularizeCache local_regc;
        RegularizeCache& regc = st ? st->regc : local_regc;
        ProbabilityVolume pv =
            regularize(cv, cfg.reg[static_cast<size_t>(k)], &regc, threads);
        Grid depth = soft_argmin(pv, hyps);

        out.depth[static_cast<size_t>(k)] = depth;
        out.valid[static_cast<size_t>(k)] = pv.valid;
        out.mean_plane_spacing[static_cast<size_t>(k)] = spacing_mean;
        if (retain_volumes) {
            if (!out.prob) out.prob.emplace();
            (*out.prob)[static_cast<size_t>(k)] = pv.p;
        }
        if (st) {
            st->hyps = hyps;
            st->cv = cv;
            st->pv = pv;
            st->depth = depth;
            st->plane_spacing_mean = spacing_mean;
        }

        if (k == 2) break;

        // transition to stage k+1
        Grid r_prev;
        DepthRangeMap rm;
        double snap = std::max(spacing_mean, 1e-9 * scene_len);
        if (policy.kind == RangePolicy::Kind::rem) {
            RemWeights& rem = k == 0 ? weights.rem1 : weights.rem2;
            RemForwardCache local_remc;
            RemForwardCache& remc = st ? st->remc : local_remc;
            Grid unc = rem_forward(pv, rem, rem_mode, &remc, threads);
            r_prev = k == 0 ? constant_grid(Wk, Hk, scene_len)
                            : Grid(cur_dmax.width, cur_dmax.height);
            if (k > 0)
                for (size_t i = 0; i < r_prev.data.size(); ++i)
                    r_prev.data[i] = cur_dmax.data[i] - cur_dmin.data[i];
            rm = dynamic_range(depth, unc, cfg.lambda[static_cast<size_t>(k)], r_prev,
                               scene_lo, scene_hi, snap);
            out.uncertainty[static_cast<size_t>(k)] = unc;
            if (st) {
                st->uncertainty = unc;
                st->r_prev = r_prev;
            }
        } else {
            // uniform shrink relative to the nominal previous length
            double shrink = policy.shrink[static_cast<size_t>(k)];
            require(shrink > 0.0, "NonPositiveLambda", "shrink factor must be positive");
            r_prev = constant_grid(Wk, Hk, nominal_len);
            Grid ones(Wk, Hk, 1.0);
            rm = dynamic_range(depth, ones, 0.5 * shrink, r_prev, scene_lo, scene_hi,
                               snap);
            nominal_len *= shrink;
        }
        out.range[static_cast<size_t>(k)] = rm;
        DepthRangeMap used = upsample2_range(rm);
        out.range_used[static_cast<size_t>(k)] = used;
        if (st) {
            st->rm = rm;
            st->snap_width = snap;
        }
        cur_dmin = out.range_used[static_cast<size_t>(k)].dmin;
        cur_dmax = out.range_used[static_cast<size_t>(k)].dmax;
    }
    return out;
}

CascadeOutput infer(const std::vector<Grid>& images,
                    const std::vector<CameraParams>& cams, double scene_lo,
                    double scene_hi, NetWeights& weights, const StageConfig& cfg,
                    int threads, bool retain_volumes) {
    RangePolicy policy;
    policy.kind = RangePolicy::Kind::rem;
    return run_cascade(images, cams, scene_lo, scene_hi, weights, cfg, policy,
                       RemMode::eval, threads, retain_volumes);
}

CascadeOutput fixed_range_baseline(const std::vector<Grid>& images,
                                   const std::vector<CameraParams>& cams,
                                   double scene_lo, double scene_hi,
                                   NetWeights& weights, const StageConfig& cfg,
                                   const std::array<double, 2>& shrink_factors,
                                   int threads) {
    RangePolicy policy;
    policy.kind = RangePolicy::Kind::fixed_shrink;
    policy.shrink = shrink_factors;
    return run_cascade(images, cams, scene_lo, scene_hi, weights, cfg, policy,
                       RemMode::eval, threads);
}

} // namespace mvsweep
