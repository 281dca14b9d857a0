#include "mvsweep/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mvsweep/error.hpp"

namespace mvsweep {

namespace {

Grid stage_loss_depth_grad(const Grid& depth, const Grid& gt, const Grid& mask,
                           double loss_scale, long count) {
    Grid g(depth.width, depth.height, 0.0);
    if (count == 0) return g;
    for (size_t i = 0; i < depth.data.size(); ++i) {
        if (mask.data[i] <= 0.0) continue;
        g.data[i] = loss_scale * smooth_l1_grad(depth.data[i] - gt.data[i]) /
                    static_cast<double>(count);
    }
    return g;
}

void axpy(std::vector<double>& acc, const std::vector<double>& x, double scale) {
    if (acc.size() < x.size()) acc.resize(x.size(), 0.0);
    for (size_t i = 0; i < x.size(); ++i) acc[i] += scale * x[i];
}

struct GradAcc {
    std::vector<double> rem1;
    std::vector<double> rem2;
    std::vector<double> feat;
};

double rel_err(double a, double n) {
    return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-6});
}

} // namespace

SceneForward forward_losses(const Scene& scene, NetWeights& weights,
                            const StageConfig& cfg, const LossWeights& lw,
                            double tau_factor, RemMode mode, int threads,
                            bool need_feature_grads) {
    SceneForward sf;
    RangePolicy policy;
    policy.kind = RangePolicy::Kind::rem;
    run_cascade(scene.images, scene.cams, scene.spec.depth_min, scene.spec.depth_max(),
                weights, cfg, policy, mode, threads, false, &sf.trace,
                need_feature_grads);

    sf.gt[2] = scene.gt_depth;
    sf.gt[1] = downsample_gt(scene.gt_depth, 2);
    sf.gt[0] = downsample_gt(scene.gt_depth, 4);

    for (int k = 0; k < 3; ++k) {
        const StageTrace& st = sf.trace.stage[static_cast<size_t>(k)];
        Grid mask(st.depth.width, st.depth.height, 0.0);
        for (size_t i = 0; i < mask.data.size(); ++i)
            if (sf.gt[static_cast<size_t>(k)].data[i] > 0.0 &&
                st.pv.valid.data[i] > 0.0)
                mask.data[i] = 1.0;
        sf.loss_mask[static_cast<size_t>(k)] = mask;
        sf.stage[static_cast<size_t>(k)] =
            smooth_l1(st.depth, sf.gt[static_cast<size_t>(k)], mask);
    }

    for (int k = 0; k < 2; ++k) {
        const StageTrace& st = sf.trace.stage[static_cast<size_t>(k)];
        double tau = std::max(tau_factor * st.plane_spacing_mean, 1e-9);
        sf.rd[static_cast<size_t>(k)] =
            clamp_refine(st.hyps, st.pv, st.rm, ClampMode::soft, tau);
        DepthWithMask rdm = refined_depth(sf.rd[static_cast<size_t>(k)]);
        Grid mask(rdm.depth.width, rdm.depth.height, 0.0);
        for (size_t i = 0; i < mask.data.size(); ++i)
            if (sf.loss_mask[static_cast<size_t>(k)].data[i] > 0.0 &&
                rdm.mask.data[i] > 0.0)
                mask.data[i] = 1.0;
        sf.refined_mask[static_cast<size_t>(k)] = mask;
        sf.refined[static_cast<size_t>(k)] =
            smooth_l1(rdm.depth, sf.gt[static_cast<size_t>(k)], mask);
    }

    sf.total = total_loss({sf.stage[0].value, sf.stage[1].value, sf.stage[2].value},
                          {sf.refined[0].value, sf.refined[1].value}, lw);
    return sf;
}

Grid range_grad_to_uncertainty(const RangeGrad& rg, const DepthRangeMap& rm,
                               const Grid& r_prev, double lambda) {
    Grid g(rg.dmin.width, rg.dmin.height, 0.0);
    for (size_t i = 0; i < g.data.size(); ++i) {
        double acc = 0.0;
        if (rm.clip_hi.data[i] <= 0.0) acc += rg.dmax.data[i];
        if (rm.clip_lo.data[i] <= 0.0) acc -= rg.dmin.data[i];
        g.data[i] = lambda * r_prev.data[i] * acc;
    }
    return g;
}

RangeGrad hypo_path_range_grad(const Grid& grad_depth_next, const Volume& p_next,
                               int coarse_w, int coarse_h) {
    int W = grad_depth_next.width, H = grad_depth_next.height, D = p_next.planes;
    require(p_next.width == W && p_next.height == H, "ShapeMismatch",
            "probability volume does not match depth grad");
    Grid g_lo(W, H, 0.0), g_hi(W, H, 0.0);
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            double g = grad_depth_next.at(x, y);
            if (g == 0.0) continue;
            double s_lo, s_hi;
            if (D == 1) {
                s_lo = s_hi = 0.5;
            } else {
                s_lo = 0.0;
                s_hi = 0.0;
                for (int j = 0; j < D; ++j) {
                    double u = static_cast<double>(j) / (D - 1);
                    double p = p_next.at(x, y, j);
                    s_lo += p * (1.0 - u);
                    s_hi += p * u;
                }
            }
            g_lo.at(x, y) = g * s_lo;
            g_hi.at(x, y) = g * s_hi;
        }
    }
    RangeGrad rg;
    rg.dmin = upsample2_adjoint(g_lo);
    rg.dmax = upsample2_adjoint(g_hi);
    require(rg.dmin.width == coarse_w && rg.dmin.height == coarse_h, "ShapeMismatch",
            "coarse grid dimensions");
    return rg;
}

namespace {

void accumulate_scene_gradients(const SceneForward& sf, NetWeights& weights,
                                const StageConfig& cfg, const TrainConfig& tcfg,
                                double scale, GradAcc& acc) {
    const LossWeights& lw = tcfg.loss_weights;

    if (tcfg.train_rem) {
        for (int k = 0; k < 2; ++k) {
            const StageTrace& st = sf.trace.stage[static_cast<size_t>(k)];
            const StageTrace& next = sf.trace.stage[static_cast<size_t>(k) + 1];
            Grid g_unc(st.depth.width, st.depth.height, 0.0);
            bool any = false;

            if (tcfg.path_refined && lw.beta[static_cast<size_t>(k)] != 0.0 &&
                !sf.refined[static_cast<size_t>(k)].empty) {
                RangeGrad rg = refined_loss_backward(
                    sf.rd[static_cast<size_t>(k)], sf.gt[static_cast<size_t>(k)],
                    sf.refined_mask[static_cast<size_t>(k)],
                    lw.beta[static_cast<size_t>(k)]);
                Grid g = range_grad_to_uncertainty(rg, st.rm, st.r_prev,
                                                   cfg.lambda[static_cast<size_t>(k)]);
                for (size_t i = 0; i < g_unc.data.size(); ++i) g_unc.data[i] += g.data[i];
                any = true;
            }

            if (tcfg.path_hypo && lw.alpha[static_cast<size_t>(k) + 1] != 0.0 &&
                !sf.stage[static_cast<size_t>(k) + 1].empty) {
                Grid gd = stage_loss_depth_grad(
                    next.depth, sf.gt[static_cast<size_t>(k) + 1],
                    sf.loss_mask[static_cast<size_t>(k) + 1],
                    lw.alpha[static_cast<size_t>(k) + 1],
                    sf.stage[static_cast<size_t>(k) + 1].count);
                RangeGrad rg = hypo_path_range_grad(gd, next.pv.p, st.depth.width,
                                                    st.depth.height);
                Grid g = range_grad_to_uncertainty(rg, st.rm, st.r_prev,
                                                   cfg.lambda[static_cast<size_t>(k)]);
                for (size_t i = 0; i < g_unc.data.size(); ++i) g_unc.data[i] += g.data[i];
                any = true;
            }

            if (!any) continue;
            RemGrads rgr;
            const RemWeights& rem = k == 0 ? weights.rem1 : weights.rem2;
            rem_backward(g_unc, rem, st.remc, rgr, nullptr, tcfg.threads);
            std::vector<double> flat;
            rgr.pack(flat);
            axpy(k == 0 ? acc.rem1 : acc.rem2, flat, scale);
        }
    }

    if (tcfg.train_features && weights.features) {
        FeatureWeights& fw = *weights.features;
        for (int k = 0; k < 3; ++k) {
            if (lw.alpha[static_cast<size_t>(k)] == 0.0 ||
                sf.stage[static_cast<size_t>(k)].empty)
                continue;
            const StageTrace& st = sf.trace.stage[static_cast<size_t>(k)];
            Grid gd = stage_loss_depth_grad(st.depth, sf.gt[static_cast<size_t>(k)],
                                            sf.loss_mask[static_cast<size_t>(k)],
                                            lw.alpha[static_cast<size_t>(k)],
                                            sf.stage[static_cast<size_t>(k)].count);
            Volume gcost =
                soft_argmin_regularize_backward(gd, st.regc, st.hyps, tcfg.threads);

            auto pick = [&](const FeaturePyramid& p) -> const FeatureMap& {
                return k == 0 ? p.quarter : (k == 1 ? p.half : p.full);
            };
            const auto& banks = k == 0 ? sf.trace.fixed_banks_quarter
                                       : (k == 1 ? sf.trace.fixed_banks_half
                                                 : sf.trace.fixed_banks_full);
            std::vector<FeatureMap> src_feats;
            for (size_t v = 1; v < sf.trace.pyramids.size(); ++v)
                src_feats.push_back(pick(sf.trace.pyramids[v]));
            FeatureMap grad_ref;
            std::vector<FeatureMap> grad_srcs;
            cost_volume_backward(gcost, pick(sf.trace.pyramids[0]), src_feats, st.cvc,
                                 grad_ref, grad_srcs, tcfg.threads);

            // offsets of this scale's conv parameters in the packed layout
            size_t offset = 0;
            for (int s = 0; s < k; ++s)
                offset += fw.conv[static_cast<size_t>(s)].kernel.size() +
                          fw.conv[static_cast<size_t>(s)].bias.size();
            if (acc.feat.size() < fw.param_count()) acc.feat.resize(fw.param_count(), 0.0);

            for (size_t v = 0; v < sf.trace.pyramids.size(); ++v) {
                const FeatureMap& g_feat = v == 0 ? grad_ref : grad_srcs[v - 1];
                const FeatureMap& bank = banks[v];
                FeatureMap conv_out =
                    fw.conv[static_cast<size_t>(k)].forward(bank, tcfg.threads);
                FeatureMap g_pre = g_feat;
                for (size_t i = 0; i < g_pre.data.size(); ++i)
                    g_pre.data[i] *= leaky_relu_grad(conv_out.data[i], fw.leaky_slope);
                std::vector<double> gk, gb;
                fw.conv[static_cast<size_t>(k)].backward(bank, g_pre, gk, gb, nullptr);
                for (size_t i = 0; i < gk.size(); ++i)
                    acc.feat[offset + i] += scale * gk[i];
                for (size_t i = 0; i < gb.size(); ++i)
                    acc.feat[offset + gk.size() + i] += scale * gb[i];
            }
        }
    }
}

} // namespace

TrainResult train(const std::vector<Scene>& dataset, const StageConfig& cfg,
                  const TrainConfig& tcfg, const NetWeights& init) {
    if (dataset.empty()) fail("EmptyDataset", "training needs at least one scene");
    require(tcfg.epochs >= 1, "ConfigError", "epochs must be >= 1");
    require(tcfg.batch_size >= 1, "ConfigError", "batch size must be >= 1");

    TrainResult res;
    res.weights = init;

    AdamState state_rem1, state_rem2, state_feat;
    Rng rng(tcfg.seed);
    double lr_mult = 1.0;
    int step = 0;

    std::vector<int> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 1; epoch <= tcfg.epochs; ++epoch) {
        for (const auto& [e, m] : tcfg.lr_schedule)
            if (e == epoch) lr_mult *= m;
        rng.shuffle(order);

        for (size_t pos = 0; pos < order.size(); pos += static_cast<size_t>(tcfg.batch_size)) {
            size_t bend = std::min(order.size(), pos + static_cast<size_t>(tcfg.batch_size));
            double bn = static_cast<double>(bend - pos);
            GradAcc acc;
            TrainLogRow row;
            for (size_t i = pos; i < bend; ++i) {
                SceneForward sf = forward_losses(
                    dataset[static_cast<size_t>(order[i])], res.weights, cfg,
                    tcfg.loss_weights, tcfg.tau_factor, RemMode::train, tcfg.threads,
                    tcfg.train_features);
                accumulate_scene_gradients(sf, res.weights, cfg, tcfg, 1.0 / bn, acc);
                row.loss1 += sf.stage[0].value / bn;
                row.loss2 += sf.stage[1].value / bn;
                row.loss3 += sf.stage[2].value / bn;
                row.refined1 += sf.refined[0].value / bn;
                row.refined2 += sf.refined[1].value / bn;
                row.total += sf.total / bn;
            }

            if (tcfg.train_rem) {
                std::vector<double> params;
                res.weights.rem1.pack_params(params);
                acc.rem1.resize(params.size(), 0.0);
                adam_step(params, acc.rem1, state_rem1, tcfg.adam, lr_mult);
                res.weights.rem1.unpack_params(params);

                res.weights.rem2.pack_params(params);
                acc.rem2.resize(params.size(), 0.0);
                adam_step(params, acc.rem2, state_rem2, tcfg.adam, lr_mult);
                res.weights.rem2.unpack_params(params);
            }
            if (tcfg.train_features && res.weights.features) {
                std::vector<double> params;
                res.weights.features->pack_params(params);
                acc.feat.resize(params.size(), 0.0);
                adam_step(params, acc.feat, state_feat, tcfg.adam, lr_mult);
                res.weights.features->unpack_params(params);
            }

            ++step;
            row.step = step;
            row.epoch = epoch;
            row.lr = tcfg.adam.lr * lr_mult;
            res.log.push_back(row);
        }
    }
    return res;
}

double grad_check_rem(uint64_t seed, double eps, int width, int height, int d_in,
                      bool all_params) {
    Rng rng(seed);
    RemWeights w = RemWeights::init(d_in, rng);

    ProbabilityVolume pv;
    pv.p = Volume(width, height, d_in);
    pv.valid = Grid(width, height, 1.0);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            double sum = 0.0;
            for (int j = 0; j < d_in; ++j) {
                double v = rng.uniform(0.1, 1.0);
                pv.p.at(x, y, j) = v;
                sum += v;
            }
            for (int j = 0; j < d_in; ++j) pv.p.at(x, y, j) /= sum;
        }

    Grid coeff(width, height);
    for (double& v : coeff.data) v = rng.uniform(-1.0, 1.0);

    // value plus a hash of the rectifier activation pattern: central
    // differences are meaningless for parameters whose +/-eps evaluations
    // land on different linear pieces, so those are skipped
    auto objective = [&](const std::vector<double>& params) {
        RemWeights wc = w;
        wc.unpack_params(params);
        RemForwardCache cache;
        Grid out = rem_forward(pv, wc, RemMode::train, &cache);
        double acc = 0.0;
        for (size_t i = 0; i < out.data.size(); ++i) acc += coeff.data[i] * out.data[i];
        uint64_t h = 1469598103934665603ULL;
        for (const auto& pre : cache.pre_act)
            for (double v : pre.data) {
                h ^= v > 0.0 ? 0x9e3779b97f4a7c15ULL : 0x2545f4914f6cdd1dULL;
                h *= 1099511628211ULL;
            }
        return std::pair<double, uint64_t>(acc, h);
    };

    RemWeights wc = w;
    RemForwardCache cache;
    rem_forward(pv, wc, RemMode::train, &cache);
    RemGrads grads;
    rem_backward(coeff, wc, cache, grads);
    std::vector<double> analytic;
    grads.pack(analytic);

    std::vector<double> p0;
    w.pack_params(p0);
    require(analytic.size() == p0.size(), "ShapeMismatch", "gradient packing layout");

    // tensor extents in packed order, to spread the subsample over layers
    std::vector<size_t> bounds;
    size_t off = 0;
    for (const auto& c : w.conv) {
        off += c.kernel.size();
        bounds.push_back(off);
        off += c.bias.size();
        bounds.push_back(off);
    }
    for (const auto& b : w.bn) {
        off += b.gamma.size();
        bounds.push_back(off);
        off += b.beta.size();
        bounds.push_back(off);
    }

    std::vector<size_t> indices;
    if (all_params) {
        indices.resize(p0.size());
        std::iota(indices.begin(), indices.end(), size_t{0});
    } else {
        size_t start = 0;
        for (size_t end : bounds) {
            size_t n = end - start;
            size_t take = std::min<size_t>(n, 12);
            for (size_t t = 0; t < take; ++t)
                indices.push_back(start + t * n / take);
            start = end;
        }
    }

    double max_err = 0.0;
    uint64_t h0 = objective(p0).second;
    for (size_t idx : indices) {
        std::vector<double> p = p0;
        p[idx] = p0[idx] + eps;
        auto [fp, hp] = objective(p);
        p[idx] = p0[idx] - eps;
        auto [fm, hm] = objective(p);
        if (hp != h0 || hm != h0) continue; // crossed a rectifier kink
        double numeric = (fp - fm) / (2.0 * eps);
        max_err = std::max(max_err, rel_err(analytic[idx], numeric));
    }
    return max_err;
}

double grad_check_features(uint64_t seed, double eps) {
    SceneSpec spec;
    spec.width = 16;
    spec.height = 16;
    spec.num_views = 3;
    spec.focal = 24.0;
    spec.baseline = 60.0;
    spec.kind = GeometryKind::slanted_plane;
    spec.plane_depth = 600.0;
    spec.slant_x = 0.2;
    spec.texture_seed = seed;
    Scene scene = generate_scene(spec, seed);

    Rng rng(seed ^ 0xfeed);
    int channels = 6;
    FeatureWeights fw = FeatureWeights::init(channels, rng);
    int planes = 6;
    double alpha = 1.0;

    std::vector<Grid> quarters;
    for (const auto& img : scene.images)
        quarters.push_back(box_downsample2(box_downsample2(img)));
    std::vector<FeatureMap> banks;
    for (const auto& q : quarters) banks.push_back(fixed_feature_bank(q));

    std::vector<CameraParams> cams_q;
    for (const auto& c : scene.cams) cams_q.push_back(c.scaled(0.25));
    DepthHypotheses hyps = uniform_hypotheses(quarters[0].width, quarters[0].height,
                                              spec.depth_min, spec.depth_max(), planes);
    Grid gt1 = downsample_gt(scene.gt_depth, 4);
    RegularizeOptions reg;
    // fixed, soft temperature: the runtime default sharpens the softmax to
    // near-one-hot, whose exponent curvature swamps central differences
    // (the data-driven temperature path has its own finite-difference test)
    reg.fixed_temperature = 0.05;

    auto forward = [&](const FeatureWeights& weights, RegularizeCache* regc,
                       CostVolumeCache* cvc, MaskedLoss* ml_out, Grid* mask_out,
                       Grid* depth_out) {
        uint64_t h = 1469598103934665603ULL;
        std::vector<FeatureMap> feats;
        for (const auto& bank : banks) {
            FeatureMap f = weights.conv[0].forward(bank);
            for (double& v : f.data) {
                h ^= v > 0.0 ? 0x9e3779b97f4a7c15ULL : 0x2545f4914f6cdd1dULL;
                h *= 1099511628211ULL;
                v = leaky_relu(v, weights.leaky_slope);
            }
            feats.push_back(std::move(f));
        }
        std::vector<FeatureMap> srcs(feats.begin() + 1, feats.end());
        std::vector<CameraParams> scams(cams_q.begin() + 1, cams_q.end());
        CostVolume cv =
            build_cost_volume(feats[0], srcs, cams_q[0], scams, hyps, 1, cvc);
        RegularizeCache local;
        RegularizeCache& rc = regc ? *regc : local;
        ProbabilityVolume pv = regularize(cv, reg, &rc);
        Grid depth = soft_argmin(pv, hyps);
        Grid mask(depth.width, depth.height, 0.0);
        for (size_t i = 0; i < mask.data.size(); ++i)
            if (gt1.data[i] > 0.0 && pv.valid.data[i] > 0.0) mask.data[i] = 1.0;
        // penalty branch (quadratic vs linear) is part of the piece pattern
        for (size_t i = 0; i < mask.data.size(); ++i) {
            if (mask.data[i] <= 0.0) continue;
            bool quad = std::abs(depth.data[i] - gt1.data[i]) < 1.0;
            h ^= quad ? 0xa0761d6478bd642fULL : 0xe7037ed1a0b428dbULL;
            h *= 1099511628211ULL;
        }
        MaskedLoss ml = smooth_l1(depth, gt1, mask);
        if (ml_out) *ml_out = ml;
        if (mask_out) *mask_out = mask;
        if (depth_out) *depth_out = depth;
        return std::pair<double, uint64_t>(alpha * ml.value, h);
    };

    // recenter the ground truth near the unperturbed prediction: it keeps
    // the penalty in its quadratic piece and the objective's dynamic range
    // small enough for central differences to resolve weak parameters
    {
        Grid depth0;
        forward(fw, nullptr, nullptr, nullptr, nullptr, &depth0);
        for (size_t i = 0; i < gt1.data.size(); ++i) {
            if (gt1.data[i] <= 0.0) continue;
            double off = rng.uniform(0.3, 0.8) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
            gt1.data[i] = depth0.data[i] + off;
        }
    }

    // analytic gradient for the quarter-scale head
    RegularizeCache regc;
    CostVolumeCache cvc;
    MaskedLoss ml;
    Grid mask, depth;
    forward(fw, &regc, &cvc, &ml, &mask, &depth);
    Grid gd = stage_loss_depth_grad(depth, gt1, mask, alpha, ml.count);
    Volume gcost = soft_argmin_regularize_backward(gd, regc, hyps);
    std::vector<FeatureMap> feats;
    for (const auto& bank : banks) {
        FeatureMap f = fw.conv[0].forward(bank);
        for (double& v : f.data) v = leaky_relu(v, fw.leaky_slope);
        feats.push_back(std::move(f));
    }
    std::vector<FeatureMap> srcs(feats.begin() + 1, feats.end());
    FeatureMap grad_ref;
    std::vector<FeatureMap> grad_srcs;
    cost_volume_backward(gcost, feats[0], srcs, cvc, grad_ref, grad_srcs);

    size_t nk = fw.conv[0].kernel.size(), nb = fw.conv[0].bias.size();
    std::vector<double> analytic(nk + nb, 0.0);
    for (size_t v = 0; v < banks.size(); ++v) {
        const FeatureMap& g_feat = v == 0 ? grad_ref : grad_srcs[v - 1];
        FeatureMap conv_out = fw.conv[0].forward(banks[v]);
        FeatureMap g_pre = g_feat;
        for (size_t i = 0; i < g_pre.data.size(); ++i)
            g_pre.data[i] *= leaky_relu_grad(conv_out.data[i], fw.leaky_slope);
        std::vector<double> gk, gb;
        fw.conv[0].backward(banks[v], g_pre, gk, gb, nullptr);
        for (size_t i = 0; i < nk; ++i) analytic[i] += gk[i];
        for (size_t i = 0; i < nb; ++i) analytic[nk + i] += gb[i];
    }

    double max_err = 0.0;
    uint64_t h0 = forward(fw, nullptr, nullptr, nullptr, nullptr, nullptr).second;
    for (size_t idx = 0; idx < nk + nb; ++idx) {
        FeatureWeights wp = fw;
        double* slot = idx < nk ? &wp.conv[0].kernel[idx] : &wp.conv[0].bias[idx - nk];
        *slot += eps;
        auto [fp, hp] = forward(wp, nullptr, nullptr, nullptr, nullptr, nullptr);
        *slot -= 2.0 * eps;
        auto [fm, hm] = forward(wp, nullptr, nullptr, nullptr, nullptr, nullptr);
        if (hp != h0 || hm != h0) continue; // crossed a rectifier kink
        double numeric = (fp - fm) / (2.0 * eps);
        max_err = std::max(max_err, rel_err(analytic[idx], numeric));
    }
    return max_err;
}

double grad_check_refined_wrt_uncertainty(uint64_t seed, double eps) {
    Rng rng(seed);
    int W = 12, H = 12, D = 6;
    double scene_lo = 300.0, scene_hi = 1100.0;
    double lambda = 1.5, beta = 0.05, r_prev_len = 60.0;

    Grid lo(W, H), hi(W, H);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            double a = rng.uniform(430.0, 700.0);
            lo.at(x, y) = a;
            hi.at(x, y) = a + rng.uniform(30.0, 60.0);
        }
    DepthHypotheses hyps = per_pixel_hypotheses(lo, hi, D);

    ProbabilityVolume pv;
    pv.p = Volume(W, H, D);
    pv.valid = Grid(W, H, 1.0);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            double sum = 0.0;
            for (int j = 0; j < D; ++j) {
                double v = rng.uniform(0.05, 1.0);
                pv.p.at(x, y, j) = v;
                sum += v;
            }
            for (int j = 0; j < D; ++j) pv.p.at(x, y, j) /= sum;
        }

    Grid depth = soft_argmin(pv, hyps);
    Grid unc(W, H);
    for (double& v : unc.data) v = rng.uniform(0.1, 0.6);
    Grid r_prev(W, H, r_prev_len);
    double tau = 20.0;

    // ground truth sits inside the smooth-L1 quadratic region, bounded away
    // from both the curvature kink at |r| = 1 and the zero-gradient point,
    // so central differences resolve the analytic value
    Grid gt(W, H, 0.0);
    {
        DepthRangeMap rm0 = dynamic_range(depth, unc, lambda, r_prev, scene_lo,
                                          scene_hi, 5.0);
        RefinedDistribution rd0 = clamp_refine(hyps, pv, rm0, ClampMode::soft, tau);
        DepthWithMask rdm0 = refined_depth(rd0);
        for (size_t i = 0; i < gt.data.size(); ++i) {
            double off = rng.uniform(0.3, 0.8) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
            gt.data[i] = rdm0.depth.data[i] + off;
        }
    }

    auto objective = [&](const Grid& c, RefinedDistribution* rd_out,
                         DepthRangeMap* rm_out, Grid* mask_out) {
        DepthRangeMap rm = dynamic_range(depth, c, lambda, r_prev, scene_lo, scene_hi,
                                         5.0);
        RefinedDistribution rd = clamp_refine(hyps, pv, rm, ClampMode::soft, tau);
        DepthWithMask rdm = refined_depth(rd);
        Grid mask = rdm.mask;
        MaskedLoss ml = smooth_l1(rdm.depth, gt, mask);
        if (rd_out) *rd_out = rd;
        if (rm_out) *rm_out = rm;
        if (mask_out) *mask_out = mask;
        return beta * ml.value;
    };

    RefinedDistribution rd;
    DepthRangeMap rm;
    Grid mask;
    objective(unc, &rd, &rm, &mask);
    RangeGrad rg = refined_loss_backward(rd, gt, mask, beta);
    Grid analytic = range_grad_to_uncertainty(rg, rm, r_prev, lambda);

    double max_err = 0.0;
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            Grid c = unc;
            c.at(x, y) = unc.at(x, y) + eps;
            double fp = objective(c, nullptr, nullptr, nullptr);
            c.at(x, y) = unc.at(x, y) - eps;
            double fm = objective(c, nullptr, nullptr, nullptr);
            double numeric = (fp - fm) / (2.0 * eps);
            max_err = std::max(max_err, rel_err(analytic.at(x, y), numeric));
        }
    }
    return max_err;
}

double grad_check_hypo_path(uint64_t seed, double eps) {
    Rng rng(seed);
    int Wc = 6, Hc = 6, D = 5;
    int Wf = 2 * Wc, Hf = 2 * Hc;
    double scene_lo = 300.0, scene_hi = 1200.0;
    double lambda = 1.5, alpha = 1.0, r_prev_len = 150.0;

    Grid depth1(Wc, Hc);
    for (double& v : depth1.data) v = rng.uniform(500.0, 700.0);
    Grid unc(Wc, Hc);
    for (double& v : unc.data) v = rng.uniform(0.05, 0.6);
    Grid r_prev(Wc, Hc, r_prev_len);

    Volume p2(Wf, Hf, D);
    for (int y = 0; y < Hf; ++y)
        for (int x = 0; x < Wf; ++x) {
            double sum = 0.0;
            for (int j = 0; j < D; ++j) {
                double v = rng.uniform(0.05, 1.0);
                p2.at(x, y, j) = v;
                sum += v;
            }
            for (int j = 0; j < D; ++j) p2.at(x, y, j) /= sum;
        }

    auto depth2_of = [&](const Grid& c, DepthRangeMap* rm_out) {
        DepthRangeMap rm = dynamic_range(depth1, c, lambda, r_prev, scene_lo, scene_hi,
                                         5.0);
        DepthRangeMap used = upsample2_range(rm);
        DepthHypotheses hyps = per_pixel_hypotheses(used.dmin, used.dmax, D);
        Grid d2(Wf, Hf);
        for (int y = 0; y < Hf; ++y)
            for (int x = 0; x < Wf; ++x) {
                double acc = 0.0;
                for (int j = 0; j < D; ++j) acc += p2.at(x, y, j) * hyps.depths.at(x, y, j);
                d2.at(x, y) = acc;
            }
        if (rm_out) *rm_out = rm;
        return d2;
    };

    DepthRangeMap rm;
    Grid d2 = depth2_of(unc, &rm);
    // inside the quadratic region of the penalty (see the refined check)
    Grid gt2(Wf, Hf);
    for (size_t i = 0; i < gt2.data.size(); ++i)
        gt2.data[i] = d2.data[i] + rng.uniform(-0.8, 0.8);
    Grid mask(Wf, Hf, 1.0);

    auto objective = [&](const Grid& c) {
        Grid d = depth2_of(c, nullptr);
        return alpha * smooth_l1(d, gt2, mask).value;
    };

    MaskedLoss ml = smooth_l1(d2, gt2, mask);
    Grid gd = stage_loss_depth_grad(d2, gt2, mask, alpha, ml.count);
    RangeGrad rg = hypo_path_range_grad(gd, p2, Wc, Hc);
    Grid analytic = range_grad_to_uncertainty(rg, rm, r_prev, lambda);

    double max_err = 0.0;
    for (int y = 0; y < Hc; ++y) {
        for (int x = 0; x < Wc; ++x) {
            Grid c = unc;
            c.at(x, y) = unc.at(x, y) + eps;
            double fp = objective(c);
            c.at(x, y) = unc.at(x, y) - eps;
            double fm = objective(c);
            double numeric = (fp - fm) / (2.0 * eps);
            max_err = std::max(max_err, rel_err(analytic.at(x, y), numeric));
        }
    }
    return max_err;
}

} // namespace mvsweep
