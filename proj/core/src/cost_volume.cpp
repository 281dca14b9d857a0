#include "mvsweep/cost_volume.hpp"

#include <algorithm>
#include <cmath>

#include "mvsweep/parallel.hpp"

namespace mvsweep {

namespace {

struct BilinearTaps {
    int x0 = 0, y0 = 0;
    double fx = 0.0, fy = 0.0;
};

// True when every nonzero-weight tap lies inside the raster; integer
// coordinates therefore stay valid on the last row/column.
inline bool bilinear_prepare(double sx, double sy, int W, int H, BilinearTaps& t) {
    t.x0 = static_cast<int>(std::floor(sx));
    t.y0 = static_cast<int>(std::floor(sy));
    t.fx = sx - t.x0;
    t.fy = sy - t.y0;
    if (t.x0 < 0 || t.y0 < 0) return false;
    int x_hi = t.fx > 0.0 ? t.x0 + 1 : t.x0;
    int y_hi = t.fy > 0.0 ? t.y0 + 1 : t.y0;
    return x_hi < W && y_hi < H;
}

inline double bilinear_value(const double* plane, int W, int H, const BilinearTaps& t) {
    int x1 = std::min(t.x0 + 1, W - 1);
    int y1 = std::min(t.y0 + 1, H - 1);
    double w00 = (1.0 - t.fx) * (1.0 - t.fy);
    double w10 = t.fx * (1.0 - t.fy);
    double w01 = (1.0 - t.fx) * t.fy;
    double w11 = t.fx * t.fy;
    return w00 * plane[static_cast<size_t>(t.y0) * W + t.x0] +
           w10 * plane[static_cast<size_t>(t.y0) * W + x1] +
           w01 * plane[static_cast<size_t>(y1) * W + t.x0] +
           w11 * plane[static_cast<size_t>(y1) * W + x1];
}

// Scatter counterpart of bilinear_value.
inline void bilinear_scatter(double* plane, int W, int H, const BilinearTaps& t,
                             double g) {
    int x1 = std::min(t.x0 + 1, W - 1);
    int y1 = std::min(t.y0 + 1, H - 1);
    plane[static_cast<size_t>(t.y0) * W + t.x0] += (1.0 - t.fx) * (1.0 - t.fy) * g;
    plane[static_cast<size_t>(t.y0) * W + x1] += t.fx * (1.0 - t.fy) * g;
    plane[static_cast<size_t>(y1) * W + t.x0] += (1.0 - t.fx) * t.fy * g;
    plane[static_cast<size_t>(y1) * W + x1] += t.fx * t.fy * g;
}

// Number of window offsets in [-r, r] that reach index e from window center
// w under replicate clamping.
inline int clamp_multiplicity(int e, int w, int n, int r) {
    if (n == 1) return 2 * r + 1;
    if (e == 0) {
        int hi = std::min(r, -w);
        return hi >= -r ? hi + r + 1 : 0;
    }
    if (e == n - 1) {
        int hi = std::min(r, w - (n - 1));
        return hi >= -r ? hi + r + 1 : 0;
    }
    return std::abs(e - w) <= r ? 1 : 0;
}

} // namespace

DepthHypotheses uniform_hypotheses(int width, int height, double low, double high,
                                   int count) {
    std::vector<double> planes = sample_depth_planes(low, high, count);
    DepthHypotheses h;
    h.depths = Volume(width, height, count);
    for (int j = 0; j < count; ++j) {
        double d = planes[static_cast<size_t>(j)];
        double* p = h.depths.data.data() + static_cast<size_t>(j) * height * width;
        std::fill(p, p + static_cast<size_t>(height) * width, d);
    }
    return h;
}

DepthHypotheses per_pixel_hypotheses(const Grid& dmin, const Grid& dmax, int count) {
    require(dmin.same_shape(dmax), "ShapeMismatch", "range bounds differ in shape");
    require(count >= 1, "ZeroCount", "plane count must be >= 1");
    DepthHypotheses h;
    h.depths = Volume(dmin.width, dmin.height, count);
    for (int y = 0; y < dmin.height; ++y) {
        for (int x = 0; x < dmin.width; ++x) {
            double lo = dmin.at(x, y), hi = dmax.at(x, y);
            if (hi < lo) fail("EmptyRange", "per-pixel range with max < min");
            if (count == 1) {
                h.depths.at(x, y, 0) = 0.5 * (lo + hi);
                continue;
            }
            if (!(lo < hi)) fail("EmptyRange", "degenerate per-pixel range");
            double step = (hi - lo) / (count - 1);
            for (int j = 0; j < count; ++j) h.depths.at(x, y, j) = lo + step * j;
            h.depths.at(x, y, count - 1) = hi;
        }
    }
    return h;
}

WarpResult warp_feature(const FeatureMap& src, const Homography3x3& H, int threads) {
    WarpResult out;
    out.feat = FeatureMap(src.width, src.height, src.channels, 0.0);
    out.mask = Grid(src.width, src.height, 0.0);
    int W = src.width, Hh = src.height;
    parallel_for(0, Hh, threads, [&](int y) {
        for (int x = 0; x < W; ++x) {
            double u = H.m[0] * x + H.m[1] * y + H.m[2];
            double v = H.m[3] * x + H.m[4] * y + H.m[5];
            double w = H.m[6] * x + H.m[7] * y + H.m[8];
            if (w <= 1e-12) continue;
            BilinearTaps t;
            if (!bilinear_prepare(u / w, v / w, W, Hh, t)) continue;
            for (int c = 0; c < src.channels; ++c)
                out.feat.at(x, y, c) = bilinear_value(src.plane(c), W, Hh, t);
            out.mask.at(x, y) = 1.0;
        }
    });
    return out;
}

CostVolume build_cost_volume(const FeatureMap& ref_feat,
                             std::span<const FeatureMap> src_feats,
                             const CameraParams& ref_cam,
                             std::span<const CameraParams> src_cams,
                             const DepthHypotheses& hyps, int threads,
                             CostVolumeCache* cache) {
    if (src_feats.empty()) fail("NoSourceViews", "need at least one source view");
    require(src_feats.size() == src_cams.size(), "ShapeMismatch",
            "source feature/camera count mismatch");
    for (const auto& f : src_feats)
        require(f.same_shape(ref_feat), "ShapeMismatch", "feature shapes differ");
    require(hyps.width() == ref_feat.width && hyps.height() == ref_feat.height,
            "ShapeMismatch", "hypothesis grid does not match features");

    int W = ref_feat.width, H = ref_feat.height, D = hyps.planes();
    int C = ref_feat.channels;
    int V = static_cast<int>(src_feats.size());

    std::vector<SweepHomography> sweeps;
    sweeps.reserve(static_cast<size_t>(V));
    for (const auto& cam : src_cams)
        sweeps.push_back(SweepHomography::between(ref_cam, cam));

    CostVolume cv;
    cv.cost = Volume(W, H, D, 0.0);
    cv.mask = Volume(W, H, D, 0.0);
    if (cache) {
        cache->num_src = V;
        cache->warped.assign(static_cast<size_t>(D) * V, FeatureMap(W, H, C, 0.0));
        cache->wmask.assign(static_cast<size_t>(D) * V, Grid(W, H, 0.0));
        cache->sx.assign(static_cast<size_t>(D) * V, Grid(W, H, 0.0));
        cache->sy.assign(static_cast<size_t>(D) * V, Grid(W, H, 0.0));
    }

    parallel_for(0, H, threads, [&](int y) {
        std::vector<double> sum(static_cast<size_t>(C));
        std::vector<double> sumsq(static_cast<size_t>(C));
        std::vector<double> vals(static_cast<size_t>(C));
        for (int j = 0; j < D; ++j) {
            for (int x = 0; x < W; ++x) {
                double d = hyps.depths.at(x, y, j);
                // accumulate deviations from the reference value so that
                // identical views produce an exact zero variance
                for (int c = 0; c < C; ++c) {
                    sum[static_cast<size_t>(c)] = 0.0;
                    sumsq[static_cast<size_t>(c)] = 0.0;
                }
                int valid = 0;
                for (int i = 0; i < V; ++i) {
                    const SweepHomography& sw = sweeps[static_cast<size_t>(i)];
                    double inv_d = 1.0 / d;
                    double u = (sw.A(0, 0) - sw.B(0, 0) * inv_d) * x +
                               (sw.A(0, 1) - sw.B(0, 1) * inv_d) * y +
                               (sw.A(0, 2) - sw.B(0, 2) * inv_d);
                    double v = (sw.A(1, 0) - sw.B(1, 0) * inv_d) * x +
                               (sw.A(1, 1) - sw.B(1, 1) * inv_d) * y +
                               (sw.A(1, 2) - sw.B(1, 2) * inv_d);
                    double w = (sw.A(2, 0) - sw.B(2, 0) * inv_d) * x +
                               (sw.A(2, 1) - sw.B(2, 1) * inv_d) * y +
                               (sw.A(2, 2) - sw.B(2, 2) * inv_d);
                    if (w <= 1e-12) continue;
                    double sx = u / w, sy = v / w;
                    BilinearTaps t;
                    if (!bilinear_prepare(sx, sy, W, H, t)) continue;
                    const FeatureMap& sf = src_feats[static_cast<size_t>(i)];
                    for (int c = 0; c < C; ++c) {
                        double vc = bilinear_value(sf.plane(c), W, H, t);
                        vals[static_cast<size_t>(c)] = vc;
                        double dev = vc - ref_feat.at(x, y, c);
                        sum[static_cast<size_t>(c)] += dev;
                        sumsq[static_cast<size_t>(c)] += dev * dev;
                    }
                    ++valid;
                    if (cache) {
                        size_t slot = static_cast<size_t>(j) * V + i;
                        for (int c = 0; c < C; ++c)
                            cache->warped[slot].at(x, y, c) = vals[static_cast<size_t>(c)];
                        cache->wmask[slot].at(x, y) = 1.0;
                        cache->sx[slot].at(x, y) = sx;
                        cache->sy[slot].at(x, y) = sy;
                    }
                }
                if (valid > 0) {
                    double n = 1.0 + valid;
                    double acc = 0.0;
                    for (int c = 0; c < C; ++c) {
                        double mean = sum[static_cast<size_t>(c)] / n;
                        double var = sumsq[static_cast<size_t>(c)] / n - mean * mean;
                        acc += var > 0.0 ? var : 0.0;
                    }
                    cv.cost.at(x, y, j) = acc / C;
                    cv.mask.at(x, y, j) = static_cast<double>(valid) / V;
                }
            }
        }
    });
    return cv;
}

ProbabilityVolume regularize(const CostVolume& cv, const RegularizeOptions& opts,
                             RegularizeCache* cache, int threads) {
    require(cv.cost.same_shape(cv.mask), "ShapeMismatch", "cost/mask shapes differ");
    if (opts.fixed_temperature < 0.0 ||
        (opts.fixed_temperature == 0.0 && opts.temp_scale <= 0.0))
        fail("NonPositiveTemperature", "temperature must be positive");
    require(opts.spatial_radius >= 0 && opts.depth_radius >= 0, "ShapeMismatch",
            "smoothing radii must be non-negative");

    int W = cv.cost.width, H = cv.cost.height, D = cv.cost.planes;
    int rs = opts.spatial_radius, rd = opts.depth_radius;

    // data-driven temperature from the raw masked mean (serial: the result
    // must not depend on the thread count)
    double mean_cost = 0.0;
    long evidence = 0;
    for (size_t i = 0; i < cv.cost.data.size(); ++i) {
        if (cv.mask.data[i] > 0.0) {
            mean_cost += cv.cost.data[i];
            ++evidence;
        }
    }
    mean_cost = evidence > 0 ? mean_cost / static_cast<double>(evidence) : 0.0;
    bool data_driven = opts.fixed_temperature == 0.0;
    double T;
    if (!data_driven) {
        T = opts.fixed_temperature;
    } else if (mean_cost > 0.0) {
        T = opts.temp_scale * mean_cost;
    } else {
        T = 1.0;            // all-zero costs: softmax is uniform for any T
        data_driven = false;
    }

    Volume smoothed(W, H, D, 0.0);
    Volume win_mask(W, H, D, 0.0);
    parallel_for(0, H, threads, [&](int y) {
        for (int j = 0; j < D; ++j) {
            for (int x = 0; x < W; ++x) {
                double num = 0.0, den = 0.0;
                for (int dj = -rd; dj <= rd; ++dj) {
                    int jj = std::clamp(j + dj, 0, D - 1);
                    for (int dy = -rs; dy <= rs; ++dy) {
                        int yy = std::clamp(y + dy, 0, H - 1);
                        for (int dx = -rs; dx <= rs; ++dx) {
                            int xx = std::clamp(x + dx, 0, W - 1);
                            double m = cv.mask.at(xx, yy, jj);
                            num += m * cv.cost.at(xx, yy, jj);
                            den += m;
                        }
                    }
                }
                win_mask.at(x, y, j) = den;
                smoothed.at(x, y, j) = den > 0.0 ? num / den : 0.0;
            }
        }
    });

    ProbabilityVolume pv;
    pv.p = Volume(W, H, D, 0.0);
    pv.valid = Grid(W, H, 0.0);
    parallel_for(0, H, threads, [&](int y) {
        for (int x = 0; x < W; ++x) {
            bool own_evidence = false;
            for (int j = 0; j < D; ++j)
                if (cv.mask.at(x, y, j) > 0.0) { own_evidence = true; break; }
            if (!own_evidence) {
                for (int j = 0; j < D; ++j) pv.p.at(x, y, j) = 1.0 / D;
                continue;
            }
            pv.valid.at(x, y) = 1.0;
            double max_logit = -1e300;
            for (int j = 0; j < D; ++j) {
                if (win_mask.at(x, y, j) <= 0.0) continue;
                max_logit = std::max(max_logit, -smoothed.at(x, y, j) / T);
            }
            double Z = 0.0;
            for (int j = 0; j < D; ++j) {
                if (win_mask.at(x, y, j) <= 0.0) continue;
                double e = std::exp(-smoothed.at(x, y, j) / T - max_logit);
                pv.p.at(x, y, j) = e;
                Z += e;
            }
            for (int j = 0; j < D; ++j) pv.p.at(x, y, j) /= Z;
        }
    });

    if (cache) {
        cache->raw_cost = cv.cost;
        cache->raw_mask = cv.mask;
        cache->smoothed = smoothed;
        cache->win_mask = win_mask;
        cache->p = pv.p;
        cache->valid = pv.valid;
        cache->temperature = T;
        cache->mean_cost = mean_cost;
        cache->evidence_count = evidence;
        cache->data_driven_temperature = data_driven;
        cache->opts = opts;
    }
    return pv;
}

Grid soft_argmin(const ProbabilityVolume& pv, const DepthHypotheses& hyps) {
    require(pv.p.same_shape(hyps.depths), "ShapeMismatch",
            "probability volume and hypotheses differ in shape");
    int W = pv.p.width, H = pv.p.height, D = pv.p.planes;
    Grid depth(W, H, 0.0);
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            double acc = 0.0;
            for (int j = 0; j < D; ++j) acc += pv.p.at(x, y, j) * hyps.depths.at(x, y, j);
            double lo = hyps.depths.at(x, y, 0), hi = hyps.depths.at(x, y, D - 1);
            depth.at(x, y) = std::clamp(acc, lo, hi);
        }
    }
    return depth;
}

Volume regularize_backward(const Volume& grad_p, const RegularizeCache& cache,
                           int threads) {
    require(grad_p.same_shape(cache.p), "ShapeMismatch", "probability grad shape");
    int W = grad_p.width, H = grad_p.height, D = grad_p.planes;
    int rs = cache.opts.spatial_radius, rd = cache.opts.depth_radius;
    double T = cache.temperature;

    // softmax backward -> gradient on smoothed costs; per-row temperature
    // partials are reduced in fixed row order afterwards
    Volume grad_smoothed(W, H, D, 0.0);
    std::vector<double> t_partial(static_cast<size_t>(H), 0.0);
    parallel_for(0, H, threads, [&](int y) {
        double tacc = 0.0;
        for (int x = 0; x < W; ++x) {
            if (cache.valid.at(x, y) <= 0.0) continue;
            double dot = 0.0;
            for (int j = 0; j < D; ++j) dot += cache.p.at(x, y, j) * grad_p.at(x, y, j);
            for (int j = 0; j < D; ++j) {
                if (cache.win_mask.at(x, y, j) <= 0.0) continue;
                double dl = cache.p.at(x, y, j) * (grad_p.at(x, y, j) - dot);
                grad_smoothed.at(x, y, j) = -dl / T;
                tacc += dl * cache.smoothed.at(x, y, j) / (T * T);
            }
        }
        t_partial[static_cast<size_t>(y)] = tacc;
    });
    double grad_T = 0.0;
    for (double v : t_partial) grad_T += v;

    // adjoint of the mask-weighted replicate-padded box filter (gather form)
    Volume grad_cost(W, H, D, 0.0);
    parallel_for(0, H, threads, [&](int y) {
        for (int j = 0; j < D; ++j) {
            for (int x = 0; x < W; ++x) {
                double m = cache.raw_mask.at(x, y, j);
                if (m <= 0.0) continue;
                double acc = 0.0;
                for (int wj = std::max(0, j - rd); wj <= std::min(D - 1, j + rd); ++wj) {
                    int mj = clamp_multiplicity(j, wj, D, rd);
                    if (mj == 0) continue;
                    for (int wy = std::max(0, y - rs); wy <= std::min(H - 1, y + rs); ++wy) {
                        int my = clamp_multiplicity(y, wy, H, rs);
                        if (my == 0) continue;
                        for (int wx = std::max(0, x - rs); wx <= std::min(W - 1, x + rs); ++wx) {
                            int mx = clamp_multiplicity(x, wx, W, rs);
                            if (mx == 0) continue;
                            double den = cache.win_mask.at(wx, wy, wj);
                            if (den <= 0.0) continue;
                            acc += static_cast<double>(mj) * my * mx *
                                   grad_smoothed.at(wx, wy, wj) / den;
                        }
                    }
                }
                grad_cost.at(x, y, j) = m * acc;
            }
        }
    });

    if (cache.data_driven_temperature && cache.evidence_count > 0) {
        double dT_dc = cache.opts.temp_scale / static_cast<double>(cache.evidence_count);
        for (size_t i = 0; i < grad_cost.data.size(); ++i)
            if (cache.raw_mask.data[i] > 0.0) grad_cost.data[i] += grad_T * dT_dc;
    }
    return grad_cost;
}

Volume soft_argmin_regularize_backward(const Grid& grad_depth,
                                       const RegularizeCache& cache,
                                       const DepthHypotheses& hyps, int threads) {
    require(grad_depth.width == cache.p.width && grad_depth.height == cache.p.height,
            "ShapeMismatch", "depth grad shape");
    Volume grad_p(cache.p.width, cache.p.height, cache.p.planes, 0.0);
    for (int y = 0; y < cache.p.height; ++y)
        for (int x = 0; x < cache.p.width; ++x) {
            double g = grad_depth.at(x, y);
            if (g == 0.0) continue;
            for (int j = 0; j < cache.p.planes; ++j)
                grad_p.at(x, y, j) = g * hyps.depths.at(x, y, j);
        }
    return regularize_backward(grad_p, cache, threads);
}

void cost_volume_backward(const Volume& grad_cost, const FeatureMap& ref_feat,
                          std::span<const FeatureMap> src_feats,
                          const CostVolumeCache& cache, FeatureMap& grad_ref,
                          std::vector<FeatureMap>& grad_srcs, int threads) {
    int W = ref_feat.width, H = ref_feat.height, C = ref_feat.channels;
    int V = cache.num_src;
    int D = grad_cost.planes;
    require(static_cast<int>(src_feats.size()) == V, "ShapeMismatch",
            "source count does not match cache");

    grad_ref = FeatureMap(W, H, C, 0.0);
    grad_srcs.assign(static_cast<size_t>(V), FeatureMap(W, H, C, 0.0));

    // reference gradients: each output pixel touches only its own row
    parallel_for(0, H, threads, [&](int y) {
        for (int j = 0; j < D; ++j) {
            for (int x = 0; x < W; ++x) {
                double g = grad_cost.at(x, y, j);
                if (g == 0.0) continue;
                int valid = 0;
                for (int i = 0; i < V; ++i)
                    if (cache.wmask[static_cast<size_t>(j) * V + i].at(x, y) > 0.0) ++valid;
                if (valid == 0) continue;
                double n = 1.0 + valid;
                double coef = g * 2.0 / (C * n);
                for (int c = 0; c < C; ++c) {
                    double sum = ref_feat.at(x, y, c);
                    for (int i = 0; i < V; ++i) {
                        size_t slot = static_cast<size_t>(j) * V + i;
                        if (cache.wmask[slot].at(x, y) > 0.0)
                            sum += cache.warped[slot].at(x, y, c);
                    }
                    double mean = sum / n;
                    grad_ref.at(x, y, c) += coef * (ref_feat.at(x, y, c) - mean);
                }
            }
        }
    });

    // source gradients: bilinear scatter, parallel over views so each grad
    // buffer has a single writer
    parallel_for(0, V, threads, [&](int i) {
        FeatureMap& gs = grad_srcs[static_cast<size_t>(i)];
        for (int j = 0; j < D; ++j) {
            size_t slot = static_cast<size_t>(j) * V + i;
            for (int y = 0; y < H; ++y) {
                for (int x = 0; x < W; ++x) {
                    if (cache.wmask[slot].at(x, y) <= 0.0) continue;
                    double g = grad_cost.at(x, y, j);
                    if (g == 0.0) continue;
                    int valid = 0;
                    for (int k = 0; k < V; ++k)
                        if (cache.wmask[static_cast<size_t>(j) * V + k].at(x, y) > 0.0)
                            ++valid;
                    double n = 1.0 + valid;
                    double coef = g * 2.0 / (C * n);
                    BilinearTaps t;
                    if (!bilinear_prepare(cache.sx[slot].at(x, y), cache.sy[slot].at(x, y),
                                          W, H, t))
                        continue;
                    for (int c = 0; c < C; ++c) {
                        double sum = ref_feat.at(x, y, c);
                        for (int k = 0; k < V; ++k) {
                            size_t sl = static_cast<size_t>(j) * V + k;
                            if (cache.wmask[sl].at(x, y) > 0.0)
                                sum += cache.warped[sl].at(x, y, c);
                        }
                        double mean = sum / n;
                        double dv = coef * (cache.warped[slot].at(x, y, c) - mean);
                        bilinear_scatter(gs.plane(c), W, H, t, dv);
                    }
                }
            }
        }
    });
}

} // namespace mvsweep
