#pragma once

#include <span>
#include <vector>

#include "mvsweep/geometry.hpp"
#include "mvsweep/grid.hpp"

namespace mvsweep {

// Per-pixel ordered depth planes L_{k,j}; ascending along the plane axis.
struct DepthHypotheses {
    Volume depths;

    int width() const { return depths.width; }
    int height() const { return depths.height; }
    int planes() const { return depths.planes; }
};

// Uniform planes shared by every pixel (first sweep stage).
DepthHypotheses uniform_hypotheses(int width, int height, double low, double high,
                                   int count);

// Per-pixel planes sampled inside [dmin(x), dmax(x)].
DepthHypotheses per_pixel_hypotheses(const Grid& dmin, const Grid& dmax, int count);

struct WarpResult {
    FeatureMap feat;
    Grid mask; // 1 where every nonzero-weight bilinear tap was in bounds
};

// Bilinear warp of src by the pixel map H (output pixel -> source pixel).
// Out-of-bounds samples yield 0 with mask 0.
WarpResult warp_feature(const FeatureMap& src, const Homography3x3& H, int threads = 1);

struct CostVolume {
    Volume cost; // >= 0, mean-over-channels view variance
    Volume mask; // fraction of source views sampled in bounds
};

// Cached per-(plane, source) warps for the feature-gradient backward pass.
struct CostVolumeCache {
    int num_src = 0;
    std::vector<FeatureMap> warped; // index j * num_src + i
    std::vector<Grid> wmask;
    std::vector<Grid> sx;
    std::vector<Grid> sy;
};

// Variance aggregation over the reference view plus every source whose warp
// landed in bounds; per-pixel homographies follow H(d) = A - B/d.
CostVolume build_cost_volume(const FeatureMap& ref_feat,
                             std::span<const FeatureMap> src_feats,
                             const CameraParams& ref_cam,
                             std::span<const CameraParams> src_cams,
                             const DepthHypotheses& hyps, int threads = 1,
                             CostVolumeCache* cache = nullptr);

struct RegularizeOptions {
    int spatial_radius = 1;
    int depth_radius = 1;
    double temp_scale = 0.05;  // T = temp_scale * mean masked cost
    double fixed_temperature = 0.0; // > 0 overrides the data-driven temperature
};

struct ProbabilityVolume {
    Volume p;
    Grid valid; // 0 where no source view ever landed in bounds (uniform rows)
};

struct RegularizeCache {
    Volume raw_cost;
    Volume raw_mask;
    Volume smoothed;
    Volume win_mask; // window mask sums; 0 marks excluded (no-evidence) planes
    Volume p;
    Grid valid;
    double temperature = 0.0;
    double mean_cost = 0.0;
    long evidence_count = 0;
    bool data_driven_temperature = true;
    RegularizeOptions opts;
};

// Mask-weighted box smoothing over a (2r_s+1)^2 x (2r_d+1) window with
// replicate padding, then a tempered softmax of -cost/T along the plane
// axis. Throws NonPositiveTemperature.
ProbabilityVolume regularize(const CostVolume& cv, const RegularizeOptions& opts,
                             RegularizeCache* cache = nullptr, int threads = 1);

// Expected depth under pv (Eq.-style soft argmin); clamped to the per-pixel
// hypothesis extrema. Throws ShapeMismatch.
Grid soft_argmin(const ProbabilityVolume& pv, const DepthHypotheses& hyps);

// dL/d(probabilities) -> dL/d(raw cost), through the softmax, the
// data-driven temperature and the mask-weighted smoothing.
Volume regularize_backward(const Volume& grad_p, const RegularizeCache& cache,
                           int threads = 1);

// dL/d(depth map) -> dL/d(raw cost) for soft_argmin(regularize(cv), hyps).
Volume soft_argmin_regularize_backward(const Grid& grad_depth,
                                       const RegularizeCache& cache,
                                       const DepthHypotheses& hyps, int threads = 1);

// dL/d(cost) -> gradients of the reference and source feature maps through
// the variance aggregation and the cached bilinear warps.
void cost_volume_backward(const Volume& grad_cost, const FeatureMap& ref_feat,
                          std::span<const FeatureMap> src_feats,
                          const CostVolumeCache& cache, FeatureMap& grad_ref,
                          std::vector<FeatureMap>& grad_srcs, int threads = 1);

} // namespace mvsweep
