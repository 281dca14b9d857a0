#pragma once

#include <array>
#include <optional>
#include <vector>

#include "mvsweep/cost_volume.hpp"
#include "mvsweep/features.hpp"
#include "mvsweep/rem.hpp"

namespace mvsweep {

struct StageConfig {
    std::array<int, 3> planes{48, 32, 8};
    std::array<double, 2> lambda{1.5, 0.75}; // transitions 1->2 and 2->3
    std::array<RegularizeOptions, 3> reg{};
    int feature_channels = 8;
    bool trainable_features = false;
    double tau_factor = 0.5; // soft clamp width in units of the stage plane spacing

    static constexpr std::array<int, 3> divisors{4, 2, 1};
};

struct NetWeights {
    RemWeights rem1; // consumes stage-1 probability volumes (d_in = planes[0])
    RemWeights rem2; // consumes stage-2 probability volumes (d_in = planes[1])
    std::optional<FeatureWeights> features;

    static NetWeights init(const StageConfig& cfg, uint64_t seed);
};

// Interval policy between stages: learned uncertainty or a fixed shrink
// factor (new length = shrink_k * previous nominal length) as the baseline.
struct RangePolicy {
    enum class Kind { rem, fixed_shrink };
    Kind kind = Kind::rem;
    std::array<double, 2> shrink{0.5, 0.25};
};

struct CascadeOutput {
    std::array<Grid, 3> depth;
    std::array<Grid, 3> valid;
    std::array<Grid, 2> uncertainty;          // stages 1-2 (REM policy only)
    std::array<DepthRangeMap, 2> range;       // at the generating resolution
    std::array<DepthRangeMap, 2> range_used;  // upsampled, at the consuming resolution
    std::array<double, 3> mean_plane_spacing{};
    std::optional<std::array<Volume, 3>> prob;
};

// Per-stage internals kept alive for the training backward passes.
struct StageTrace {
    DepthHypotheses hyps;
    CostVolume cv;
    CostVolumeCache cvc; // filled only when feature gradients are requested
    RegularizeCache regc;
    ProbabilityVolume pv;
    Grid depth;
    RemForwardCache remc; // stages 1-2
    Grid uncertainty;
    Grid r_prev;
    DepthRangeMap rm;
    double snap_width = 0.0;
    double plane_spacing_mean = 0.0;
};

struct CascadeTrace {
    std::array<StageTrace, 3> stage;
    std::vector<FeaturePyramid> pyramids;
    std::vector<FeatureMap> fixed_banks_quarter; // conv inputs per view (feature training)
    std::vector<FeatureMap> fixed_banks_half;
    std::vector<FeatureMap> fixed_banks_full;
};

// 2x bilinear upsampling with the fine->coarse map x/2 (consistent with the
// per-stage intrinsic rescaling); `nearest` floors instead.
Grid upsample2(const Grid& in, bool nearest = false);
// Adjoint of the bilinear path: scatters fine-grid gradients to the coarse grid.
Grid upsample2_adjoint(const Grid& fine_grad);
DepthRangeMap upsample2_range(const DepthRangeMap& rm);

// Full three-stage cascade. Stage 1 sweeps [scene_lo, scene_hi] uniformly;
// later stages sample per-pixel intervals. Throws TooFewViews /
// BadDimensions / EmptyRange.
CascadeOutput run_cascade(const std::vector<Grid>& images,
                          const std::vector<CameraParams>& cams, double scene_lo,
                          double scene_hi, NetWeights& weights, const StageConfig& cfg,
                          const RangePolicy& policy, RemMode rem_mode, int threads,
                          bool retain_volumes = false, CascadeTrace* trace = nullptr,
                          bool need_feature_grads = false);

// Inference entry point (REM policy, eval-mode statistics).
CascadeOutput infer(const std::vector<Grid>& images,
                    const std::vector<CameraParams>& cams, double scene_lo,
                    double scene_hi, NetWeights& weights, const StageConfig& cfg,
                    int threads, bool retain_volumes = false);

// Fixed-shrink comparator with identical machinery.
CascadeOutput fixed_range_baseline(const std::vector<Grid>& images,
                                   const std::vector<CameraParams>& cams,
                                   double scene_lo, double scene_hi,
                                   NetWeights& weights, const StageConfig& cfg,
                                   const std::array<double, 2>& shrink_factors,
                                   int threads);

} // namespace mvsweep
