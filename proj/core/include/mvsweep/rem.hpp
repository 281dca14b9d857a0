#pragma once

#include <array>
#include <string>
#include <vector>

#include "mvsweep/cost_volume.hpp"
#include "mvsweep/grid.hpp"
#include "mvsweep/nn.hpp"

namespace mvsweep {

// Range estimation network: five 3x3 convolutions
// D_in -> 16 -> 32 -> 32 -> 16 -> 1, batch-norm + rectifier after the first
// four, sigmoid after the last. Consumes a probability volume whose planes
// act as input channels.
struct RemWeights {
    int d_in = 0;
    std::array<Conv3x3, 5> conv;
    std::array<BatchNorm, 4> bn;

    static constexpr std::array<int, 6> kChannels{0, 16, 32, 32, 16, 1};

    static RemWeights init(int d_in, Rng& rng);

    // learned parameters in declaration order (kernels, biases, then batch
    // norm scale/shift per layer); running statistics are state, not
    // parameters
    size_t param_count() const;
    void pack_params(std::vector<double>& out) const;
    void unpack_params(const std::vector<double>& in);
};

enum class RemMode {
    train,       // batch statistics; updates running estimates
    eval,        // running statistics
    linear_debug // eval statistics, rectifiers and sigmoid bypassed
};

struct RemForwardCache {
    RemMode mode = RemMode::train;
    int width = 0, height = 0;
    std::array<FeatureMap, 5> inputs;     // input of each conv layer
    std::array<FeatureMap, 4> conv_out;   // batch-norm inputs (eval modes only)
    std::array<FeatureMap, 4> pre_act;    // batch-norm outputs (rectifier inputs)
    std::array<BatchNorm::Cache, 4> bn;
    FeatureMap logits;                    // conv4 output
    Grid output;
};

struct RemGrads {
    std::array<std::vector<double>, 5> kernel;
    std::array<std::vector<double>, 5> bias;
    std::array<std::vector<double>, 4> gamma;
    std::array<std::vector<double>, 4> beta;

    void pack(std::vector<double>& out) const; // same order as RemWeights
};

// Uncertainty map in (0,1). Throws ChannelMismatch when the volume's plane
// count differs from d_in.
Grid rem_forward(const ProbabilityVolume& pv, RemWeights& w, RemMode mode,
                 RemForwardCache* cache = nullptr, int threads = 1);

// Exact gradients for every parameter and the input volume. Throws
// StaleCache when shapes disagree with the cache.
void rem_backward(const Grid& grad_out, const RemWeights& w,
                  const RemForwardCache& cache, RemGrads& grads,
                  Volume* grad_input = nullptr, int threads = 1);

// Checkpoint: magic "REMW", u32 version, u32 D_in, then per layer the
// kernel and bias as float32 in declaration order, then per batch-norm
// layer gamma, beta, running mean, running variance.
void save_rem_checkpoint(const std::string& path, const RemWeights& w);
RemWeights load_rem_checkpoint(const std::string& path);

// Per-pixel depth interval [dmin, dmax] with clip bookkeeping for the
// backward pass.
struct DepthRangeMap {
    Grid dmin;
    Grid dmax;
    Grid raw_len;  // pre-clip interval length 2*lambda*C*R_prev
    Grid clip_lo;  // 1 where the lower bound was clipped (or snapped)
    Grid clip_hi;
};

// half(x) = lambda * C(x) * R_prev(x); interval centered on depth, clipped
// to the scene range; an emptied interval snaps to snap_width at the
// nearest in-range point. Throws NonPositiveLambda.
DepthRangeMap dynamic_range(const Grid& depth, const Grid& uncertainty, double lambda,
                            const Grid& prev_range_len, double scene_lo, double scene_hi,
                            double snap_width);

} // namespace mvsweep
