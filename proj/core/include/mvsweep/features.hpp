#pragma once

#include <array>

#include "mvsweep/grid.hpp"
#include "mvsweep/nn.hpp"

namespace mvsweep {

// Per-scale 3x3 convolutions for the trainable extractor head. Scale index
// 0 = quarter, 1 = half, 2 = full resolution.
struct FeatureWeights {
    int channels = 8;
    std::array<Conv3x3, 3> conv;
    double leaky_slope = 0.1;

    static FeatureWeights init(int channels, Rng& rng);

    size_t param_count() const;
    void pack_params(std::vector<double>& out) const;
    void unpack_params(const std::vector<double>& in);
};

struct FeaturePyramid {
    FeatureMap quarter;
    FeatureMap half;
    FeatureMap full;
};

// 2x2 box-averaged half-size image; dimensions must be even.
Grid box_downsample2(const Grid& img);

// Fixed extractor: channels {intensity, horizontal gradient, vertical
// gradient, 5x5 local mean} at each scale, central differences and
// replicate borders. Throws BadDimensions unless W and H divide by 4.
FeaturePyramid extract_pyramid(const Grid& image, int threads = 1);

// Trainable extractor: fixed channels followed by one 3x3 convolution and
// a leaky rectifier per scale.
FeaturePyramid extract_pyramid(const Grid& image, const FeatureWeights& w,
                               int threads = 1);

// The fixed 4-channel bank for a single scale (exposed for the trainable
// head's backward pass).
FeatureMap fixed_feature_bank(const Grid& image, int threads = 1);

} // namespace mvsweep
