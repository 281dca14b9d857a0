#include "mvsweep/features.hpp"

#include <cmath>

#include "mvsweep/error.hpp"
#include "mvsweep/parallel.hpp"

namespace mvsweep {

namespace {

inline int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

void check_divisible(const Grid& image) {
    if (image.width <= 0 || image.height <= 0 || image.width % 4 != 0 ||
        image.height % 4 != 0)
        fail("BadDimensions", "image width and height must be divisible by 4");
}

FeatureMap apply_head(const FeatureMap& fixed, const Conv3x3& conv, double slope,
                      int threads) {
    FeatureMap out = conv.forward(fixed, threads);
    for (double& v : out.data) v = leaky_relu(v, slope);
    return out;
}

} // namespace

FeatureWeights FeatureWeights::init(int channels, Rng& rng) {
    FeatureWeights w;
    w.channels = channels;
    for (auto& c : w.conv) {
        c = Conv3x3(4, channels);
        c.init_he(rng);
    }
    return w;
}

size_t FeatureWeights::param_count() const {
    size_t n = 0;
    for (const auto& c : conv) n += c.kernel.size() + c.bias.size();
    return n;
}

void FeatureWeights::pack_params(std::vector<double>& out) const {
    out.clear();
    out.reserve(param_count());
    for (const auto& c : conv) {
        out.insert(out.end(), c.kernel.begin(), c.kernel.end());
        out.insert(out.end(), c.bias.begin(), c.bias.end());
    }
}

void FeatureWeights::unpack_params(const std::vector<double>& in) {
    size_t pos = 0;
    for (auto& c : conv) {
        require(pos + c.kernel.size() + c.bias.size() <= in.size(), "ShapeMismatch",
                "feature parameter vector too short");
        std::copy(in.begin() + static_cast<long>(pos),
                  in.begin() + static_cast<long>(pos + c.kernel.size()), c.kernel.begin());
        pos += c.kernel.size();
        std::copy(in.begin() + static_cast<long>(pos),
                  in.begin() + static_cast<long>(pos + c.bias.size()), c.bias.begin());
        pos += c.bias.size();
    }
    require(pos == in.size(), "ShapeMismatch", "feature parameter vector too long");
}

Grid box_downsample2(const Grid& img) {
    require(img.width % 2 == 0 && img.height % 2 == 0, "BadDimensions",
            "box downsample requires even dimensions");
    Grid out(img.width / 2, img.height / 2);
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x)
            out.at(x, y) = 0.25 * (img.at(2 * x, 2 * y) + img.at(2 * x + 1, 2 * y) +
                                   img.at(2 * x, 2 * y + 1) + img.at(2 * x + 1, 2 * y + 1));
    return out;
}

FeatureMap fixed_feature_bank(const Grid& image, int threads) {
    int W = image.width, H = image.height;
    FeatureMap f(W, H, 4);
    parallel_for(0, H, threads, [&](int y) {
        for (int x = 0; x < W; ++x) {
            double c = image.at(x, y);
            // central differences with replicate borders
            double gx = 0.5 * (image.at(clampi(x + 1, 0, W - 1), y) -
                               image.at(clampi(x - 1, 0, W - 1), y));
            double gy = 0.5 * (image.at(x, clampi(y + 1, 0, H - 1)) -
                               image.at(x, clampi(y - 1, 0, H - 1)));
            double mean = 0.0;
            for (int dy = -2; dy <= 2; ++dy)
                for (int dx = -2; dx <= 2; ++dx)
                    mean += image.at(clampi(x + dx, 0, W - 1), clampi(y + dy, 0, H - 1));
            mean /= 25.0;
            f.at(x, y, 0) = c;
            f.at(x, y, 1) = gx;
            f.at(x, y, 2) = gy;
            f.at(x, y, 3) = mean;
        }
    });
    return f;
}

FeaturePyramid extract_pyramid(const Grid& image, int threads) {
    check_divisible(image);
    Grid half = box_downsample2(image);
    Grid quarter = box_downsample2(half);
    FeaturePyramid p;
    p.full = fixed_feature_bank(image, threads);
    p.half = fixed_feature_bank(half, threads);
    p.quarter = fixed_feature_bank(quarter, threads);
    return p;
}

FeaturePyramid extract_pyramid(const Grid& image, const FeatureWeights& w, int threads) {
    check_divisible(image);
    Grid half = box_downsample2(image);
    Grid quarter = box_downsample2(half);
    FeaturePyramid p;
    p.quarter = apply_head(fixed_feature_bank(quarter, threads), w.conv[0], w.leaky_slope, threads);
    p.half = apply_head(fixed_feature_bank(half, threads), w.conv[1], w.leaky_slope, threads);
    p.full = apply_head(fixed_feature_bank(image, threads), w.conv[2], w.leaky_slope, threads);
    return p;
}

} // namespace mvsweep
