#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "mvsweep/error.hpp"

namespace mvsweep {

// W x H scalar field, row-major. Used for depth maps, masks, uncertainty
// maps and grayscale images (values in [0,1] for images).
struct Grid {
    int width = 0;
    int height = 0;
    std::vector<double> data;

    Grid() = default;
    Grid(int w, int h, double fill = 0.0)
        : width(w), height(h), data(static_cast<size_t>(w) * h, fill) {}

    double& at(int x, int y) { return data[static_cast<size_t>(y) * width + x]; }
    double at(int x, int y) const { return data[static_cast<size_t>(y) * width + x]; }

    size_t size() const { return data.size(); }
    bool same_shape(const Grid& o) const { return width == o.width && height == o.height; }
};

// W x H x C planar field: data[(c*H + y)*W + x].
struct FeatureMap {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<double> data;

    FeatureMap() = default;
    FeatureMap(int w, int h, int c, double fill = 0.0)
        : width(w), height(h), channels(c),
          data(static_cast<size_t>(w) * h * c, fill) {}

    double& at(int x, int y, int c) {
        return data[(static_cast<size_t>(c) * height + y) * width + x];
    }
    double at(int x, int y, int c) const {
        return data[(static_cast<size_t>(c) * height + y) * width + x];
    }
    const double* plane(int c) const {
        return data.data() + static_cast<size_t>(c) * height * width;
    }
    double* plane(int c) {
        return data.data() + static_cast<size_t>(c) * height * width;
    }
    bool same_shape(const FeatureMap& o) const {
        return width == o.width && height == o.height && channels == o.channels;
    }
};

// W x H x D plane-major field: data[(j*H + y)*W + x]. Costs, probabilities
// and per-pixel hypothesis depths all share this layout.
struct Volume {
    int width = 0;
    int height = 0;
    int planes = 0;
    std::vector<double> data;

    Volume() = default;
    Volume(int w, int h, int d, double fill = 0.0)
        : width(w), height(h), planes(d),
          data(static_cast<size_t>(w) * h * d, fill) {}

    double& at(int x, int y, int j) {
        return data[(static_cast<size_t>(j) * height + y) * width + x];
    }
    double at(int x, int y, int j) const {
        return data[(static_cast<size_t>(j) * height + y) * width + x];
    }
    bool same_shape(const Volume& o) const {
        return width == o.width && height == o.height && planes == o.planes;
    }
};

// 8-bit raster, interleaved channels (1 = gray, 3 = RGB).
struct ImageU8 {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<uint8_t> data;

    ImageU8() = default;
    ImageU8(int w, int h, int c, uint8_t fill = 0)
        : width(w), height(h), channels(c),
          data(static_cast<size_t>(w) * h * c, fill) {}

    uint8_t& at(int x, int y, int c = 0) {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    uint8_t at(int x, int y, int c = 0) const {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }
};

// Luminance in [0,1]; RGB uses the BT.601 weights.
inline Grid to_luminance(const ImageU8& img) {
    Grid g(img.width, img.height);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            double v;
            if (img.channels == 1) {
                v = img.at(x, y) / 255.0;
            } else {
                v = (0.299 * img.at(x, y, 0) + 0.587 * img.at(x, y, 1) +
                     0.114 * img.at(x, y, 2)) /
                    255.0;
            }
            g.at(x, y) = v;
        }
    }
    return g;
}

inline ImageU8 to_u8(const Grid& g) {
    ImageU8 img(g.width, g.height, 1);
    for (int y = 0; y < g.height; ++y) {
        for (int x = 0; x < g.width; ++x) {
            double v = g.at(x, y);
            v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
            img.at(x, y) = static_cast<uint8_t>(v * 255.0 + 0.5);
        }
    }
    return img;
}

} // namespace mvsweep
