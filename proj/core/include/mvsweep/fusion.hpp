#pragma once

#include <span>
#include <string>
#include <vector>

#include "mvsweep/geometry.hpp"
#include "mvsweep/grid.hpp"

namespace mvsweep {

struct PointCloud {
    struct Point {
        double x = 0, y = 0, z = 0;
        uint8_t r = 0, g = 0, b = 0;
    };
    std::vector<Point> points;
};

struct FusionParams {
    double reproj_tol_px = 0.75;
    double rel_depth_tol = 0.01;
    int min_consistent_views = 2;
};

// Geometric-consistency fusion: every view acts as reference in turn; a
// pixel is kept when at least min_consistent_views other views agree both
// in round-trip reprojection and relative depth. The fused point averages
// the back-projections of the reference and all consistent views.
// Deterministic order: view index, then row-major pixels.
PointCloud fuse(std::span<const Grid> depth_maps, std::span<const CameraParams> cams,
                std::span<const Grid> images, const FusionParams& params,
                int threads = 1);

enum class PlyFormat { ascii, binary_le };

// x, y, z as float32 and red, green, blue as uchar.
void write_ply(const PointCloud& pc, const std::string& path, PlyFormat format);
PointCloud read_ply(const std::string& path);

} // namespace mvsweep
