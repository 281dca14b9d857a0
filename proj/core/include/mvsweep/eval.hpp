#pragma once

#include "mvsweep/fusion.hpp"
#include "mvsweep/grid.hpp"
#include "mvsweep/rem.hpp"

namespace mvsweep {

struct CloudMetrics {
    double accuracy = 0.0;     // mean capped distance pred -> gt
    double completeness = 0.0; // mean capped distance gt -> pred
    double overall = 0.0;
};

// Brute-force nearest-neighbor metrics; distances capped at dist_cap.
// Throws EmptyCloud.
CloudMetrics cloud_metrics(const PointCloud& pred, const PointCloud& gt,
                           double dist_cap, int threads = 1);

struct RangeDiagnostics {
    double mean_length = 0.0;
    double coverage = 0.0; // fraction of masked pixels with dmin <= gt <= dmax
    long pixels = 0;
};

// Throws EmptyMask.
RangeDiagnostics range_diagnostics(const DepthRangeMap& ranges, const Grid& gt_depth,
                                   const Grid& mask);

struct DepthErrorStats {
    double mae = 0.0;
    double rmse = 0.0;
    double frac_within = 0.0; // |err| <= plane_spacing
};

// Throws EmptyMask.
DepthErrorStats depth_error_stats(const Grid& pred, const Grid& gt, const Grid& mask,
                                  double plane_spacing);

} // namespace mvsweep
