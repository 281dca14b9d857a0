#include "mvsweep/eval.hpp"

#include <cmath>

#include "mvsweep/error.hpp"
#include "mvsweep/parallel.hpp"

namespace mvsweep {

namespace {

double mean_capped_nn(const PointCloud& from, const PointCloud& to, double cap,
                      int threads) {
    std::vector<double> dists(from.points.size());
    parallel_for(0, static_cast<int>(from.points.size()), threads, [&](int i) {
        const auto& p = from.points[static_cast<size_t>(i)];
        double best = cap * cap;
        for (const auto& q : to.points) {
            double dx = p.x - q.x, dy = p.y - q.y, dz = p.z - q.z;
            double d2 = dx * dx + dy * dy + dz * dz;
            if (d2 < best) best = d2;
        }
        dists[static_cast<size_t>(i)] = std::sqrt(best);
    });
    double acc = 0.0;
    for (double d : dists) acc += d;
    return acc / static_cast<double>(dists.size());
}

} // namespace

CloudMetrics cloud_metrics(const PointCloud& pred, const PointCloud& gt,
                           double dist_cap, int threads) {
    if (pred.points.empty() || gt.points.empty())
        fail("EmptyCloud", "cloud metrics need non-empty clouds");
    require(dist_cap > 0.0, "EmptyRange", "distance cap must be positive");
    CloudMetrics m;
    m.accuracy = mean_capped_nn(pred, gt, dist_cap, threads);
    m.completeness = mean_capped_nn(gt, pred, dist_cap, threads);
    m.overall = 0.5 * (m.accuracy + m.completeness);
    return m;
}

RangeDiagnostics range_diagnostics(const DepthRangeMap& ranges, const Grid& gt_depth,
                                   const Grid& mask) {
    require(ranges.dmin.same_shape(gt_depth) && ranges.dmin.same_shape(mask),
            "ShapeMismatch", "range diagnostics shapes differ");
    RangeDiagnostics d;
    double len_acc = 0.0;
    long covered = 0;
    for (size_t i = 0; i < mask.data.size(); ++i) {
        if (mask.data[i] <= 0.0) continue;
        ++d.pixels;
        len_acc += ranges.dmax.data[i] - ranges.dmin.data[i];
        double gt = gt_depth.data[i];
        if (ranges.dmin.data[i] <= gt && gt <= ranges.dmax.data[i]) ++covered;
    }
    if (d.pixels == 0) fail("EmptyMask", "no valid pixels for range diagnostics");
    d.mean_length = len_acc / static_cast<double>(d.pixels);
    d.coverage = static_cast<double>(covered) / static_cast<double>(d.pixels);
    return d;
}

DepthErrorStats depth_error_stats(const Grid& pred, const Grid& gt, const Grid& mask,
                                  double plane_spacing) {
    require(pred.same_shape(gt) && pred.same_shape(mask), "ShapeMismatch",
            "depth error stats shapes differ");
    DepthErrorStats s;
    long n = 0, within = 0;
    double abs_acc = 0.0, sq_acc = 0.0;
    for (size_t i = 0; i < mask.data.size(); ++i) {
        if (mask.data[i] <= 0.0) continue;
        double e = pred.data[i] - gt.data[i];
        abs_acc += std::abs(e);
        sq_acc += e * e;
        if (std::abs(e) <= plane_spacing) ++within;
        ++n;
    }
    if (n == 0) fail("EmptyMask", "no valid pixels for depth error stats");
    s.mae = abs_acc / static_cast<double>(n);
    s.rmse = std::sqrt(sq_acc / static_cast<double>(n));
    s.frac_within = static_cast<double>(within) / static_cast<double>(n);
    return s;
}

} // namespace mvsweep
