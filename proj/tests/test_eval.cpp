#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mvsweep/eval.hpp"
#include "mvsweep/rng.hpp"

using namespace mvsweep;

namespace {

PointCloud random_cloud(int n, uint64_t seed) {
    PointCloud pc;
    Rng rng(seed);
    for (int i = 0; i < n; ++i) {
        PointCloud::Point p;
        p.x = rng.uniform(-10, 10);
        p.y = rng.uniform(-10, 10);
        p.z = rng.uniform(-10, 10);
        pc.points.push_back(p);
    }
    return pc;
}

DepthRangeMap intervals(const Grid& lo, const Grid& hi) {
    DepthRangeMap rm;
    rm.dmin = lo;
    rm.dmax = hi;
    rm.raw_len = Grid(lo.width, lo.height, 0.0);
    rm.clip_lo = Grid(lo.width, lo.height, 0.0);
    rm.clip_hi = Grid(lo.width, lo.height, 0.0);
    for (size_t i = 0; i < lo.data.size(); ++i)
        rm.raw_len.data[i] = hi.data[i] - lo.data[i];
    return rm;
}

} // namespace

TEST_CASE("identical clouds score zero everywhere") {
    PointCloud pc = random_cloud(30, 1);
    CloudMetrics m = cloud_metrics(pc, pc, 10.0);
    CHECK(m.accuracy == 0.0);
    CHECK(m.completeness == 0.0);
    CHECK(m.overall == 0.0);
}

TEST_CASE("single-pair distance") {
    PointCloud a, b;
    a.points.push_back({0, 0, 0, 0, 0, 0});
    b.points.push_back({0, 0, 1, 0, 0, 0});
    CloudMetrics m = cloud_metrics(a, b, 10.0);
    CHECK(m.accuracy == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(m.completeness == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(m.overall == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("distances are capped") {
    PointCloud a, b;
    a.points.push_back({0, 0, 0, 0, 0, 0});
    b.points.push_back({0, 0, 100, 0, 0, 0});
    CloudMetrics m = cloud_metrics(a, b, 2.5);
    CHECK(m.accuracy == doctest::Approx(2.5).epsilon(1e-12));
}

TEST_CASE("random clouds match the scalar brute-force oracle") {
    PointCloud pred = random_cloud(50, 3), gt = random_cloud(50, 4);
    double cap = 8.0;
    CloudMetrics m = cloud_metrics(pred, gt, cap, 3);

    auto oracle_dir = [&](const PointCloud& from, const PointCloud& to) {
        double acc = 0;
        for (const auto& p : from.points) {
            double best = 1e300;
            for (const auto& q : to.points) {
                double dx = p.x - q.x, dy = p.y - q.y, dz = p.z - q.z;
                best = std::min(best, std::sqrt(dx * dx + dy * dy + dz * dz));
            }
            acc += std::min(best, cap);
        }
        return acc / static_cast<double>(from.points.size());
    };
    CHECK(std::abs(m.accuracy - oracle_dir(pred, gt)) < 1e-12);
    CHECK(std::abs(m.completeness - oracle_dir(gt, pred)) < 1e-12);
    CHECK(std::abs(m.overall - 0.5 * (m.accuracy + m.completeness)) < 1e-15);
}

TEST_CASE("swapping the clouds swaps accuracy and completeness exactly") {
    PointCloud a = random_cloud(40, 5), b = random_cloud(35, 6);
    CloudMetrics m1 = cloud_metrics(a, b, 5.0);
    CloudMetrics m2 = cloud_metrics(b, a, 5.0);
    CHECK(m1.accuracy == m2.completeness);
    CHECK(m1.completeness == m2.accuracy);
    CHECK(m1.overall == m2.overall);
}

TEST_CASE("empty clouds are rejected") {
    PointCloud empty, one = random_cloud(1, 7);
    CHECK_THROWS_WITH_AS(cloud_metrics(empty, one, 1.0),
                         doctest::Contains("EmptyCloud"), Error);
    CHECK_THROWS_AS(cloud_metrics(one, empty, 1.0), Error);
}

TEST_CASE("range diagnostics basics") {
    int W = 8, H = 6;
    Grid gt(W, H, 500.0), mask(W, H, 1.0);
    Grid lo(W, H, 499.0), hi(W, H, 501.0);
    RangeDiagnostics d = range_diagnostics(intervals(lo, hi), gt, mask);
    CHECK(d.mean_length == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(d.coverage == 1.0);
    CHECK(d.pixels == W * H);

    Grid lo2(W, H, 400.0), hi2(W, H, 450.0); // strictly below gt
    RangeDiagnostics d2 = range_diagnostics(intervals(lo2, hi2), gt, mask);
    CHECK(d2.coverage == 0.0);

    Grid none(W, H, 0.0);
    CHECK_THROWS_WITH_AS(range_diagnostics(intervals(lo, hi), gt, none),
                         doctest::Contains("EmptyMask"), Error);
}

TEST_CASE("coverage is non-decreasing under interval dilation") {
    Rng rng(9);
    int W = 12, H = 9;
    Grid gt(W, H), mask(W, H, 1.0), center(W, H);
    for (size_t i = 0; i < gt.data.size(); ++i) {
        gt.data[i] = rng.uniform(450, 900);
        center.data[i] = gt.data[i] + rng.uniform(-40, 40);
    }
    double prev_cov = -1.0;
    for (double half : {5.0, 15.0, 30.0, 60.0}) {
        Grid lo(W, H), hi(W, H);
        for (size_t i = 0; i < lo.data.size(); ++i) {
            lo.data[i] = center.data[i] - half;
            hi.data[i] = center.data[i] + half;
        }
        RangeDiagnostics d = range_diagnostics(intervals(lo, hi), gt, mask);
        CHECK(d.coverage >= prev_cov);
        prev_cov = d.coverage;
    }
}

TEST_CASE("depth error stats") {
    int W = 10, H = 5;
    Grid gt(W, H, 100.0), mask(W, H, 1.0);
    Grid pred = gt;
    DepthErrorStats s = depth_error_stats(pred, gt, mask, 1.0);
    CHECK(s.mae == 0.0);
    CHECK(s.rmse == 0.0);
    CHECK(s.frac_within == 1.0);

    for (double& v : pred.data) v += 0.5;
    s = depth_error_stats(pred, gt, mask, 1.0);
    CHECK(s.mae == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(s.rmse == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(s.frac_within == 1.0);

    // random case against a scalar loop
    Rng rng(11);
    Grid p2(W, H), g2(W, H), m2(W, H);
    for (size_t i = 0; i < p2.data.size(); ++i) {
        p2.data[i] = rng.uniform(0, 10);
        g2.data[i] = rng.uniform(0, 10);
        m2.data[i] = rng.uniform() < 0.7 ? 1.0 : 0.0;
    }
    double spacing = 2.0;
    DepthErrorStats got = depth_error_stats(p2, g2, m2, spacing);
    double abs_acc = 0, sq = 0;
    long n = 0, within = 0;
    for (size_t i = 0; i < p2.data.size(); ++i) {
        if (m2.data[i] <= 0.0) continue;
        double e = p2.data[i] - g2.data[i];
        abs_acc += std::abs(e);
        sq += e * e;
        if (std::abs(e) <= spacing) ++within;
        ++n;
    }
    CHECK(std::abs(got.mae - abs_acc / n) < 1e-12);
    CHECK(std::abs(got.rmse - std::sqrt(sq / n)) < 1e-12);
    CHECK(got.frac_within == doctest::Approx(double(within) / n).epsilon(1e-12));

    Grid none(W, H, 0.0);
    CHECK_THROWS_AS(depth_error_stats(p2, g2, none, 1.0), Error);
}
