#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "mvsweep/geometry.hpp"
#include "mvsweep/synth.hpp"

using namespace mvsweep;

TEST_CASE("fronto-parallel plane has exactly constant ground truth") {
    SceneSpec spec;
    spec.width = 32;
    spec.height = 16;
    spec.kind = GeometryKind::fronto_plane;
    spec.plane_depth = 600.0;
    Scene s = generate_scene(spec, 1);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 32; ++x) {
            CHECK(s.gt_mask.at(x, y) == 1.0);
            CHECK(s.gt_depth.at(x, y) == doctest::Approx(600.0).epsilon(1e-14));
        }
}

TEST_CASE("slanted plane matches the closed-form ray-plane intersection") {
    SceneSpec spec;
    spec.width = 32;
    spec.height = 24;
    spec.kind = GeometryKind::slanted_plane;
    spec.plane_depth = 650.0;
    spec.slant_x = 0.2;
    spec.slant_y = -0.1;
    spec.focal = 100.0;
    Scene s = generate_scene(spec, 2);
    // independent oracle: with the reference at the origin, the ray through
    // (u, v) is s * ((u-cx)/f, (v-cy)/f, 1); the plane is
    // slant_x*X + slant_y*Y + Z = plane_depth
    double cx = spec.width / 2.0, cy = spec.height / 2.0;
    for (int y = 0; y < spec.height; ++y)
        for (int x = 0; x < spec.width; ++x) {
            double dx = (x - cx) / spec.focal, dy = (y - cy) / spec.focal;
            double oracle = spec.plane_depth / (spec.slant_x * dx + spec.slant_y * dy + 1.0);
            CHECK(std::abs(s.gt_depth.at(x, y) - oracle) < 1e-12 * oracle);
        }
}

TEST_CASE("identical spec and seed give bit-identical scenes") {
    SceneSpec spec;
    spec.width = 32;
    spec.height = 16;
    spec.kind = GeometryKind::sphere;
    Scene a = generate_scene(spec, 7);
    Scene b = generate_scene(spec, 7);
    REQUIRE(a.images.size() == b.images.size());
    for (size_t i = 0; i < a.images.size(); ++i)
        CHECK(a.images[i].data == b.images[i].data);
    CHECK(a.gt_depth.data == b.gt_depth.data);

    Scene c = generate_scene(spec, 8);
    CHECK(a.images[0].data != c.images[0].data);
}

TEST_CASE("ground truth stays inside the declared scene range") {
    SceneSpec base;
    base.width = 32;
    base.height = 16;
    for (uint64_t seed = 0; seed < 12; ++seed) {
        SceneSpec spec = SceneSpec::randomized(base, seed);
        Scene s = generate_scene(spec, seed);
        for (size_t i = 0; i < s.gt_depth.data.size(); ++i) {
            if (s.gt_mask.data[i] <= 0.0) continue;
            CHECK(s.gt_depth.data[i] >= spec.depth_min - 1e-9);
            CHECK(s.gt_depth.data[i] <= spec.depth_max() + 1e-9);
        }
    }
}

TEST_CASE("degenerate geometry is rejected") {
    SceneSpec spec;
    spec.width = 16;
    spec.height = 16;
    spec.kind = GeometryKind::fronto_plane;
    spec.plane_depth = 100.0; // outside [425, 933.8]
    CHECK_THROWS_WITH_AS(generate_scene(spec, 1),
                         doctest::Contains("DegenerateGeometry"), Error);
}

TEST_CASE("cross-view photoconsistency at the analytic subpixel positions") {
    SceneSpec spec;
    spec.width = 48;
    spec.height = 32;
    spec.kind = GeometryKind::slanted_plane;
    spec.plane_depth = 620.0;
    spec.slant_x = 0.15;
    Scene s = generate_scene(spec, 11);
    SceneModel model(spec, 11);
    int checked = 0;
    for (int y = 2; y < spec.height - 2; y += 3) {
        for (int x = 2; x < spec.width - 2; x += 3) {
            double d = s.gt_depth.at(x, y);
            Eigen::Vector3d X = backproject(s.cams[0], {double(x), double(y)}, d);
            for (size_t v = 1; v < s.cams.size(); ++v) {
                auto [px, depth_v] = project(s.cams[v], X);
                auto [val, ok] = model.render(static_cast<int>(v), px.x(), px.y());
                if (!ok) continue;
                CHECK(std::abs(val - s.images[0].at(x, y)) < 1e-6);
                ++checked;
            }
        }
    }
    CHECK(checked > 100);
}

TEST_CASE("scene save/load round-trip") {
    auto dir = (std::filesystem::temp_directory_path() / "mvsweep_scene_rt").string();
    std::filesystem::remove_all(dir);
    SceneSpec spec;
    spec.width = 32;
    spec.height = 16;
    spec.kind = GeometryKind::two_planes;
    Scene s = generate_scene(spec, 21);
    save_scene(s, dir);
    Scene back = load_scene(dir);
    CHECK(back.seed == 21);
    CHECK(back.spec.kind == GeometryKind::two_planes);
    CHECK(back.images.size() == s.images.size());
    CHECK(back.spec.depth_min == s.spec.depth_min);
    // 8-bit quantization on disk
    for (size_t i = 0; i < s.images[0].data.size(); ++i)
        CHECK(std::abs(back.images[0].data[i] - s.images[0].data[i]) <= 0.5 / 255.0 + 1e-12);
    // gt travels as float32
    for (size_t i = 0; i < s.gt_depth.data.size(); ++i)
        CHECK(back.gt_depth.data[i] ==
              static_cast<double>(static_cast<float>(s.gt_depth.data[i])));
}

TEST_CASE("two-plane scene contains both depths") {
    SceneSpec spec;
    spec.width = 32;
    spec.height = 16;
    spec.kind = GeometryKind::two_planes;
    spec.fg_depth = 500.0;
    spec.bg_depth = 800.0;
    spec.split_x = 0.0;
    Scene s = generate_scene(spec, 5);
    bool has_fg = false, has_bg = false;
    for (double d : s.gt_depth.data) {
        if (std::abs(d - 500.0) < 1e-9) has_fg = true;
        if (std::abs(d - 800.0) < 1e-9) has_bg = true;
    }
    CHECK(has_fg);
    CHECK(has_bg);
}
