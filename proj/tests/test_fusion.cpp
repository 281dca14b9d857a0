#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mvsweep/fusion.hpp"
#include "mvsweep/rng.hpp"
#include "mvsweep/synth.hpp"

using namespace mvsweep;

namespace {

// perfect per-view depth maps for a fronto-parallel plane
struct PlaneSetup {
    Scene scene;
    std::vector<Grid> depths;
};

PlaneSetup plane_setup(uint64_t seed, double depth) {
    SceneSpec spec;
    spec.width = 48;
    spec.height = 32;
    spec.kind = GeometryKind::fronto_plane;
    spec.plane_depth = depth;
    PlaneSetup ps;
    ps.scene = generate_scene(spec, seed);
    SceneModel model(spec, seed);
    for (int v = 0; v < spec.num_views; ++v) {
        Grid d(spec.width, spec.height, 0.0);
        for (int y = 0; y < spec.height; ++y)
            for (int x = 0; x < spec.width; ++x) {
                auto [z, ok] = model.trace_depth(v, x, y);
                if (ok) d.at(x, y) = z;
            }
        ps.depths.push_back(std::move(d));
    }
    return ps;
}

std::string tmp_path(const char* name) {
    auto dir = std::filesystem::temp_directory_path() / "mvsweep_fusion_tests";
    std::filesystem::create_directories(dir);
    return (dir / name).string();
}

// independent minimal PLY reader used as the round-trip oracle
struct OraclePoint {
    float x, y, z;
    unsigned char r, g, b;
};
std::vector<OraclePoint> oracle_read_ply(const std::string& path, bool binary) {
    std::ifstream in(path, std::ios::binary);
    std::string line;
    size_t n = 0;
    while (std::getline(in, line)) {
        if (line.rfind("element vertex", 0) == 0)
            n = std::stoul(line.substr(std::strlen("element vertex ")));
        if (line == "end_header") break;
    }
    std::vector<OraclePoint> pts(n);
    for (auto& p : pts) {
        if (binary) {
            in.read(reinterpret_cast<char*>(&p.x), 4);
            in.read(reinterpret_cast<char*>(&p.y), 4);
            in.read(reinterpret_cast<char*>(&p.z), 4);
            in.read(reinterpret_cast<char*>(&p.r), 1);
            in.read(reinterpret_cast<char*>(&p.g), 1);
            in.read(reinterpret_cast<char*>(&p.b), 1);
        } else {
            int r, g, b;
            in >> p.x >> p.y >> p.z >> r >> g >> b;
            p.r = static_cast<unsigned char>(r);
            p.g = static_cast<unsigned char>(g);
            p.b = static_cast<unsigned char>(b);
        }
    }
    return pts;
}

} // namespace

TEST_CASE("perfect plane depth maps fuse to the plane") {
    PlaneSetup ps = plane_setup(3, 600.0);
    FusionParams params; // defaults 0.75 px, 1%, 2 views
    PointCloud pc = fuse(ps.depths, ps.scene.cams, ps.scene.images, params);

    // every interior reference pixel should survive from the reference view
    long interior = static_cast<long>((48 - 8) * (32 - 8));
    CHECK(static_cast<long>(pc.points.size()) >= interior);

    double rms = 0;
    for (const auto& p : pc.points) rms += (p.z - 600.0) * (p.z - 600.0);
    rms = std::sqrt(rms / static_cast<double>(pc.points.size()));
    CHECK(rms <= 1e-6);
}

TEST_CASE("corrupting one view's depths removes its inconsistent points") {
    PlaneSetup ps = plane_setup(5, 620.0);
    FusionParams params;
    params.min_consistent_views = 2; // both other views must agree
    PointCloud clean = fuse(ps.depths, ps.scene.cams, ps.scene.images, params);

    // corrupt half of view 1's depths by 10x
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 24; ++x) ps.depths[1].at(x, y) *= 10.0;
    PointCloud dirty = fuse(ps.depths, ps.scene.cams, ps.scene.images, params);
    CHECK(dirty.points.size() < clean.points.size());
    // corrupted pixels must not contribute points anywhere near 6200
    for (const auto& p : dirty.points) CHECK(p.z < 1000.0);
}

TEST_CASE("requiring more views than available empties the cloud") {
    PlaneSetup ps = plane_setup(7, 500.0);
    FusionParams params;
    params.min_consistent_views = 3; // only 2 other views exist
    PointCloud pc = fuse(ps.depths, ps.scene.cams, ps.scene.images, params);
    CHECK(pc.points.empty());
}

TEST_CASE("raising the consistency threshold never adds points") {
    PlaneSetup ps = plane_setup(9, 700.0);
    size_t prev = SIZE_MAX;
    for (int k = 1; k <= 3; ++k) {
        FusionParams params;
        params.min_consistent_views = k;
        PointCloud pc = fuse(ps.depths, ps.scene.cams, ps.scene.images, params);
        CHECK(pc.points.size() <= prev);
        prev = pc.points.size();
    }
}

TEST_CASE("fusion needs at least two views") {
    PlaneSetup ps = plane_setup(11, 600.0);
    std::vector<Grid> one{ps.depths[0]};
    std::vector<CameraParams> one_cam{ps.scene.cams[0]};
    std::vector<Grid> one_img{ps.scene.images[0]};
    CHECK_THROWS_WITH_AS(fuse(one, one_cam, one_img, FusionParams{}),
                         doctest::Contains("TooFewViews"), Error);
}

TEST_CASE("empty cloud writes a valid PLY with zero vertices") {
    PointCloud pc;
    std::string p = tmp_path("empty.ply");
    write_ply(pc, p, PlyFormat::ascii);
    std::ifstream in(p);
    std::string text((std::istreambuf_iterator<char>(in)), {});
    CHECK(text.find("element vertex 0") != std::string::npos);
    PointCloud back = read_ply(p);
    CHECK(back.points.empty());
}

TEST_CASE("binary PLY round-trips bit-exactly through an independent reader") {
    PointCloud pc;
    PointCloud::Point p;
    p.x = 1.25;
    p.y = -3.5;
    p.z = 601.127;
    p.r = 10;
    p.g = 200;
    p.b = 31;
    pc.points.push_back(p);
    std::string path = tmp_path("one.ply");
    write_ply(pc, path, PlyFormat::binary_le);
    auto pts = oracle_read_ply(path, true);
    REQUIRE(pts.size() == 1);
    CHECK(pts[0].x == static_cast<float>(p.x));
    CHECK(pts[0].y == static_cast<float>(p.y));
    CHECK(pts[0].z == static_cast<float>(p.z));
    CHECK(pts[0].r == 10);
    CHECK(pts[0].g == 200);
    CHECK(pts[0].b == 31);
}

TEST_CASE("ascii and binary encodings parse to identical values") {
    Rng rng(17);
    PointCloud pc;
    for (int i = 0; i < 20; ++i) {
        PointCloud::Point p;
        p.x = rng.uniform(-100, 100);
        p.y = rng.uniform(-100, 100);
        p.z = rng.uniform(400, 900);
        p.r = static_cast<uint8_t>(rng.uniform_int(0, 255));
        p.g = static_cast<uint8_t>(rng.uniform_int(0, 255));
        p.b = static_cast<uint8_t>(rng.uniform_int(0, 255));
        pc.points.push_back(p);
    }
    std::string pa = tmp_path("a.ply"), pb = tmp_path("b.ply");
    write_ply(pc, pa, PlyFormat::ascii);
    write_ply(pc, pb, PlyFormat::binary_le);
    auto va = oracle_read_ply(pa, false);
    auto vb = oracle_read_ply(pb, true);
    REQUIRE(va.size() == vb.size());
    for (size_t i = 0; i < va.size(); ++i) {
        CHECK(va[i].x == vb[i].x); // %.9g prints float32 exactly
        CHECK(va[i].y == vb[i].y);
        CHECK(va[i].z == vb[i].z);
        CHECK(va[i].r == vb[i].r);
    }
}
