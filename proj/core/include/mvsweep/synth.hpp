#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mvsweep/geometry.hpp"
#include "mvsweep/grid.hpp"

namespace mvsweep {

enum class GeometryKind { fronto_plane, slanted_plane, sphere, two_planes };

const char* geometry_kind_name(GeometryKind k);
GeometryKind geometry_kind_from_name(const std::string& name);

// Procedural multi-view scene: reference camera at the origin looking +z,
// sources at lateral offsets, analytic geometry with exact ground truth.
struct SceneSpec {
    GeometryKind kind = GeometryKind::fronto_plane;
    int width = 128;
    int height = 96;
    int num_views = 3;
    double focal = 200.0;
    double baseline = 50.0; // lateral offset step, scene units
    double depth_min = 425.0;
    double depth_range_len = 508.8;
    // geometry parameters (scene units)
    double plane_depth = 600.0;
    double slant_x = 0.25; // slope of the slanted plane
    double slant_y = 0.1;
    double sphere_z = 650.0;
    double sphere_radius = 150.0;
    double fg_depth = 520.0; // two-plane occlusion
    double bg_depth = 800.0;
    double split_x = 0.0;    // world x of the occluder's edge
    uint64_t texture_seed = 1;

    double depth_max() const { return depth_min + depth_range_len; }

    // Deterministic per-index variation for dataset generation.
    static SceneSpec randomized(const SceneSpec& base, uint64_t seed);
};

// Analytic scene: exposes subpixel rendering so photoconsistency can be
// checked without resampling error.
class SceneModel {
public:
    SceneModel(const SceneSpec& spec, uint64_t seed);

    const SceneSpec& spec() const { return spec_; }
    const std::vector<CameraParams>& cams() const { return cams_; }

    // camera-frame depth of the first hit along the ray through (u, v)
    std::pair<double, bool> trace_depth(int view, double u, double v) const;
    // Lambertian albedo at the first hit
    std::pair<double, bool> render(int view, double u, double v) const;

    double albedo(const Eigen::Vector3d& point) const;

private:
    SceneSpec spec_;
    uint64_t noise_seed_;
    std::vector<CameraParams> cams_;
};

struct Scene {
    SceneSpec spec;
    uint64_t seed = 0;
    std::vector<Grid> images; // luminance in [0,1]
    std::vector<CameraParams> cams;
    Grid gt_depth; // reference view; 0 where no intersection
    Grid gt_mask;
};

// Throws DegenerateGeometry when the spec's geometry leaves the declared
// depth range.
Scene generate_scene(const SceneSpec& spec, uint64_t seed);

// Per-scene directory: view_%02d.ppm, cam_%02d.txt, gt_depth.pfm and a
// scene.json manifest listing the files and the seed.
void save_scene(const Scene& scene, const std::string& dir);
Scene load_scene(const std::string& dir);

} // namespace mvsweep
