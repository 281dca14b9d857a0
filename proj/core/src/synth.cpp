#include "mvsweep/synth.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "mvsweep/error.hpp"
#include "mvsweep/io.hpp"
#include "mvsweep/rng.hpp"

namespace mvsweep {

namespace {

// deterministic lattice hash -> [0, 1)
inline double lattice_value(int64_t ix, int64_t iy, int64_t iz, uint64_t seed) {
    uint64_t h = splitmix64(static_cast<uint64_t>(ix) * 0x8da6b343ULL ^
                            static_cast<uint64_t>(iy) * 0xd8163841ULL ^
                            static_cast<uint64_t>(iz) * 0xcb1ab31fULL ^ seed);
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

inline double quintic(double t) { return t * t * t * (t * (t * 6.0 - 15.0) + 10.0); }

double value_noise3(const Eigen::Vector3d& p, uint64_t seed) {
    double fx = std::floor(p.x()), fy = std::floor(p.y()), fz = std::floor(p.z());
    int64_t ix = static_cast<int64_t>(fx), iy = static_cast<int64_t>(fy),
            iz = static_cast<int64_t>(fz);
    double tx = quintic(p.x() - fx), ty = quintic(p.y() - fy), tz = quintic(p.z() - fz);
    double acc = 0.0;
    for (int dz = 0; dz < 2; ++dz) {
        double wz = dz ? tz : 1.0 - tz;
        for (int dy = 0; dy < 2; ++dy) {
            double wy = dy ? ty : 1.0 - ty;
            for (int dx = 0; dx < 2; ++dx) {
                double wx = dx ? tx : 1.0 - tx;
                acc += wx * wy * wz * lattice_value(ix + dx, iy + dy, iz + dz, seed);
            }
        }
    }
    return acc;
}

struct Hit {
    double depth = 0.0;
    Eigen::Vector3d point = Eigen::Vector3d::Zero();
    bool ok = false;
};

} // namespace

const char* geometry_kind_name(GeometryKind k) {
    switch (k) {
        case GeometryKind::fronto_plane: return "fronto_plane";
        case GeometryKind::slanted_plane: return "slanted_plane";
        case GeometryKind::sphere: return "sphere";
        case GeometryKind::two_planes: return "two_planes";
    }
    return "unknown";
}

GeometryKind geometry_kind_from_name(const std::string& name) {
    if (name == "fronto_plane") return GeometryKind::fronto_plane;
    if (name == "slanted_plane") return GeometryKind::slanted_plane;
    if (name == "sphere") return GeometryKind::sphere;
    if (name == "two_planes") return GeometryKind::two_planes;
    fail("ConfigError", "unknown geometry kind: " + name);
}

SceneSpec SceneSpec::randomized(const SceneSpec& base, uint64_t seed) {
    Rng rng(seed * 0x51f2cc13ULL + 17);
    SceneSpec s = base;
    double lo = base.depth_min, len = base.depth_range_len;
    s.kind = static_cast<GeometryKind>(seed % 4);
    s.plane_depth = lo + len * rng.uniform(0.2, 0.8);
    s.slant_x = rng.uniform(-0.3, 0.3);
    s.slant_y = rng.uniform(-0.25, 0.25);
    s.sphere_z = lo + len * rng.uniform(0.4, 0.6);
    double max_r = 0.9 * std::min(s.sphere_z - lo, lo + len - s.sphere_z);
    s.sphere_radius = std::min(len * rng.uniform(0.12, 0.22), max_r);
    s.fg_depth = lo + len * rng.uniform(0.15, 0.4);
    s.bg_depth = lo + len * rng.uniform(0.6, 0.9);
    s.split_x = rng.uniform(-40.0, 40.0);
    s.texture_seed = splitmix64(seed + 0x1234abcdULL);
    return s;
}

SceneModel::SceneModel(const SceneSpec& spec, uint64_t seed)
    : spec_(spec), noise_seed_(splitmix64(seed) ^ spec.texture_seed) {
    require(spec.num_views >= 2, "TooFewViews", "a scene needs at least two views");
    Eigen::Matrix3d K = Eigen::Matrix3d::Identity();
    K(0, 0) = spec.focal;
    K(1, 1) = spec.focal;
    K(0, 2) = spec.width / 2.0;
    K(1, 2) = spec.height / 2.0;
    for (int i = 0; i < spec.num_views; ++i) {
        // view 0 at the origin; sources alternate +/- along x
        double off = 0.0;
        if (i > 0) off = spec.baseline * ((i + 1) / 2) * (i % 2 == 1 ? 1.0 : -1.0);
        Eigen::Vector3d center(off, 0.0, 0.0);
        cams_.push_back(
            CameraParams::from_krt(K, Eigen::Matrix3d::Identity(), -center));
    }
}

std::pair<double, bool> SceneModel::trace_depth(int view, double u, double v) const {
    const CameraParams& cam = cams_[static_cast<size_t>(view)];
    Eigen::Vector3d C = cam.center();
    Eigen::Vector3d dir = cam.R.transpose() * (cam.K.inverse() * Eigen::Vector3d(u, v, 1.0));

    auto plane_hit = [&](double sx, double sy, double d0) -> Hit {
        Hit h;
        double den = sx * dir.x() + sy * dir.y() + dir.z();
        if (std::abs(den) < 1e-15) return h;
        double s = (d0 - (sx * C.x() + sy * C.y() + C.z())) / den;
        if (s <= 0.0) return h;
        h.depth = s;
        h.point = C + s * dir;
        h.ok = true;
        return h;
    };

    Hit hit;
    switch (spec_.kind) {
        case GeometryKind::fronto_plane:
            hit = plane_hit(0.0, 0.0, spec_.plane_depth);
            break;
        case GeometryKind::slanted_plane:
            hit = plane_hit(spec_.slant_x, spec_.slant_y, spec_.plane_depth);
            break;
        case GeometryKind::sphere: {
            Hit bg = plane_hit(0.0, 0.0, spec_.bg_depth);
            Eigen::Vector3d cen(0.0, 0.0, spec_.sphere_z);
            Eigen::Vector3d oc = C - cen;
            double a = dir.squaredNorm();
            double b = 2.0 * oc.dot(dir);
            double c = oc.squaredNorm() - spec_.sphere_radius * spec_.sphere_radius;
            double disc = b * b - 4.0 * a * c;
            Hit sp;
            if (disc >= 0.0) {
                double s = (-b - std::sqrt(disc)) / (2.0 * a);
                if (s > 0.0) {
                    sp.depth = s;
                    sp.point = C + s * dir;
                    sp.ok = true;
                }
            }
            hit = (sp.ok && (!bg.ok || sp.depth < bg.depth)) ? sp : bg;
            break;
        }
        case GeometryKind::two_planes: {
            Hit bg = plane_hit(0.0, 0.0, spec_.bg_depth);
            Hit fg = plane_hit(0.0, 0.0, spec_.fg_depth);
            if (fg.ok && fg.point.x() < spec_.split_x && (!bg.ok || fg.depth < bg.depth))
                hit = fg;
            else
                hit = bg;
            break;
        }
    }
    return {hit.depth, hit.ok};
}

std::pair<double, bool> SceneModel::render(int view, double u, double v) const {
    auto [depth, ok] = trace_depth(view, u, v);
    if (!ok) return {0.0, false};
    const CameraParams& cam = cams_[static_cast<size_t>(view)];
    Eigen::Vector3d dir = cam.R.transpose() * (cam.K.inverse() * Eigen::Vector3d(u, v, 1.0));
    Eigen::Vector3d point = cam.center() + depth * dir;
    return {albedo(point), true};
}

double SceneModel::albedo(const Eigen::Vector3d& point) const {
    // band-limited fractal value noise, 4 octaves, base wavelength 48 units
    double acc = 0.0, amp = 1.0, norm = 0.0;
    double freq = 1.0 / 48.0;
    for (int oct = 0; oct < 4; ++oct) {
        acc += amp * (value_noise3(point * freq, noise_seed_ + static_cast<uint64_t>(oct)) - 0.5);
        norm += amp;
        amp *= 0.55;
        freq *= 2.0;
    }
    return 0.5 + 0.9 * (acc / norm);
}

Scene generate_scene(const SceneSpec& spec, uint64_t seed) {
    SceneModel model(spec, seed);
    Scene scene;
    scene.spec = spec;
    scene.seed = seed;
    scene.cams = model.cams();
    scene.gt_depth = Grid(spec.width, spec.height, 0.0);
    scene.gt_mask = Grid(spec.width, spec.height, 0.0);

    for (int i = 0; i < spec.num_views; ++i) {
        Grid img(spec.width, spec.height, 0.0);
        for (int y = 0; y < spec.height; ++y) {
            for (int x = 0; x < spec.width; ++x) {
                auto [val, ok] = model.render(i, x, y);
                if (ok) img.at(x, y) = val;
            }
        }
        scene.images.push_back(std::move(img));
    }

    for (int y = 0; y < spec.height; ++y) {
        for (int x = 0; x < spec.width; ++x) {
            auto [d, ok] = model.trace_depth(0, x, y);
            if (!ok) continue;
            if (d < spec.depth_min - 1e-9 || d > spec.depth_max() + 1e-9)
                fail("DegenerateGeometry",
                     "ground-truth depth leaves the declared scene range");
            scene.gt_depth.at(x, y) = d;
            scene.gt_mask.at(x, y) = 1.0;
        }
    }
    return scene;
}

void save_scene(const Scene& scene, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    nlohmann::json manifest;
    manifest["seed"] = scene.seed;
    manifest["kind"] = geometry_kind_name(scene.spec.kind);
    manifest["width"] = scene.spec.width;
    manifest["height"] = scene.spec.height;
    manifest["depth_min"] = scene.spec.depth_min;
    manifest["depth_range_len"] = scene.spec.depth_range_len;
    manifest["gt_depth"] = "gt_depth.pfm";
    nlohmann::json views = nlohmann::json::array();
    for (size_t i = 0; i < scene.images.size(); ++i) {
        char img_name[32], cam_name[32];
        std::snprintf(img_name, sizeof img_name, "view_%02zu.ppm", i);
        std::snprintf(cam_name, sizeof cam_name, "cam_%02zu.txt", i);
        ImageU8 gray = to_u8(scene.images[i]);
        ImageU8 rgb(gray.width, gray.height, 3);
        for (int y = 0; y < gray.height; ++y)
            for (int x = 0; x < gray.width; ++x)
                for (int c = 0; c < 3; ++c) rgb.at(x, y, c) = gray.at(x, y);
        save_ppm(dir + "/" + img_name, rgb);
        write_camera_file(dir + "/" + cam_name,
                          CameraFile{scene.cams[i], scene.spec.depth_min,
                                     scene.spec.depth_range_len});
        views.push_back({{"image", img_name}, {"camera", cam_name}});
    }
    manifest["views"] = views;
    write_pfm(dir + "/gt_depth.pfm", scene.gt_depth);
    std::ofstream out(dir + "/scene.json");
    if (!out) fail("IoError", "cannot write manifest in " + dir);
    out << manifest.dump(2) << "\n";
}

Scene load_scene(const std::string& dir) {
    std::ifstream in(dir + "/scene.json");
    if (!in) fail("IoError", "missing scene.json in " + dir);
    nlohmann::json manifest;
    in >> manifest;
    Scene scene;
    scene.seed = manifest.at("seed").get<uint64_t>();
    scene.spec.kind = geometry_kind_from_name(manifest.at("kind").get<std::string>());
    scene.spec.width = manifest.at("width").get<int>();
    scene.spec.height = manifest.at("height").get<int>();
    scene.spec.depth_min = manifest.at("depth_min").get<double>();
    scene.spec.depth_range_len = manifest.at("depth_range_len").get<double>();
    for (const auto& view : manifest.at("views")) {
        ImageU8 img = load_image(dir + "/" + view.at("image").get<std::string>());
        scene.images.push_back(to_luminance(img));
        CameraFile cf = read_camera_file(dir + "/" + view.at("camera").get<std::string>());
        scene.cams.push_back(cf.cam);
        scene.spec.depth_min = cf.depth_min;
        scene.spec.depth_range_len = cf.depth_range_length;
    }
    scene.spec.num_views = static_cast<int>(scene.images.size());
    scene.gt_depth = read_pfm(dir + "/" + manifest.at("gt_depth").get<std::string>());
    scene.gt_mask = Grid(scene.gt_depth.width, scene.gt_depth.height, 0.0);
    for (size_t i = 0; i < scene.gt_depth.data.size(); ++i)
        if (scene.gt_depth.data[i] > 0.0) scene.gt_mask.data[i] = 1.0;
    return scene;
}

} // namespace mvsweep
