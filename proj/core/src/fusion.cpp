#include "mvsweep/fusion.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "mvsweep/error.hpp"
#include "mvsweep/parallel.hpp"

namespace mvsweep {

namespace {

// project without throwing; false when the point is at or behind the camera
inline bool project_checked(const CameraParams& cam, const Eigen::Vector3d& X,
                            Eigen::Vector2d& px, double& depth) {
    Eigen::Vector3d xc = cam.R * X + cam.t;
    if (xc.z() <= 1e-12) return false;
    px.x() = (cam.K(0, 0) * xc.x() + cam.K(0, 1) * xc.y() + cam.K(0, 2) * xc.z()) / xc.z();
    px.y() = (cam.K(1, 1) * xc.y() + cam.K(1, 2) * xc.z()) / xc.z();
    depth = xc.z();
    return true;
}

} // namespace

PointCloud fuse(std::span<const Grid> depth_maps, std::span<const CameraParams> cams,
                std::span<const Grid> images, const FusionParams& params, int threads) {
    if (depth_maps.size() < 2) fail("TooFewViews", "fusion needs at least two views");
    require(depth_maps.size() == cams.size() && depth_maps.size() == images.size(),
            "ShapeMismatch", "depth/camera/image count mismatch");

    int V = static_cast<int>(depth_maps.size());
    PointCloud cloud;

    std::vector<Eigen::Matrix3d> Kinv;
    for (const auto& cam : cams) Kinv.push_back(cam.K.inverse());

    for (int r = 0; r < V; ++r) {
        const Grid& dm = depth_maps[static_cast<size_t>(r)];
        const CameraParams& rc = cams[static_cast<size_t>(r)];
        std::vector<std::vector<PointCloud::Point>> rows(static_cast<size_t>(dm.height));

        parallel_for(0, dm.height, threads, [&](int y) {
            auto& out = rows[static_cast<size_t>(y)];
            for (int x = 0; x < dm.width; ++x) {
                double d = dm.at(x, y);
                if (d <= 0.0) continue;
                Eigen::Vector3d X =
                    rc.R.transpose() *
                    (d * (Kinv[static_cast<size_t>(r)] * Eigen::Vector3d(x, y, 1.0)) - rc.t);
                Eigen::Vector3d sum = X;
                int consistent = 0;
                for (int i = 0; i < V; ++i) {
                    if (i == r) continue;
                    const CameraParams& ic = cams[static_cast<size_t>(i)];
                    Eigen::Vector2d q;
                    double d_proj;
                    if (!project_checked(ic, X, q, d_proj)) continue;
                    int qx = static_cast<int>(std::lround(q.x()));
                    int qy = static_cast<int>(std::lround(q.y()));
                    const Grid& dmi = depth_maps[static_cast<size_t>(i)];
                    if (qx < 0 || qy < 0 || qx >= dmi.width || qy >= dmi.height) continue;
                    double di = dmi.at(qx, qy);
                    if (di <= 0.0) continue;
                    if (std::abs(di - d_proj) / d_proj >= params.rel_depth_tol) continue;
                    Eigen::Vector3d Xi =
                        ic.R.transpose() *
                        (di * (Kinv[static_cast<size_t>(i)] * Eigen::Vector3d(q.x(), q.y(), 1.0)) -
                         ic.t);
                    Eigen::Vector2d back;
                    double db;
                    if (!project_checked(rc, Xi, back, db)) continue;
                    double err = std::hypot(back.x() - x, back.y() - y);
                    if (err >= params.reproj_tol_px) continue;
                    ++consistent;
                    sum += Xi;
                }
                if (consistent < params.min_consistent_views) continue;
                Eigen::Vector3d fused = sum / (1.0 + consistent);
                PointCloud::Point p;
                p.x = fused.x();
                p.y = fused.y();
                p.z = fused.z();
                double v = images[static_cast<size_t>(r)].at(x, y);
                uint8_t g = static_cast<uint8_t>(std::clamp(v, 0.0, 1.0) * 255.0 + 0.5);
                p.r = p.g = p.b = g;
                out.push_back(p);
            }
        });

        for (const auto& row : rows)
            cloud.points.insert(cloud.points.end(), row.begin(), row.end());
    }
    return cloud;
}

void write_ply(const PointCloud& pc, const std::string& path, PlyFormat format) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("IoError", "cannot open for writing: " + path);
    out << "ply\nformat "
        << (format == PlyFormat::ascii ? "ascii" : "binary_little_endian")
        << " 1.0\nelement vertex " << pc.points.size()
        << "\nproperty float x\nproperty float y\nproperty float z\n"
           "property uchar red\nproperty uchar green\nproperty uchar blue\n"
           "end_header\n";
    if (format == PlyFormat::ascii) {
        char buf[160];
        for (const auto& p : pc.points) {
            std::snprintf(buf, sizeof buf, "%.9g %.9g %.9g %d %d %d\n",
                          static_cast<double>(static_cast<float>(p.x)),
                          static_cast<double>(static_cast<float>(p.y)),
                          static_cast<double>(static_cast<float>(p.z)), p.r, p.g, p.b);
            out << buf;
        }
    } else {
        for (const auto& p : pc.points) {
            float xyz[3] = {static_cast<float>(p.x), static_cast<float>(p.y),
                            static_cast<float>(p.z)};
            out.write(reinterpret_cast<const char*>(xyz), 12);
            uint8_t rgb[3] = {p.r, p.g, p.b};
            out.write(reinterpret_cast<const char*>(rgb), 3);
        }
    }
    if (!out) fail("IoError", "short write: " + path);
}

PointCloud read_ply(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("IoError", "cannot open: " + path);
    std::string line;
    std::getline(in, line);
    if (line != "ply") fail("IoError", "not a PLY file: " + path);
    bool binary = false;
    size_t count = 0;
    std::vector<std::string> props;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string tok;
        ls >> tok;
        if (tok == "format") {
            std::string fmt;
            ls >> fmt;
            binary = fmt == "binary_little_endian";
        } else if (tok == "element") {
            std::string what;
            ls >> what >> count;
            if (what != "vertex") fail("IoError", "unsupported PLY element: " + what);
        } else if (tok == "property") {
            std::string type, name;
            ls >> type >> name;
            props.push_back(name);
        } else if (tok == "end_header") {
            break;
        }
    }
    const std::vector<std::string> expected{"x", "y", "z", "red", "green", "blue"};
    if (props != expected) fail("IoError", "unsupported PLY property layout in " + path);

    PointCloud pc;
    pc.points.reserve(count);
    for (size_t i = 0; i < count; ++i) {
        PointCloud::Point p;
        if (binary) {
            float xyz[3];
            uint8_t rgb[3];
            in.read(reinterpret_cast<char*>(xyz), 12);
            in.read(reinterpret_cast<char*>(rgb), 3);
            if (!in) fail("IoError", "truncated PLY data: " + path);
            p.x = xyz[0];
            p.y = xyz[1];
            p.z = xyz[2];
            p.r = rgb[0];
            p.g = rgb[1];
            p.b = rgb[2];
        } else {
            double x, y, z;
            int r, g, b;
            in >> x >> y >> z >> r >> g >> b;
            if (!in) fail("IoError", "truncated PLY data: " + path);
            p.x = x;
            p.y = y;
            p.z = z;
            p.r = static_cast<uint8_t>(r);
            p.g = static_cast<uint8_t>(g);
            p.b = static_cast<uint8_t>(b);
        }
        pc.points.push_back(p);
    }
    return pc;
}

} // namespace mvsweep
