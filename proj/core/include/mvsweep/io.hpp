#pragma once

#include <string>

#include "mvsweep/geometry.hpp"
#include "mvsweep/grid.hpp"

namespace mvsweep {

// 8-bit binary PGM (P5) / PPM (P6), maxval 255.
ImageU8 load_image(const std::string& path);
void save_pgm(const std::string& path, const ImageU8& img);
void save_ppm(const std::string& path, const ImageU8& img);

// Grayscale PFM: "Pf" header, scale -1.0 (little-endian), rows bottom-up,
// 32-bit floats.
Grid read_pfm(const std::string& path);
void write_pfm(const std::string& path, const Grid& g);

// Per-view camera text file:
//   line 1: "extrinsic", lines 2-5: 4x4 row-major world-to-camera matrix,
//   line 6: "intrinsic", lines 7-9: 3x3 K,
//   line 10: "depth_min depth_range_length" (scene units).
struct CameraFile {
    CameraParams cam;
    double depth_min = 0.0;
    double depth_range_length = 0.0;
};
CameraFile read_camera_file(const std::string& path);
void write_camera_file(const std::string& path, const CameraFile& cf);

// Debug dumps: 16-byte header (magic, u32 W, H, C|D little-endian), then
// 32-bit floats in the in-memory planar order.
void write_fmap(const std::string& path, const FeatureMap& f);
FeatureMap read_fmap(const std::string& path);
void write_vol(const std::string& path, const Volume& v);
Volume read_vol(const std::string& path);

} // namespace mvsweep
