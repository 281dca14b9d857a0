#include "mvsweep/io.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace mvsweep {

namespace {

void skip_pnm_whitespace(std::istream& in) {
    for (;;) {
        int c = in.peek();
        if (c == '#') {
            std::string line;
            std::getline(in, line);
        } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
            in.get();
        } else {
            return;
        }
    }
}

int read_pnm_int(std::istream& in) {
    skip_pnm_whitespace(in);
    int v = -1;
    in >> v;
    return v;
}

void write_pnm(const std::string& path, const ImageU8& img, bool color) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("IoError", "cannot open for writing: " + path);
    out << (color ? "P6" : "P5") << "\n"
        << img.width << " " << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.data.data()),
              static_cast<std::streamsize>(img.data.size()));
    if (!out) fail("IoError", "short write: " + path);
}

bool host_is_little_endian() {
    uint16_t probe = 1;
    return *reinterpret_cast<const uint8_t*>(&probe) == 1;
}

void write_f32(std::ostream& out, float v) {
    out.write(reinterpret_cast<const char*>(&v), 4);
}

float read_f32(std::istream& in) {
    float v = 0.0f;
    in.read(reinterpret_cast<char*>(&v), 4);
    return v;
}

void write_u32(std::ostream& out, uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), 4);
}

uint32_t read_u32(std::istream& in) {
    uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    return v;
}

void write_float_blob(const std::string& path, const char magic[4],
                      uint32_t a, uint32_t b, uint32_t c,
                      const std::vector<double>& data) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("IoError", "cannot open for writing: " + path);
    out.write(magic, 4);
    write_u32(out, a);
    write_u32(out, b);
    write_u32(out, c);
    for (double v : data) write_f32(out, static_cast<float>(v));
    if (!out) fail("IoError", "short write: " + path);
}

void read_float_blob(const std::string& path, const char magic[4],
                     uint32_t& a, uint32_t& b, uint32_t& c,
                     std::vector<double>& data) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("IoError", "cannot open: " + path);
    char got[4];
    in.read(got, 4);
    if (!in || std::memcmp(got, magic, 4) != 0)
        fail("IoError", "bad magic in " + path);
    a = read_u32(in);
    b = read_u32(in);
    c = read_u32(in);
    size_t count = static_cast<size_t>(a) * b * c;
    data.resize(count);
    for (size_t i = 0; i < count; ++i) data[i] = read_f32(in);
    if (!in) fail("IoError", "truncated file: " + path);
}

} // namespace

ImageU8 load_image(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("IoError", "cannot open: " + path);
    char p = 0, kind = 0;
    in.get(p);
    in.get(kind);
    if (p != 'P' || (kind != '5' && kind != '6'))
        fail("IoError", "not a binary PGM/PPM: " + path);
    int w = read_pnm_int(in);
    int h = read_pnm_int(in);
    int maxval = read_pnm_int(in);
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255)
        fail("IoError", "unsupported PNM header in " + path);
    in.get(); // single whitespace byte after maxval
    ImageU8 img(w, h, kind == '6' ? 3 : 1);
    in.read(reinterpret_cast<char*>(img.data.data()),
            static_cast<std::streamsize>(img.data.size()));
    if (!in) fail("IoError", "truncated image data: " + path);
    return img;
}

void save_pgm(const std::string& path, const ImageU8& img) {
    require(img.channels == 1, "IoError", "PGM requires a single channel");
    write_pnm(path, img, false);
}

void save_ppm(const std::string& path, const ImageU8& img) {
    require(img.channels == 3, "IoError", "PPM requires three channels");
    write_pnm(path, img, true);
}

Grid read_pfm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("IoError", "cannot open: " + path);
    std::string tag;
    in >> tag;
    if (tag != "Pf") fail("IoError", "not a grayscale PFM: " + path);
    int w = 0, h = 0;
    double scale = 0.0;
    in >> w >> h >> scale;
    in.get(); // newline before the raster
    if (w <= 0 || h <= 0) fail("IoError", "bad PFM dimensions in " + path);
    if (scale >= 0.0) fail("IoError", "big-endian PFM unsupported: " + path);
    Grid g(w, h);
    std::vector<float> row(static_cast<size_t>(w));
    for (int y = h - 1; y >= 0; --y) { // file rows are bottom-up
        in.read(reinterpret_cast<char*>(row.data()),
                static_cast<std::streamsize>(row.size() * 4));
        if (!in) fail("IoError", "truncated PFM data: " + path);
        for (int x = 0; x < w; ++x) g.at(x, y) = row[static_cast<size_t>(x)];
    }
    return g;
}

void write_pfm(const std::string& path, const Grid& g) {
    require(host_is_little_endian(), "IoError", "PFM writer assumes little-endian host");
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("IoError", "cannot open for writing: " + path);
    out << "Pf\n" << g.width << " " << g.height << "\n-1.0\n";
    for (int y = g.height - 1; y >= 0; --y)
        for (int x = 0; x < g.width; ++x)
            write_f32(out, static_cast<float>(g.at(x, y)));
    if (!out) fail("IoError", "short write: " + path);
}

CameraFile read_camera_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("IoError", "cannot open: " + path);
    std::string tag;
    in >> tag;
    if (tag != "extrinsic") fail("IoError", "missing extrinsic block in " + path);
    Eigen::Matrix4d E;
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) in >> E(r, c);
    in >> tag;
    if (tag != "intrinsic") fail("IoError", "missing intrinsic block in " + path);
    Eigen::Matrix3d K;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) in >> K(r, c);
    CameraFile cf;
    in >> cf.depth_min >> cf.depth_range_length;
    if (!in) fail("IoError", "truncated camera file: " + path);
    cf.cam = CameraParams::from_krt(K, E.topLeftCorner<3, 3>(), E.topRightCorner<3, 1>());
    return cf;
}

void write_camera_file(const std::string& path, const CameraFile& cf) {
    std::ofstream out(path);
    if (!out) fail("IoError", "cannot open for writing: " + path);
    out.precision(17);
    out << "extrinsic\n";
    for (int r = 0; r < 3; ++r)
        out << cf.cam.R(r, 0) << " " << cf.cam.R(r, 1) << " " << cf.cam.R(r, 2)
            << " " << cf.cam.t(r) << "\n";
    out << "0 0 0 1\n";
    out << "intrinsic\n";
    for (int r = 0; r < 3; ++r)
        out << cf.cam.K(r, 0) << " " << cf.cam.K(r, 1) << " " << cf.cam.K(r, 2) << "\n";
    out << cf.depth_min << " " << cf.depth_range_length << "\n";
    if (!out) fail("IoError", "short write: " + path);
}

void write_fmap(const std::string& path, const FeatureMap& f) {
    write_float_blob(path, "FMAP", static_cast<uint32_t>(f.width),
                     static_cast<uint32_t>(f.height),
                     static_cast<uint32_t>(f.channels), f.data);
}

FeatureMap read_fmap(const std::string& path) {
    FeatureMap f;
    uint32_t w, h, c;
    read_float_blob(path, "FMAP", w, h, c, f.data);
    f.width = static_cast<int>(w);
    f.height = static_cast<int>(h);
    f.channels = static_cast<int>(c);
    return f;
}

void write_vol(const std::string& path, const Volume& v) {
    write_float_blob(path, "VOL1", static_cast<uint32_t>(v.width),
                     static_cast<uint32_t>(v.height),
                     static_cast<uint32_t>(v.planes), v.data);
}

Volume read_vol(const std::string& path) {
    Volume v;
    uint32_t w, h, d;
    read_float_blob(path, "VOL1", w, h, d, v.data);
    v.width = static_cast<int>(w);
    v.height = static_cast<int>(h);
    v.planes = static_cast<int>(d);
    return v;
}

} // namespace mvsweep
