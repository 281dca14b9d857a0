#include "mvsweep/geometry.hpp"

#include <cmath>

namespace mvsweep {

CameraParams CameraParams::from_krt(const Eigen::Matrix3d& K,
                                    const Eigen::Matrix3d& R,
                                    const Eigen::Vector3d& t) {
    CameraParams cam;
    cam.K = K;
    cam.R = R;
    cam.t = t;
    cam.n = R.row(2).transpose();
    cam.validate();
    return cam;
}

void CameraParams::validate() const {
    if ((R.transpose() * R - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-9)
        fail("InvalidCamera", "R is not orthonormal");
    if (std::abs(R.determinant() - 1.0) > 1e-9)
        fail("InvalidCamera", "det(R) != +1");
    if (std::abs(K(1, 0)) > 0.0 || std::abs(K(2, 0)) > 0.0 || std::abs(K(2, 1)) > 0.0)
        fail("InvalidCamera", "K is not upper-triangular");
    if (K(0, 0) <= 0.0 || K(1, 1) <= 0.0 || K(2, 2) <= 0.0)
        fail("InvalidCamera", "K diagonal must be positive");
    if (std::abs(n.norm() - 1.0) > 1e-12)
        fail("InvalidCamera", "principal axis is not unit length");
    if ((n - R.row(2).transpose()).cwiseAbs().maxCoeff() > 1e-12)
        fail("InvalidCamera", "principal axis disagrees with R");
}

CameraParams CameraParams::scaled(double factor) const {
    require(factor > 0.0, "InvalidCamera", "scale factor must be positive");
    CameraParams cam = *this;
    cam.K.row(0) *= factor;
    cam.K.row(1) *= factor;
    return cam;
}

Homography3x3 Homography3x3::from_matrix(const Eigen::Matrix3d& H) {
    double pivot = H(2, 2);
    if (std::abs(pivot) < 1e-300)
        fail("DegenerateHomography", "bottom-right entry is zero");
    Homography3x3 out;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            out.m[static_cast<size_t>(r) * 3 + c] = H(r, c) / pivot;
    return out;
}

Eigen::Matrix3d Homography3x3::matrix() const {
    Eigen::Matrix3d H;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            H(r, c) = m[static_cast<size_t>(r) * 3 + c];
    return H;
}

Eigen::Vector2d Homography3x3::apply(double x, double y) const {
    double u = m[0] * x + m[1] * y + m[2];
    double v = m[3] * x + m[4] * y + m[5];
    double w = m[6] * x + m[7] * y + m[8];
    if (std::abs(w) < 1e-300)
        fail("DegenerateMapping", "mapped point at infinity");
    return {u / w, v / w};
}

std::pair<Eigen::Vector2d, double> project(const CameraParams& cam,
                                           const Eigen::Vector3d& point) {
    Eigen::Vector3d xc = cam.R * point + cam.t;
    if (xc.z() <= 1e-12)
        fail("BehindCamera", "point has non-positive camera-frame depth");
    Eigen::Vector3d p = cam.K * xc;
    return {Eigen::Vector2d(p.x() / p.z(), p.y() / p.z()), xc.z()};
}

Eigen::Vector3d backproject(const CameraParams& cam, const Eigen::Vector2d& pixel,
                            double depth) {
    Eigen::Vector3d ph(pixel.x(), pixel.y(), 1.0);
    return cam.R.transpose() * (depth * (cam.K.inverse() * ph) - cam.t);
}

Homography3x3 homography_first_stage(const CameraParams& ref, const CameraParams& src,
                                     double depth) {
    require(depth > 0.0, "NonPositiveDepth", "sweep depth must be positive");
    SweepHomography sh = SweepHomography::between(ref, src);
    return Homography3x3::from_matrix(sh.at(depth));
}

Homography3x3 homography_residual(const CameraParams& ref, const CameraParams& src,
                                  double d_prev, double delta) {
    double d = d_prev + delta;
    require(d > 0.0, "NonPositiveDepth", "d_prev + delta must be positive");
    return homography_first_stage(ref, src, d);
}

std::vector<double> sample_depth_planes(double low, double high, int count) {
    if (count < 1) fail("ZeroCount", "plane count must be >= 1");
    if (high < low) fail("EmptyRange", "range upper bound below lower bound");
    if (count == 1) return {0.5 * (low + high)};
    if (!(low < high)) fail("EmptyRange", "degenerate range cannot hold multiple planes");
    std::vector<double> depths(static_cast<size_t>(count));
    double step = (high - low) / (count - 1);
    for (int j = 0; j < count; ++j) depths[static_cast<size_t>(j)] = low + step * j;
    depths.front() = low;
    depths.back() = high;
    return depths;
}

SweepHomography SweepHomography::between(const CameraParams& ref, const CameraParams& src) {
    SweepHomography sh;
    Eigen::Matrix3d right = ref.R.transpose() * ref.K.inverse();
    Eigen::Matrix3d left = src.K * src.R;
    sh.A = left * right;
    // the translation difference enters as negated camera centers
    // (R^T t), which reduces to the raw translations for identity rotations
    Eigen::Vector3d tdiff = src.center() - ref.center();
    sh.B = left * (tdiff * ref.n.transpose()) * right;
    return sh;
}

} // namespace mvsweep
