#pragma once

#include <Eigen/Dense>
#include <array>
#include <utility>
#include <vector>

#include "mvsweep/error.hpp"

namespace mvsweep {

// Calibrated pinhole camera, world-to-camera convention: x_cam = R*X + t,
// camera center C = -R^T t. n is the principal axis in world coordinates
// (third row of R, transposed).
struct CameraParams {
    Eigen::Matrix3d K;
    Eigen::Matrix3d R;
    Eigen::Vector3d t;
    Eigen::Vector3d n;

    static CameraParams from_krt(const Eigen::Matrix3d& K,
                                 const Eigen::Matrix3d& R,
                                 const Eigen::Vector3d& t);

    Eigen::Vector3d center() const { return -R.transpose() * t; }

    // Throws InvalidCamera when R is not a proper rotation (1e-9), K is not
    // upper-triangular with positive diagonal, or n drifted from R^T e_z.
    void validate() const;

    // Intrinsics rescaled for a resolution change by `factor` (first two
    // rows of K scaled); extrinsics unchanged.
    CameraParams scaled(double factor) const;
};

// 3x3 projective map, row-major, normalized so the bottom-right entry is 1.
struct Homography3x3 {
    std::array<double, 9> m{};

    // Normalizes by the bottom-right entry; rejects a zero entry there.
    static Homography3x3 from_matrix(const Eigen::Matrix3d& H);

    Eigen::Matrix3d matrix() const;

    // Maps pixel (x, y); throws DegenerateMapping if the result is at infinity.
    Eigen::Vector2d apply(double x, double y) const;
};

// pixel = perspective division of K*(R*X + t); depth = camera-frame z.
// Throws BehindCamera when z <= 1e-12.
std::pair<Eigen::Vector2d, double> project(const CameraParams& cam,
                                           const Eigen::Vector3d& point);

// Inverse of project at a given depth: X = R^T (depth * K^{-1} p~ - t).
Eigen::Vector3d backproject(const CameraParams& cam, const Eigen::Vector2d& pixel,
                            double depth);

// H_i(d) = K_i R_i (I - (t_1 - t_i) n_1^T / d) R_1^T K_1^{-1}, mapping
// reference pixels to source pixels of the world point at depth d along
// the reference ray. Throws NonPositiveDepth.
Homography3x3 homography_first_stage(const CameraParams& ref, const CameraParams& src,
                                     double depth);

// Same map evaluated at d_prev + delta. Throws NonPositiveDepth.
Homography3x3 homography_residual(const CameraParams& ref, const CameraParams& src,
                                  double d_prev, double delta);

// `count` evenly spaced depths with inclusive endpoints, strictly
// increasing; count == 1 returns the midpoint. Throws EmptyRange / ZeroCount.
std::vector<double> sample_depth_planes(double low, double high, int count);

// Depth-parametrized sweep map H(d) = A - B / d for one (ref, src) pair;
// used by the volume builder where hypotheses vary per pixel.
struct SweepHomography {
    Eigen::Matrix3d A;
    Eigen::Matrix3d B;

    static SweepHomography between(const CameraParams& ref, const CameraParams& src);

    Eigen::Matrix3d at(double depth) const { return A - B / depth; }
};

} // namespace mvsweep
