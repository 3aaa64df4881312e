#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <vector>

#include "pglf/error.hpp"

namespace pglf {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat34 = Eigen::Matrix<double, 3, 4>;

enum class Device { Camera, Projector };

/// 3x4 pinhole projection. Scale is fixed so that the third row's leading
/// 3-vector has unit norm and points along positive depth; the denominator of
/// project() is then the metric depth along the principal axis.
struct ProjectionMatrix {
    Mat34 m = Mat34::Zero();
    Device role = Device::Camera;
};

struct Correspondence {
    Vec3 world = Vec3::Zero();
    Vec2 image = Vec2::Zero();
    Device space = Device::Camera;
};

struct CalibrationFit {
    ProjectionMatrix matrix;
    double rmse = 0;          ///< reprojection RMSE in pixels
    double mean_residual = 0; ///< mean reprojection distance in pixels
};

/// Point set, optionally organised on a width x height grid (row-major).
/// Invalid sites carry NaN coordinates.
struct PointCloud {
    int width = 0;
    int height = 0;
    std::vector<Vec3> points;
    std::vector<std::uint8_t> valid;
    std::vector<float> quality;

    std::size_t size() const { return points.size(); }
    std::size_t valid_count() const;
    bool organized() const { return width > 0 && height > 0; }
};

/// Rescales a homogeneous projection to the canonical scale.
ProjectionMatrix normalize_projection(const Mat34& m, Device role);

Vec2 project(const ProjectionMatrix& m, const Vec3& p);

/// Linear (DLT) calibration from at least six non-coplanar correspondences.
CalibrationFit calibrate_projection(std::span<const Correspondence> correspondences);

/// Intersects the camera ray through xc with the projector row plane y^p.
Vec3 triangulate(const ProjectionMatrix& mc, const ProjectionMatrix& mp, const Vec2& xc, double row_p);

/// Point on the ray through pixel x whose world Z coordinate equals Z.
Vec3 back_project_at_depth(const ProjectionMatrix& m, const Vec2& x, double Z);

/// Camera centre (right null vector of m).
Vec3 camera_center(const ProjectionMatrix& m);

} // namespace pglf
