#include "pglf/geometry.hpp"

#include <cmath>
#include <string>

namespace pglf {

std::size_t PointCloud::valid_count() const
{
    std::size_t n = 0;
    for (auto v : valid) n += v != 0;
    return n;
}

ProjectionMatrix normalize_projection(const Mat34& m, Device role)
{
    const double n = m.block<1, 3>(2, 0).norm();
    if (!(n > 0) || !std::isfinite(n)) throw NumericalError("projection matrix has degenerate third row");
    ProjectionMatrix out{m / n, role};
    if (out.m(2, 2) < 0) out.m = -out.m;
    return out;
}

Vec2 project(const ProjectionMatrix& m, const Vec3& p)
{
    const Eigen::Vector4d h(p.x(), p.y(), p.z(), 1.0);
    const Vec3 r = m.m * h;
    if (std::abs(r.z()) < 1e-12) throw NumericalError("point projects to infinity");
    return {r.x() / r.z(), r.y() / r.z()};
}

namespace {

// Similarity transform that moves points to the origin with the requested RMS radius.
template <int Dim>
Eigen::Matrix<double, Dim + 1, Dim + 1> conditioning(const std::vector<Eigen::Matrix<double, Dim, 1>>& pts)
{
    Eigen::Matrix<double, Dim, 1> mean = Eigen::Matrix<double, Dim, 1>::Zero();
    for (const auto& p : pts) mean += p;
    mean /= static_cast<double>(pts.size());
    double ms = 0;
    for (const auto& p : pts) ms += (p - mean).squaredNorm();
    ms /= static_cast<double>(pts.size());
    const double s = ms > 0 ? std::sqrt(Dim / ms) : 1.0;
    Eigen::Matrix<double, Dim + 1, Dim + 1> t = Eigen::Matrix<double, Dim + 1, Dim + 1>::Identity();
    t.template topLeftCorner<Dim, Dim>() *= s;
    t.template topRightCorner<Dim, 1>() = -s * mean;
    return t;
}

} // namespace

CalibrationFit calibrate_projection(std::span<const Correspondence> correspondences)
{
    const std::size_t n = correspondences.size();
    if (n < 6)
        throw ValidationError("calibrate_projection: underdetermined, need at least 6 correspondences, got " +
                              std::to_string(n));
    const Device role = correspondences.front().space;
    std::vector<Vec3> world;
    std::vector<Vec2> image;
    world.reserve(n);
    image.reserve(n);
    for (const auto& c : correspondences) {
        if (!c.world.allFinite() || !c.image.allFinite())
            throw ValidationError("calibrate_projection: non-finite correspondence");
        world.push_back(c.world);
        image.push_back(c.image);
    }

    Vec3 centroid = Vec3::Zero();
    for (const auto& p : world) centroid += p;
    centroid /= static_cast<double>(n);
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const auto& p : world) cov += (p - centroid) * (p - centroid).transpose();
    const Eigen::Vector3d ev = Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(cov).eigenvalues();
    if (!(ev(2) > 0) || ev(0) <= 1e-12 * ev(2))
        throw ValidationError("calibrate_projection: rank-deficient system (coplanar world points)");

    const Eigen::Matrix4d tw = conditioning<3>(world);
    const Eigen::Matrix3d ti = conditioning<2>(image);

    Eigen::MatrixXd a(2 * n, 12);
    for (std::size_t i = 0; i < n; ++i) {
        const Eigen::Vector4d X = tw * world[i].homogeneous();
        const Vec3 x = ti * image[i].homogeneous();
        const double u = x.x() / x.z(), v = x.y() / x.z();
        a.row(2 * i) << X.transpose(), Eigen::RowVector4d::Zero(), -u * X.transpose();
        a.row(2 * i + 1) << Eigen::RowVector4d::Zero(), X.transpose(), -v * X.transpose();
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    if (sv(10) <= 1e-12 * sv(0))
        throw ValidationError("calibrate_projection: rank-deficient system");
    const Eigen::VectorXd h = svd.matrixV().col(11);
    Mat34 mn;
    mn << h.segment<4>(0).transpose(), h.segment<4>(4).transpose(), h.segment<4>(8).transpose();
    const Mat34 m = ti.inverse() * mn * tw;

    CalibrationFit fit;
    fit.matrix = normalize_projection(m, role);
    double depth_sign = 0;
    for (const auto& p : world) depth_sign += fit.matrix.m.row(2).dot(p.homogeneous());
    if (depth_sign < 0) fit.matrix.m = -fit.matrix.m;

    double ss = 0, sa = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = (project(fit.matrix, world[i]) - image[i]).norm();
        ss += e * e;
        sa += e;
    }
    fit.rmse = std::sqrt(ss / static_cast<double>(n));
    fit.mean_residual = sa / static_cast<double>(n);
    return fit;
}

Vec3 triangulate(const ProjectionMatrix& mc, const ProjectionMatrix& mp, const Vec2& xc, double row_p)
{
    Eigen::Matrix3d g;
    Vec3 h;
    g.row(0) = mc.m.block<1, 3>(0, 0) - xc.x() * mc.m.block<1, 3>(2, 0);
    g.row(1) = mc.m.block<1, 3>(1, 0) - xc.y() * mc.m.block<1, 3>(2, 0);
    g.row(2) = mp.m.block<1, 3>(1, 0) - row_p * mp.m.block<1, 3>(2, 0);
    h << xc.x() * mc.m(2, 3) - mc.m(0, 3), xc.y() * mc.m(2, 3) - mc.m(1, 3), row_p * mp.m(2, 3) - mp.m(1, 3);
    const double scale = g.row(0).norm() * g.row(1).norm() * g.row(2).norm();
    const double det = g.determinant();
    if (!(scale > 0) || std::abs(det) <= 1e-12 * scale) throw NumericalError("triangulate: singular system");
    return g.partialPivLu().solve(h);
}

Vec3 back_project_at_depth(const ProjectionMatrix& m, const Vec2& x, double Z)
{
    Eigen::Matrix2d g;
    Vec2 h;
    for (int r = 0; r < 2; ++r) {
        const double xr = x(r);
        g(r, 0) = m.m(r, 0) - xr * m.m(2, 0);
        g(r, 1) = m.m(r, 1) - xr * m.m(2, 1);
        h(r) = xr * (m.m(2, 2) * Z + m.m(2, 3)) - (m.m(r, 2) * Z + m.m(r, 3));
    }
    const double det = g.determinant();
    if (std::abs(det) <= 1e-12 * g.row(0).norm() * g.row(1).norm())
        throw NumericalError("back_project_at_depth: singular system");
    const Vec2 xy = g.inverse() * h;
    return {xy.x(), xy.y(), Z};
}

Vec3 camera_center(const ProjectionMatrix& m)
{
    const Eigen::Matrix3d a = m.m.block<3, 3>(0, 0);
    return -a.partialPivLu().solve(m.m.col(3));
}

} // namespace pglf
