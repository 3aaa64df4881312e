#include <gtest/gtest.h>

#include <random>

#include "pglf/geometry.hpp"
#include "pglf/metrics.hpp"

using namespace pglf;

namespace {

Mat34 camera_matrix(double f, double cx, double cy)
{
    Mat34 m;
    m << f, 0, cx, 0, 0, f, cy, 0, 0, 0, 1, 0;
    return m;
}

Mat34 projector_matrix()
{
    // looks at (0, 0, 400) from (0, -150, 0)
    const Vec3 C(0, -150, 0), T(0, 0, 400);
    const Vec3 z = (T - C).normalized();
    const Vec3 x = Vec3::UnitX();
    const Vec3 y = z.cross(x);
    Eigen::Matrix3d R;
    R.row(0) = x;
    R.row(1) = y;
    R.row(2) = z;
    Eigen::Matrix3d K;
    K << 1700, 0, 456, 0, 1700, 570, 0, 0, 1;
    Mat34 Rt;
    Rt << R, -R * C;
    return K * Rt;
}

Mat34 random_matrix(std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> u(-1, 1);
    Mat34 m;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 4; ++j) m(i, j) = u(rng);
    m.row(2) << 0.1 * u(rng), 0.1 * u(rng), 1, 0.2 * u(rng);
    return m;
}

std::vector<Correspondence> synthesize(const ProjectionMatrix& m, int n, std::mt19937_64& rng, double scale = 1)
{
    std::uniform_real_distribution<double> X(-60, 60), Z(360, 450);
    std::vector<Correspondence> out;
    for (int i = 0; i < n; ++i) {
        Correspondence c;
        c.world = Vec3(X(rng), X(rng), Z(rng)) * scale;
        c.image = project(m, c.world);
        out.push_back(c);
    }
    return out;
}

} // namespace

TEST(Geometry, PinholeAtOrigin)
{
    Mat34 m = Mat34::Zero();
    m.leftCols<3>().setIdentity();
    const ProjectionMatrix p = normalize_projection(m, Device::Camera);
    const Vec2 x = project(p, {0, 0, 1});
    EXPECT_NEAR(x.x(), 0, 1e-15);
    EXPECT_NEAR(x.y(), 0, 1e-15);
}

TEST(Geometry, ProjectMatchesHomogeneousOracle)
{
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-50, 50);
    for (int i = 0; i < 1000; ++i) {
        const Mat34 m = random_matrix(rng);
        const ProjectionMatrix p = normalize_projection(m, Device::Camera);
        const Vec3 X(u(rng), u(rng), 400 + u(rng));
        const Eigen::Vector3d h = m * X.homogeneous();
        const Vec2 oracle = h.hnormalized();
        const Vec2 got = project(p, X);
        ASSERT_NEAR(got.x(), oracle.x(), 1e-12 * std::max(1.0, std::abs(oracle.x())));
        ASSERT_NEAR(got.y(), oracle.y(), 1e-12 * std::max(1.0, std::abs(oracle.y())));
    }
}

TEST(Geometry, ProjectiveInvarianceAlongRay)
{
    const ProjectionMatrix p = normalize_projection(projector_matrix(), Device::Projector);
    const Vec3 C = camera_center(p);
    const Vec3 X(12, -7, 395);
    const Vec2 ref = project(p, X);
    for (double lambda : {0.5, 2.0, 7.0}) {
        const Vec2 x = project(p, C + lambda * (X - C));
        EXPECT_NEAR(x.x(), ref.x(), 1e-9);
        EXPECT_NEAR(x.y(), ref.y(), 1e-9);
    }
}

TEST(Geometry, DegeneratePointThrows)
{
    const ProjectionMatrix p = normalize_projection(camera_matrix(1000, 320, 240), Device::Camera);
    EXPECT_THROW(project(p, {1, 2, 0}), NumericalError);
}

TEST(Geometry, CalibrationRecoversNoiselessMatrix)
{
    std::mt19937_64 rng(4);
    for (const Mat34& m : {camera_matrix(1200, 640, 360), projector_matrix()}) {
        const ProjectionMatrix truth = normalize_projection(m, Device::Camera);
        const auto corr = synthesize(truth, 40, rng);
        const CalibrationFit fit = calibrate_projection(corr);
        const double s = truth.m.norm();
        EXPECT_LE((fit.matrix.m - truth.m).norm() / s, 1e-9);
        EXPECT_LE(fit.rmse, 1e-6);
    }
}

TEST(Geometry, CalibrationNoisyMatchesDenseOracle)
{
    std::mt19937_64 rng(9);
    std::normal_distribution<double> n01;
    const ProjectionMatrix truth = normalize_projection(projector_matrix(), Device::Projector);
    auto corr = synthesize(truth, 100, rng);
    for (auto& c : corr) c.image += 0.1 * Vec2(n01(rng), n01(rng));
    const CalibrationFit fit = calibrate_projection(corr);

    // oracle: homogeneous DLT with Hartley normalisation solved by dense SVD
    Vec3 mw = Vec3::Zero();
    Vec2 mi = Vec2::Zero();
    for (const auto& c : corr) {
        mw += c.world;
        mi += c.image;
    }
    mw /= corr.size();
    mi /= corr.size();
    double sw = 0, si = 0;
    for (const auto& c : corr) {
        sw += (c.world - mw).norm();
        si += (c.image - mi).norm();
    }
    sw = std::sqrt(3.0) * corr.size() / sw;
    si = std::sqrt(2.0) * corr.size() / si;
    Eigen::MatrixXd A(2 * corr.size(), 12);
    for (std::size_t i = 0; i < corr.size(); ++i) {
        const Eigen::Vector4d X = ((corr[i].world - mw) * sw).homogeneous();
        const Vec2 x = (corr[i].image - mi) * si;
        A.row(2 * i) << X.transpose(), Eigen::RowVector4d::Zero(), -x.x() * X.transpose();
        A.row(2 * i + 1) << Eigen::RowVector4d::Zero(), X.transpose(), -x.y() * X.transpose();
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
    const Eigen::VectorXd h = svd.matrixV().col(11);
    Mat34 Pn;
    Pn << h.segment<4>(0).transpose(), h.segment<4>(4).transpose(), h.segment<4>(8).transpose();
    Eigen::Matrix3d Ti;
    Ti << 1 / si, 0, mi.x(), 0, 1 / si, mi.y(), 0, 0, 1;
    Eigen::Matrix4d Tw = Eigen::Matrix4d::Identity();
    Tw.topLeftCorner<3, 3>() *= sw;
    Tw.topRightCorner<3, 1>() = -sw * mw;
    const ProjectionMatrix oracle = normalize_projection(Ti * Pn * Tw, Device::Projector);
    double e = 0;
    for (const auto& c : corr) e += (project(oracle, c.world) - c.image).squaredNorm();
    const double oracle_rmse = std::sqrt(e / corr.size());

    EXPECT_LE(fit.rmse, oracle_rmse * 1.001 + 1e-9);
    EXPECT_LT(fit.rmse, 0.2);
}

TEST(Geometry, FivePointsIsUnderdetermined)
{
    std::mt19937_64 rng(1);
    const ProjectionMatrix p = normalize_projection(camera_matrix(1000, 0, 0), Device::Camera);
    const auto corr = synthesize(p, 5, rng);
    EXPECT_THROW(calibrate_projection(corr), ValidationError);
}

TEST(Geometry, CoplanarPointsRejected)
{
    std::mt19937_64 rng(2);
    const ProjectionMatrix p = normalize_projection(camera_matrix(1000, 0, 0), Device::Camera);
    auto corr = synthesize(p, 30, rng);
    for (auto& c : corr) {
        c.world.z() = 400;
        c.image = project(p, c.world);
    }
    EXPECT_THROW(calibrate_projection(corr), ValidationError);
}

TEST(Geometry, CalibrationScaleInvariance)
{
    std::mt19937_64 rng(6), rng2(6);
    const ProjectionMatrix p = normalize_projection(projector_matrix(), Device::Projector);
    const auto a = synthesize(p, 30, rng, 1.0);
    const auto b = synthesize(p, 30, rng2, 3.5); // image points regenerated from the scaled world
    const CalibrationFit fa = calibrate_projection(a), fb = calibrate_projection(b);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_NEAR((project(fa.matrix, a[i].world) - a[i].image).norm(), 0, 1e-9);
        EXPECT_NEAR((project(fb.matrix, b[i].world) - b[i].image).norm(), 0, 1e-9);
    }
}

TEST(Geometry, CameraFrameCalibrationIsUpperTriangular)
{
    std::mt19937_64 rng(8);
    const ProjectionMatrix p = normalize_projection(camera_matrix(1100, 640, 360), Device::Camera);
    const CalibrationFit f = calibrate_projection(synthesize(p, 50, rng));
    const Eigen::Matrix3d L = f.matrix.m.leftCols<3>();
    const double s = L.norm();
    EXPECT_LE(std::abs(L(1, 0)) / s, 1e-9);
    EXPECT_LE(std::abs(L(2, 0)) / s, 1e-9);
    EXPECT_LE(std::abs(L(2, 1)) / s, 1e-9);
    EXPECT_LE(f.matrix.m.col(3).norm() / s, 1e-9);
}

TEST(Geometry, TriangulationRoundTrip)
{
    const ProjectionMatrix mc = normalize_projection(camera_matrix(1200, 640, 360), Device::Camera);
    const ProjectionMatrix mp = normalize_projection(projector_matrix(), Device::Projector);
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> X(-80, 80), Z(350, 460);
    for (int i = 0; i < 2000; ++i) {
        const Vec3 P(X(rng), 0.6 * X(rng), Z(rng));
        const Vec3 R = triangulate(mc, mp, project(mc, P), project(mp, P).y());
        ASSERT_LE((R - P).norm(), 1e-9);
    }
}

TEST(Geometry, FlatPlateTriangulatesToPlane)
{
    const ProjectionMatrix mc = normalize_projection(camera_matrix(1200, 640, 360), Device::Camera);
    const ProjectionMatrix mp = normalize_projection(projector_matrix(), Device::Projector);
    std::vector<Vec3> pts;
    for (int y = 0; y < 720; y += 9)
        for (int x = 0; x < 1280; x += 9) {
            const Vec3 P = back_project_at_depth(mc, Vec2(x, y), 400);
            pts.push_back(triangulate(mc, mp, Vec2(x, y), project(mp, P).y()));
        }
    const PlaneFit fit = fit_plane(pts);
    EXPECT_LT(fit.rms, 1e-6);
    EXPECT_NEAR(fit.c, 400, 1e-6);
}

TEST(Geometry, RowSensitivityMatchesFiniteDifferenceOracle)
{
    const ProjectionMatrix mc = normalize_projection(camera_matrix(1200, 640, 360), Device::Camera);
    const ProjectionMatrix mp = normalize_projection(projector_matrix(), Device::Projector);
    // oracle: intersect the camera ray with the projector row plane directly
    auto oracle = [&](const Vec2& xc, double yp) {
        const Vec3 C = camera_center(mc);
        const Vec3 dir = back_project_at_depth(mc, xc, 1.0) - C;
        const Eigen::RowVector4d plane = mp.m.row(1) - yp * mp.m.row(2);
        const double t = -(plane.head<3>().dot(C) + plane(3)) / plane.head<3>().dot(dir);
        return Vec3(C + t * dir);
    };
    for (const Vec2 xc : {Vec2(640, 360), Vec2(100, 50), Vec2(1200, 700)}) {
        const Vec3 P = back_project_at_depth(mc, xc, 400);
        const double yp = project(mp, P).y();
        const double dZ = triangulate(mc, mp, xc, yp + 0.5).z() - triangulate(mc, mp, xc, yp).z();
        const double dZ_oracle = oracle(xc, yp + 0.5).z() - oracle(xc, yp).z();
        EXPECT_NEAR(dZ, dZ_oracle, 1e-9);
        EXPECT_GT(std::abs(dZ), 1e-3);
    }
}

TEST(Geometry, ParallelRaysAreSingular)
{
    const ProjectionMatrix mc = normalize_projection(camera_matrix(1000, 0, 0), Device::Camera);
    EXPECT_THROW(triangulate(mc, mc, Vec2(0, 0), 0.0), NumericalError);
}
