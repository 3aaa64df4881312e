#include <gtest/gtest.h>

#include <random>

#include "pglf/lightfield.hpp"
#include "pglf/simulator.hpp"

using namespace pglf;

namespace {

PlenopticIntrinsics intrinsics()
{
    SystemSpec s;
    return make_intrinsics(s);
}

SimulatedSystem small_system()
{
    SystemSpec s;
    s.sensor_width = 480;
    s.sensor_height = 270;
    return make_system(s);
}

} // namespace

TEST(Lightfield, VirtualDepthExamples)
{
    const PlenopticIntrinsics in = intrinsics();
    EXPECT_DOUBLE_EQ(virtual_depth(0, in), 1.0);
    EXPECT_NEAR(virtual_depth(35.0 * 2 / 3, in), 3.0, 1e-12);
    EXPECT_DOUBLE_EQ(virtual_depth(17.5, in), 2.0);
    EXPECT_THROW(virtual_depth(35, in), NumericalError);
    EXPECT_NEAR(disparity_from_v(virtual_depth(12.3, in), in), 12.3, 1e-12);
}

TEST(Lightfield, VirtualDepthMonotone)
{
    const PlenopticIntrinsics in = intrinsics();
    double prev = virtual_depth(0, in);
    for (int i = 1; i < 1000; ++i) {
        const double v = virtual_depth(35.0 * i / 1000, in);
        ASSERT_GT(v, prev);
        prev = v;
    }
}

TEST(Lightfield, DepthFromImageDistance)
{
    const double f = 35;
    EXPECT_NEAR(depth_from_image_distance(2 * f, f), 2 * f, 1e-12);
    EXPECT_THROW(depth_from_image_distance(f, f), NumericalError);
    // far image plane: depth approaches f from above
    const double Z = depth_from_image_distance(1e9, f);
    EXPECT_GT(Z, f);
    EXPECT_NEAR(Z, f, 1e-5);
    double prev = depth_from_image_distance(f + 1e-3, f);
    for (int i = 1; i < 500; ++i) {
        const double cur = depth_from_image_distance(f + 1e-3 + i * 0.1, f);
        ASSERT_LT(cur, prev); // thin lens: Z falls as z grows
        prev = cur;
    }
}

TEST(Lightfield, DepthFromVLinearModel)
{
    PlenopticIntrinsics in = intrinsics();
    // choose d so that v = 2 lands at z = 2 f_L
    in.d = 2 * in.f_L / in.pixel_pitch - 2 * in.d_mu;
    const DepthPair p = depth_from_v(2.0, in);
    EXPECT_NEAR(p.z, 2 * in.f_L, 1e-12);
    EXPECT_NEAR(p.Z, 2 * in.f_L, 1e-10);
    EXPECT_NEAR(v_from_depth(p.Z, in), 2.0, 1e-9);
}

TEST(Lightfield, WorkingPointIsVirtualDepthThree)
{
    const PlenopticIntrinsics in = intrinsics();
    EXPECT_NEAR(v_from_depth(400, in), 3.0, 1e-9);
    EXPECT_NEAR(depth_from_v(3.0, in).Z, 400, 1e-6);
}

TEST(Lightfield, IncidentAngles)
{
    const IncidentAngle a = incident_angles(0, 0, 40);
    EXPECT_EQ(a.theta_x, 0);
    EXPECT_EQ(a.theta_y, 0);
    EXPECT_DOUBLE_EQ(incident_angles(40, 0, 40).theta_x, 1.0);
    EXPECT_THROW(incident_angles(1, 1, 0), NumericalError);
}

TEST(Lightfield, GridSpacingAndNeighbours)
{
    const SimulatedSystem sys = small_system();
    const LensletGrid& g = sys.grid;
    ASSERT_GT(g.size(), 20);
    for (int i = 0; i < g.size(); ++i) {
        for (const auto& n : g.neighbors(i)) {
            EXPECT_NEAR(n.u.norm(), 1.0, 1e-12);
            const double dist = (g.center(n.index) - g.center(i)).norm();
            EXPECT_NEAR(dist, g.diameter(), 0.01 * g.diameter());
        }
        EXPECT_LE(g.neighbors(i).size(), 6u);
        EXPECT_EQ(g.label(static_cast<int>(std::lround(g.center(i).x())), static_cast<int>(std::lround(g.center(i).y()))), i);
    }
}

TEST(Lightfield, OnAxisLateralCoordsVanish)
{
    const SimulatedSystem sys = small_system();
    const Vec2 axis = sys.intr.axis();
    for (double Z : {360.0, 400.0, 450.0}) {
        const Vec2 xy = lateral_coords(Z, axis, axis, sys.intr);
        EXPECT_NEAR(xy.x(), 0, 1e-12);
        EXPECT_NEAR(xy.y(), 0, 1e-12);
    }
}

TEST(Lightfield, LateralCoordsAffine)
{
    const PlenopticIntrinsics in = intrinsics();
    const Vec2 c(1000.5, 800.25), s(1010, 790);
    const LateralModel m = lateral_model(s, c, in);
    const Vec2 a = lateral_coords(380, s, c, in), b = lateral_coords(760, s, c, in);
    EXPECT_NEAR((b - m.b).x(), 2 * (a - m.b).x(), 1e-9);
    EXPECT_NEAR((b - m.b).y(), 2 * (a - m.b).y(), 1e-9);
    // three collinear depth samples give collinear points
    const Vec2 p0 = lateral_coords(360, s, c, in), p1 = lateral_coords(405, s, c, in), p2 = lateral_coords(450, s, c, in);
    const Vec2 e1 = p1 - p0, e2 = p2 - p0;
    EXPECT_NEAR(e1.x() * e2.y() - e1.y() * e2.x(), 0, 1e-12);
    EXPECT_NEAR(e2.x(), 2 * e1.x(), 1e-9);
}

TEST(Lightfield, AgreesWithRayLedger)
{
    const SimulatedSystem sys = small_system();
    const auto scene = make_preset_scene("handicraft", sys.fov, 400);
    TraceOptions to;
    to.ledger = true;
    const TraceResult tr = trace_scene(*scene, sys.intr, sys.grid, sys.projector, DcmParams::linear(sys.intr), to);
    ASSERT_TRUE(tr.ledger);
    const RayLedger& L = *tr.ledger;
    int checked = 0;
    std::mt19937_64 rng(2);
    std::uniform_int_distribution<int> ux(0, sys.intr.sensor_width - 1), uy(0, sys.intr.sensor_height - 1);
    while (checked < 500) {
        const int x = ux(rng), y = uy(rng);
        if (!tr.hit(x, y)) continue;
        const int t = sys.grid.label(x, y);
        const Vec2 s(x, y), c = sys.grid.center(t);
        const double v = L.v(x, y);
        // virtual depth and disparity
        EXPECT_NEAR(virtual_depth(L.D(x, y), sys.intr), v, 1e-9);
        // depth through the linear model
        EXPECT_NEAR(depth_from_v(v, sys.intr).Z, L.Z(x, y), 1e-6 * L.Z(x, y));
        // chief-ray slope
        const IncidentAngle th = chief_ray_angle(s, c, v, sys.intr);
        EXPECT_NEAR(th.theta_x, L.theta_x(x, y), 1e-12);
        EXPECT_NEAR(th.theta_y, L.theta_y(x, y), 1e-12);
        EXPECT_NEAR(L.X(x, y) / L.Z(x, y), L.theta_x(x, y), 1e-12);
        // lateral position from the depth alone
        const Vec2 xy = lateral_coords(L.Z(x, y), s, c, sys.intr);
        EXPECT_NEAR(xy.x(), L.X(x, y), 1e-6);
        EXPECT_NEAR(xy.y(), L.Y(x, y), 1e-6);
        ++checked;
    }
}
