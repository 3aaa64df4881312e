#include <gtest/gtest.h>

#include <random>

#include "pglf/metrics.hpp"
#include "pglf/reconstruct.hpp"
#include "pglf/simulator.hpp"

using namespace pglf;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

SystemSpec small_spec(int width = 480)
{
    SystemSpec s;
    s.sensor_width = width;
    s.sensor_height = width * 9 / 16;
    return s;
}

DcmParams curved(const PlenopticIntrinsics& in)
{
    DcmParams p = DcmParams::linear(in);
    p.a = {1, 0, 0, 0, -0.25, -0.25};
    return p;
}

/// Disparity field taken straight from a ray ledger.
DisparityField ledger_disparity(const TraceResult& tr)
{
    const RayLedger& L = *tr.ledger;
    const int w = L.D.width(), h = L.D.height();
    DisparityField f{Image(w, h, kNaN), Grid<std::uint8_t>(w, h, 0), Mask(w, h, 0), Image(w, h, kNaN), {}};
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (tr.hit(x, y)) {
                f.D(x, y) = L.D(x, y);
                f.valid(x, y) = 1;
                f.count(x, y) = 1;
            }
    return f;
}

struct Rig {
    SimulatedSystem sys;
    FringeConfig fringe;
    FeasibleRegion region;
    std::unique_ptr<Scene> scene;
    RenderResult render;
    PhaseMap phase;
    DisparityField disp;
    GroundTruth gt;
};

std::unique_ptr<Rig> make_rig(const std::string& preset, int width = 480)
{
    auto r = std::make_unique<Rig>();
    r->sys = make_system(small_spec(width));
    r->fringe.width = r->sys.projector_spec.width;
    r->fringe.height = r->sys.projector_spec.height;
    r->region = compute_feasible_region(360, 450, r->sys.intr);
    r->scene = make_preset_scene(preset, r->sys.fov, 400);
    TraceOptions to;
    to.ledger = true;
    r->render = render_lightfield(*r->scene, r->fringe, r->sys.intr, r->sys.grid, r->sys.projector,
                                  DcmParams::linear(r->sys.intr), {}, to);
    r->phase = compute_phase(r->render.images);
    r->disp = match_lenslets(r->phase, r->sys.grid, r->region, PsadConfig{});
    r->gt = ground_truth_cloud(*r->scene, r->sys.vcam, r->sys.projector, r->fringe);
    return r;
}

const Rig& plate()
{
    static const auto r = make_rig("plate");
    return *r;
}

DepthMap map_from(const Image& Z, const Mask& valid)
{
    return {Z, valid, DepthProvenance::Reprojected};
}

} // namespace

// ---- initial cloud ----------------------------------------------------------

TEST(InitialCloud, ZeroAberrationKeepsLinearDepth)
{
    const Rig& r = plate();
    const PointCloud c = initial_point_cloud(r.disp, r.sys.intr, r.sys.grid, DcmParams::linear(r.sys.intr));
    ASSERT_EQ(c.size(), r.disp.valid_count());
    std::size_t i = 0;
    for (int y = 0; y < r.disp.height(); ++y)
        for (int x = 0; x < r.disp.width(); ++x) {
            if (!r.disp.ok(x, y)) continue;
            const double v = virtual_depth(r.disp.D(x, y), r.sys.intr);
            ASSERT_NEAR(c.points[i].z(), depth_from_v(v, r.sys.intr).Z, 1e-9);
            ASSERT_FLOAT_EQ(c.quality[i], static_cast<float>(v));
            ++i;
        }
}

TEST(InitialCloud, SinglePixelHandComputation)
{
    const SimulatedSystem sys = make_system(small_spec());
    const DcmParams dcm = curved(sys.intr);
    const int t = sys.grid.size() / 3;
    const Vec2 c = sys.grid.center(t);
    const int x = static_cast<int>(std::lround(c.x())) + 4, y = static_cast<int>(std::lround(c.y())) - 3;
    ASSERT_EQ(sys.grid.label(x, y), t);
    const int w = sys.intr.sensor_width, h = sys.intr.sensor_height;
    DisparityField f{Image(w, h, kNaN), Grid<std::uint8_t>(w, h, 0), Mask(w, h, 0), Image(w, h, kNaN), {}};
    f.D(x, y) = 21.7;
    f.valid(x, y) = 1;
    const PointCloud cloud = initial_point_cloud(f, sys.intr, sys.grid, dcm);
    ASSERT_EQ(cloud.size(), 1u);

    // closed forms composed by hand
    const PlenopticIntrinsics& in = sys.intr;
    const double v = in.D_mu / (in.D_mu - 21.7);
    const double z = (v * in.d_mu + in.d) * in.pixel_pitch;
    const double Zr = z * in.f_L / (z - in.f_L);
    const Vec2 cm = (c - in.axis()) * in.pixel_pitch, sm = (Vec2(x, y) - in.axis()) * in.pixel_pitch;
    const Vec2 q = cm + v * (sm - cm); // image point behind the main lens
    const double tx = q.x() / z, ty = q.y() / z;
    const double ap = 1 - 0.25 * tx * tx - 0.25 * ty * ty;
    const double zc = ap * z;
    const double Zc = zc * in.f_L / (zc - in.f_L);
    EXPECT_NEAR(cloud.points[0].z(), Zc, 1e-9);
    EXPECT_NEAR(cloud.points[0].x(), tx * Zc, 1e-9);
    EXPECT_NEAR(cloud.points[0].y(), ty * Zc, 1e-9);
    EXPECT_NEAR(lateral_coords(Zr, Vec2(x, y), c, in).x(), tx * Zr, 1e-9);
}

TEST(InitialCloud, CorrectionFlattensCurvedFieldPlate)
{
    const SimulatedSystem sys = make_system(small_spec());
    const DcmParams dcm = curved(sys.intr);
    const auto scene = make_preset_scene("plate", sys.fov, 400);
    TraceOptions to;
    to.ledger = true;
    const TraceResult tr = trace_scene(*scene, sys.intr, sys.grid, sys.projector, dcm, to);
    const DisparityField f = ledger_disparity(tr);
    const PointCloud lin = initial_point_cloud(f, sys.intr, sys.grid, DcmParams::linear(sys.intr));
    const PointCloud cor = initial_point_cloud(f, sys.intr, sys.grid, dcm);
    const double rms_lin = fit_plane(lin.points).rms, rms_cor = fit_plane(cor.points).rms;
    EXPECT_GT(rms_lin, 4 * rms_cor);
    EXPECT_LT(rms_cor, 1e-6);
}

// ---- reprojection -----------------------------------------------------------

TEST(Reproject, SinglePointAndNearestWins)
{
    const SimulatedSystem sys = make_system(small_spec());
    const VirtualCamera& vc = sys.vcam;
    const Vec3 P = back_project_at_depth(vc.projection, Vec2(40, 30), 400);
    PointCloud c;
    c.points = {P};
    c.valid = {1};
    DepthMap dm = reproject(c, vc);
    EXPECT_NEAR(dm.coverage() * vc.width * vc.height, 1.0, 1e-9);
    ASSERT_TRUE(dm.ok(40, 30));
    EXPECT_NEAR(dm.Z(40, 30), 400, 1e-9);

    c.points = {back_project_at_depth(vc.projection, Vec2(40.2, 29.9), 410), P,
                back_project_at_depth(vc.projection, Vec2(39.8, 30.1), 405)};
    c.valid = {1, 1, 1};
    dm = reproject(c, vc);
    EXPECT_NEAR(dm.Z(40, 30), 400, 1e-9);
}

TEST(Reproject, SimulatorCoverage)
{
    const Rig& r = plate();
    const PointCloud c = initial_point_cloud(r.disp, r.sys.intr, r.sys.grid, DcmParams::linear(r.sys.intr));
    EXPECT_GE(reproject(c, r.sys.vcam).coverage(), 0.30);
}

// ---- filtering --------------------------------------------------------------

TEST(Filter, ConstantWithHolesStaysConstant)
{
    DepthMap dm{Image(60, 40, 412.5), Mask(60, 40, 1), DepthProvenance::Reprojected};
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0, 1);
    for (std::size_t i = 0; i < dm.Z.size(); ++i)
        if (u(rng) < 0.4) {
            dm.valid[i] = 0;
            dm.Z[i] = kNaN;
        }
    const DepthMap out = fill_and_filter(dm, FilterConfig{});
    for (std::size_t i = 0; i < out.Z.size(); ++i) {
        if (dm.valid[i]) EXPECT_TRUE(out.valid[i]); // mask monotonicity
        if (out.valid[i]) EXPECT_EQ(out.Z[i], 412.5);
    }
    EXPECT_EQ(out.provenance, DepthProvenance::Filtered);
}

TEST(Filter, StepEdgeStaysPut)
{
    const int w = 60, h = 40, edge = 30;
    DepthMap dm{Image(w, h), Mask(w, h, 1), DepthProvenance::Reprojected};
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) dm.Z(x, y) = x < edge ? 400 : 410;
    const DepthMap out = fill_and_filter(dm, FilterConfig{});
    for (int y = 0; y < h; ++y) {
        // columns farther than 1 px from the edge keep their tier
        for (int x = 0; x < w; ++x) {
            if (x < edge - 1) EXPECT_NEAR(out.Z(x, y), 400, 0.5) << x;
            if (x > edge) EXPECT_NEAR(out.Z(x, y), 410, 0.5) << x;
        }
    }
}

TEST(Filter, GaussianNoiseReducedThreefold)
{
    const int w = 120, h = 90;
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n01;
    DepthMap dm{Image(w, h), Mask(w, h, 1), DepthProvenance::Reprojected};
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) dm.Z(x, y) = 400 + 0.02 * x + n01(rng);
    const DepthMap out = fill_and_filter(dm, FilterConfig{});
    double s_in = 0, s_out = 0;
    int n = 0;
    for (int y = 6; y < h - 6; ++y)
        for (int x = 6; x < w - 6; ++x) {
            const double truth = 400 + 0.02 * x;
            s_in += (dm.Z(x, y) - truth) * (dm.Z(x, y) - truth);
            s_out += (out.Z(x, y) - truth) * (out.Z(x, y) - truth);
            ++n;
        }
    EXPECT_LE(std::sqrt(s_out / n) * 3, std::sqrt(s_in / n));
}

TEST(Filter, InsufficientCoverage)
{
    DepthMap dm{Image(20, 20, kNaN), Mask(20, 20, 0), DepthProvenance::Reprojected};
    for (int i = 0; i < 10; ++i) {
        dm.valid(i, 0) = 1;
        dm.Z(i, 0) = 400;
    }
    EXPECT_THROW(fill_and_filter(dm, FilterConfig{}), ValidationError);
}

TEST(Filter, GapsAreNotBridged)
{
    // a hole between two tiers takes the depth of its nearest side
    DepthMap dm{Image(30, 10), Mask(30, 10, 1), DepthProvenance::Reprojected};
    for (int y = 0; y < 10; ++y)
        for (int x = 0; x < 30; ++x) dm.Z(x, y) = x < 15 ? 400 : 420;
    for (int y = 0; y < 10; ++y) {
        dm.valid(13, y) = 0;
        dm.valid(16, y) = 0;
    }
    const DepthMap out = fill_gaps(dm, 3, 5.0);
    for (int y = 0; y < 10; ++y) {
        EXPECT_EQ(out.Z(13, y), 400);
        EXPECT_EQ(out.Z(16, y), 420);
    }
}

// ---- refocus ----------------------------------------------------------------

TEST(Refocus, SingleLensletResamplesThatLenslet)
{
    PlenopticIntrinsics in = make_intrinsics(small_spec());
    const Vec2 axis = in.axis();
    const LensletGrid grid({axis}, LensletLayout::Hexagonal, in.D_mu, in.sensor_width, in.sensor_height);
    const VirtualCamera vc = VirtualCamera::make(in, 3.0);
    // images carrying their own pixel coordinates reveal the sample location
    std::vector<Image> imgs{Image(in.sensor_width, in.sensor_height), Image(in.sensor_width, in.sensor_height)};
    for (int y = 0; y < in.sensor_height; ++y)
        for (int x = 0; x < in.sensor_width; ++x) {
            imgs[0](x, y) = x;
            imgs[1](x, y) = y;
        }
    const double v = 3.0;
    const Image vmap(vc.width, vc.height, v);
    const Mask vmask(vc.width, vc.height, 1);
    const RefocusResult rf = refocus_with_vmap(imgs, vmap, vmask, nullptr, vc, in, grid, RefocusConfig{});
    int n = 0;
    for (int y = 0; y < vc.height; ++y)
        for (int x = 0; x < vc.width; ++x) {
            if (!rf.valid(x, y)) continue;
            ++n;
            EXPECT_EQ(rf.count(x, y), 1);
            const Vec2 s(rf.images[0](x, y), rf.images[1](x, y));
            EXPECT_LE((s - axis).norm(), grid.radius());
            const Vec2 back = vc.pixel(chief_ray_angle(s, axis, v, in));
            EXPECT_NEAR(back.x(), x, 1e-9);
            EXPECT_NEAR(back.y(), y, 1e-9);
        }
    EXPECT_GT(n, 50);
}

TEST(Refocus, PlateContrastAndPhase)
{
    const Rig& r = plate();
    const RefocusResult rf = refocus(r.render.images, r.disp, r.sys.vcam, r.sys.intr, r.sys.grid);
    const PhaseMap pv = compute_phase(rf.images);
    double mod_raw = 0, mod_ref = 0, err = 0;
    int n_raw = 0, n_ref = 0;
    for (std::size_t i = 0; i < r.phase.modulation.size(); ++i)
        if (r.phase.mask[i]) {
            mod_raw += r.phase.modulation[i];
            ++n_raw;
        }
    for (int y = 0; y < pv.height(); ++y)
        for (int x = 0; x < pv.width(); ++x) {
            if (!rf.valid(x, y) || !pv.valid(x, y) || !r.gt.valid(x, y)) continue;
            mod_ref += pv.modulation(x, y);
            err += std::abs(wrap_pi(pv.phase(x, y) - r.gt.Phi(x, y)));
            ++n_ref;
        }
    ASSERT_GT(n_ref, pv.width() * pv.height() / 2);
    EXPECT_GE(mod_ref / n_ref, 0.9 * mod_raw / n_raw);
    EXPECT_LT(err / n_ref, 0.05);
}

// ---- unwrapping and final cloud ----------------------------------------------

namespace {

PhaseMap wrapped_truth(const GroundTruth& gt)
{
    const int w = gt.Phi.width(), h = gt.Phi.height();
    PhaseMap pm{Image(w, h, 0.0), Image(w, h, 0.5), Mask(w, h, 0)};
    for (std::size_t i = 0; i < gt.Phi.size(); ++i)
        if (gt.valid[i]) {
            pm.phase[i] = wrap_2pi(gt.Phi[i]);
            pm.mask[i] = 1;
        }
    return pm;
}

} // namespace

TEST(Unwrap, ExactReference)
{
    const Rig& r = plate();
    const PhaseMap pv = wrapped_truth(r.gt);
    const UnwrapResult u = unwrap_with_reference(pv, map_from(r.gt.Z, r.gt.valid), r.sys.vcam.projection,
                                                 r.sys.projector, r.fringe);
    for (std::size_t i = 0; i < u.Phi.size(); ++i) {
        if (!r.gt.valid[i]) {
            EXPECT_FALSE(u.success[i]);
            continue;
        }
        ASSERT_TRUE(u.success[i]);
        ASSERT_NEAR(u.Phi[i], r.gt.Phi[i], 1e-9);
        // Phi - phi is an exact integer multiple of 2 pi
        ASSERT_EQ(u.Phi[i], pv.phase[i] + kTwoPi * u.order[i]);
    }
}

TEST(Unwrap, ReferenceErrorBelowHalfPeriodKeepsOrder)
{
    const Rig& r = plate();
    const PhaseMap pv = wrapped_truth(r.gt);
    const ProjectionMatrix& mc = r.sys.vcam.projection;
    // per-pixel depth offset that moves the predicted phase by half a period
    auto phi_at = [&](int x, int y, double Z) {
        return r.fringe.phase_of(project(r.sys.projector, back_project_at_depth(mc, Vec2(x, y), Z)).y());
    };
    double margin = std::numeric_limits<double>::infinity();
    for (int y = 0; y < r.gt.Z.height(); y += 3)
        for (int x = 0; x < r.gt.Z.width(); x += 3)
            if (r.gt.valid(x, y)) {
                const double Z = r.gt.Z(x, y);
                const double slope = std::abs(phi_at(x, y, Z + 1e-3) - phi_at(x, y, Z - 1e-3)) / 2e-3;
                margin = std::min(margin, std::numbers::pi / slope);
            }
    ASSERT_TRUE(std::isfinite(margin));
    for (double factor : {-0.9, 0.9}) {
        Image Z = r.gt.Z;
        for (auto& z : Z.storage()) z += factor * margin;
        const UnwrapResult u = unwrap_with_reference(pv, map_from(Z, r.gt.valid), mc, r.sys.projector, r.fringe);
        for (std::size_t i = 0; i < u.Phi.size(); ++i)
            if (r.gt.valid[i]) ASSERT_NEAR(u.Phi[i], r.gt.Phi[i], 1e-9);
    }
    // far beyond the margin the orders go wrong
    Image Z = r.gt.Z;
    for (auto& z : Z.storage()) z += 3 * margin;
    const UnwrapResult bad = unwrap_with_reference(pv, map_from(Z, r.gt.valid), mc, r.sys.projector, r.fringe);
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < bad.Phi.size(); ++i) wrong += r.gt.valid[i] && std::abs(bad.Phi[i] - r.gt.Phi[i]) > 1;
    EXPECT_GT(wrong, 0u);
}

TEST(Unwrap, InvalidReferenceFails)
{
    const Rig& r = plate();
    const PhaseMap pv = wrapped_truth(r.gt);
    const DepthMap none{Image(pv.width(), pv.height(), kNaN), Mask(pv.width(), pv.height(), 0), DepthProvenance::Filtered};
    const UnwrapResult u = unwrap_with_reference(pv, none, r.sys.vcam.projection, r.sys.projector, r.fringe);
    for (auto s : u.success.storage()) EXPECT_EQ(s, 0);
}

TEST(FinalCloud, ResolutionContract)
{
    const VirtualCamera full = VirtualCamera::make(make_intrinsics(SystemSpec{}), 3.0);
    EXPECT_EQ(full.width, 1280);
    EXPECT_EQ(full.height, 720);
    const Rig& r = plate();
    const UnwrapResult u = unwrap_with_reference(wrapped_truth(r.gt), map_from(r.gt.Z, r.gt.valid),
                                                 r.sys.vcam.projection, r.sys.projector, r.fringe);
    const PointCloud c = final_point_cloud(u, r.sys.vcam.projection, r.sys.projector, r.fringe);
    EXPECT_EQ(c.width, r.sys.vcam.width);
    EXPECT_EQ(c.height, r.sys.vcam.height);
    EXPECT_EQ(c.size(), static_cast<std::size_t>(r.sys.vcam.width * r.sys.vcam.height));
}

TEST(FinalCloud, EndToEndNoiselessRelief)
{
    // full chain with nominal matrices; the relief needs the quarter sensor,
    // at 480 px the refocus blur across slopes alone exceeds a micron
    const auto r = make_rig("handicraft", 1920);
    const PointCloud init = initial_point_cloud(r->disp, r->sys.intr, r->sys.grid, DcmParams::linear(r->sys.intr));
    const DepthMap ref = fill_and_filter(reproject(init, r->sys.vcam), FilterConfig{});
    const RefocusResult rf = refocus(r->render.images, r->disp, r->sys.vcam, r->sys.intr, r->sys.grid);
    PhaseMap pv = compute_phase(rf.images);
    for (std::size_t i = 0; i < pv.mask.size(); ++i) pv.mask[i] = pv.mask[i] && rf.valid[i];
    const UnwrapResult u = unwrap_with_reference(pv, ref, r->sys.vcam.projection, r->sys.projector, r->fringe);
    const PointCloud c = final_point_cloud(u, r->sys.vcam.projection, r->sys.projector, r->fringe);
    std::vector<double> err;
    std::size_t unwrapped = 0;
    for (std::size_t i = 0; i < c.size(); ++i) {
        if (!u.success[i]) continue;
        ++unwrapped;
        if (c.valid[i] && r->gt.valid[i]) err.push_back(std::abs(c.points[i].z() - r->gt.Z[i]));
    }
    ASSERT_GT(unwrapped, 0u);
    EXPECT_GE(static_cast<double>(err.size()), 0.95 * unwrapped);
    std::nth_element(err.begin(), err.begin() + err.size() / 2, err.end());
    EXPECT_LT(err[err.size() / 2], 1e-3);
}
