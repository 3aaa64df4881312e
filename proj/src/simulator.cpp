#include "pglf/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace pglf {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kDeg = std::numbers::pi / 180.0;

// Bounds of f over a coarse lattice covering the largest field of view.
template <class F>
std::pair<double, double> sampled_bounds(F&& f)
{
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (int j = -40; j <= 40; ++j)
        for (int i = -60; i <= 60; ++i) {
            const double z = f(i * 2.5, j * 2.5);
            if (!std::isfinite(z)) continue;
            lo = std::min(lo, z);
            hi = std::max(hi, z);
        }
    return {lo, hi};
}
} // namespace

PlaneScene::PlaneScene(Vec3 center, double tilt_x_deg, double tilt_y_deg, CirclePattern pattern, std::string name)
    : center_(center), pattern_(pattern), name_(std::move(name))
{
    R_ = Eigen::AngleAxisd(tilt_y_deg * kDeg, Vec3::UnitY()).toRotationMatrix() *
         Eigen::AngleAxisd(tilt_x_deg * kDeg, Vec3::UnitX()).toRotationMatrix();
    normal_ = R_.col(2);
    require(std::abs(normal_.z()) > 0.2, "plane scene: tilt too steep");
}

double PlaneScene::depth(double X, double Y) const
{
    return center_.z() - (normal_.x() * (X - center_.x()) + normal_.y() * (Y - center_.y())) / normal_.z();
}

double PlaneScene::albedo(double X, double Y, double Z) const
{
    if (pattern_.cols <= 0 || pattern_.rows <= 0) return pattern_.light;
    const Vec3 l = R_.transpose() * (Vec3(X, Y, Z) - center_);
    const double fu = l.x() / pattern_.spacing + (pattern_.cols - 1) / 2.0;
    const double fw = l.y() / pattern_.spacing + (pattern_.rows - 1) / 2.0;
    const double iu = std::clamp(std::round(fu), 0.0, pattern_.cols - 1.0);
    const double iw = std::clamp(std::round(fw), 0.0, pattern_.rows - 1.0);
    const double dist = std::hypot((fu - iu) * pattern_.spacing, (fw - iw) * pattern_.spacing);
    // 0.3 mm linear edge keeps point sampling from aliasing the rim
    const double t = std::clamp((dist - pattern_.radius) / 0.3 + 0.5, 0.0, 1.0);
    return pattern_.dark + (pattern_.light - pattern_.dark) * t;
}

double PlaneScene::z_near() const
{
    return sampled_bounds([this](double X, double Y) { return depth(X, Y); }).first;
}

double PlaneScene::z_far() const
{
    return sampled_bounds([this](double X, double Y) { return depth(X, Y); }).second;
}

std::vector<Vec3> PlaneScene::circle_centers() const
{
    std::vector<Vec3> out;
    for (int j = 0; j < pattern_.rows; ++j)
        for (int i = 0; i < pattern_.cols; ++i) {
            const Vec3 l((i - (pattern_.cols - 1) / 2.0) * pattern_.spacing, (j - (pattern_.rows - 1) / 2.0) * pattern_.spacing, 0);
            out.push_back(center_ + R_ * l);
        }
    return out;
}

StaircaseScene::StaircaseScene(std::vector<double> tier_depths, std::vector<double> edges, std::string name)
    : depths_(std::move(tier_depths)), edges_(std::move(edges)), name_(std::move(name))
{
    require(!depths_.empty() && edges_.size() + 1 == depths_.size(), "staircase: need one edge between tiers");
    require(std::is_sorted(edges_.begin(), edges_.end()), "staircase: edges must increase");
}

int StaircaseScene::tier_of(double X) const
{
    return static_cast<int>(std::upper_bound(edges_.begin(), edges_.end(), X) - edges_.begin());
}

double StaircaseScene::depth(double X, double /*Y*/) const
{
    return depths_[static_cast<std::size_t>(tier_of(X))];
}

double StaircaseScene::z_near() const
{
    return *std::min_element(depths_.begin(), depths_.end());
}

double StaircaseScene::z_far() const
{
    return *std::max_element(depths_.begin(), depths_.end());
}

ReliefScene::ReliefScene(double base, double slope_x, double slope_y, std::vector<GaussianBump> bumps, std::string name)
    : base_(base), sx_(slope_x), sy_(slope_y), bumps_(std::move(bumps)), name_(std::move(name))
{
    const auto b = sampled_bounds([this](double X, double Y) { return depth(X, Y); });
    lo_ = b.first;
    hi_ = b.second;
}

double ReliefScene::depth(double X, double Y) const
{
    double z = base_ + sx_ * X + sy_ * Y;
    for (const auto& b : bumps_) {
        const double r2 = (X - b.x) * (X - b.x) + (Y - b.y) * (Y - b.y);
        z += b.amplitude * std::exp(-r2 / (2 * b.sigma * b.sigma));
    }
    return z;
}

double ReliefScene::albedo(double X, double Y, double /*Z*/) const
{
    return 0.85 + 0.15 * std::cos(X / 7.0) * std::cos(Y / 9.0);
}

double ReliefScene::z_near() const { return lo_; }
double ReliefScene::z_far() const { return hi_; }

std::unique_ptr<Scene> make_preset_scene(const std::string& preset, const FieldOfView& fov, double Z)
{
    const double hx = fov.half_x, hy = fov.half_y;
    if (preset == "plate") return std::make_unique<PlaneScene>(Vec3(0, 0, Z));
    if (preset == "staircase") {
        std::vector<double> edges;
        for (int k = 1; k <= 4; ++k) edges.push_back(-0.9 * hx + k * 1.8 * hx / 5);
        return std::make_unique<StaircaseScene>(std::vector<double>{420, 410, 400, 390, 380}, edges);
    }
    if (preset == "step") return std::make_unique<StaircaseScene>(std::vector<double>{412, 397}, std::vector<double>{0.0}, "step");
    if (preset == "circle_grid") {
        // 50 mm pitch, up to 4 x 2 circles, as many as the field holds with a 2 r margin
        const double pitch = 50, r = 8;
        const double sx = hx * Z / 400, sy = hy * Z / 400;
        const int cols = std::clamp(static_cast<int>(std::floor(2 * (sx - 2 * r) / pitch)) + 1, 1, 4);
        const int rows = std::clamp(static_cast<int>(std::floor(2 * (sy - 2 * r) / pitch)) + 1, 1, 2);
        return std::make_unique<PlaneScene>(Vec3(0, 0, Z), 0, 0, CirclePattern{cols, rows, pitch, r, 0.25, 1.0},
                                            "circle_grid");
    }
    if (preset == "handicraft") {
        std::vector<GaussianBump> bumps{{0, 0, -20, 0.3 * hx},
                                        {0.45 * hx, 0.3 * hy, -10, 0.15 * hx},
                                        {-0.45 * hx, -0.35 * hy, -12, 0.18 * hx}};
        return std::make_unique<ReliefScene>(410, 0.0, 0.0, bumps);
    }
    throw ValidationError("unknown scene preset: " + preset);
}

ProjectionMatrix make_projector(const ProjectorSpec& spec)
{
    const Vec3 zc = (spec.target - spec.position).normalized();
    const Vec3 xc = (Vec3::UnitX() - zc * zc.x()).normalized();
    const Vec3 yc = zc.cross(xc);
    Eigen::Matrix3d R;
    R.row(0) = xc.transpose();
    R.row(1) = yc.transpose();
    R.row(2) = zc.transpose();
    Eigen::Matrix3d K = Eigen::Matrix3d::Identity();
    K(0, 0) = K(1, 1) = spec.focal;
    K(0, 2) = (spec.width - 1) / 2.0;
    K(1, 2) = (spec.height - 1) / 2.0;
    Mat34 Rt;
    Rt.leftCols<3>() = R;
    Rt.col(3) = -R * spec.position;
    return normalize_projection(K * Rt, Device::Projector);
}

PlenopticIntrinsics make_intrinsics(const SystemSpec& spec)
{
    PlenopticIntrinsics intr;
    intr.D_mu = spec.D_mu;
    intr.d_mu = spec.d_mu;
    intr.f_L = spec.f_L;
    intr.sensor_width = spec.sensor_width;
    intr.sensor_height = spec.sensor_height;
    intr.pixel_pitch = spec.pixel_pitch;
    intr.d = image_distance_from_depth(spec.Z_ref, spec.f_L) / spec.pixel_pitch - spec.v_ref * spec.d_mu;
    intr.validate();
    return intr;
}

SimulatedSystem make_system(const SystemSpec& spec)
{
    SimulatedSystem sys;
    sys.intr = make_intrinsics(spec);
    sys.grid = LensletGrid::make(sys.intr, spec.layout);
    sys.projector_spec = spec.projector;
    sys.projector = make_projector(spec.projector);
    sys.vcam = VirtualCamera::make(sys.intr, spec.v_ref);
    sys.fov = field_of_view(spec);
    return sys;
}

FieldOfView field_of_view(const SystemSpec& spec)
{
    const double z = image_distance_from_depth(spec.Z_ref, spec.f_L);
    return {0.5 * spec.sensor_width * spec.pixel_pitch / z * spec.Z_ref,
            0.5 * spec.sensor_height * spec.pixel_pitch / z * spec.Z_ref};
}

namespace {

std::uint64_t splitmix(std::uint64_t x)
{
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

} // namespace

double counter_gaussian(std::uint64_t seed, std::uint64_t stream, std::uint64_t index)
{
    const std::uint64_t h = splitmix(splitmix(splitmix(seed) ^ stream) ^ index);
    const std::uint64_t h2 = splitmix(h);
    const double u1 = (static_cast<double>(h >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = static_cast<double>(h2 >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

double intersect_ray(const Scene& scene, const IncidentAngle& theta, double z_lo, double z_hi, double step)
{
    auto h = [&](double Z) {
        const double s = scene.depth(theta.theta_x * Z, theta.theta_y * Z);
        return std::isfinite(s) ? Z - s : -1.0;
    };
    double a = z_lo, ha = h(a);
    if (ha >= 0) return a;
    while (a < z_hi) {
        const double b = std::min(a + step, z_hi);
        const double hb = h(b);
        if (hb >= 0) {
            double lo = a, hi = b;
            for (int i = 0; i < 100 && hi - lo > 1e-12; ++i) {
                const double m = 0.5 * (lo + hi);
                (h(m) >= 0 ? hi : lo) = m;
            }
            return hi;
        }
        a = b;
    }
    return kNaN;
}

TraceResult trace_scene(const Scene& scene, const PlenopticIntrinsics& intr, const LensletGrid& grid,
                        const ProjectionMatrix& projector, const AberrationSpec& aberration,
                        const TraceOptions& options)
{
    intr.validate();
    aberration.validate();
    const int w = intr.sensor_width, h = intr.sensor_height;
    require(grid.width() == w && grid.height() == h, "trace: lenslet grid does not match the sensor");
    TraceResult tr{Image(w, h, kNaN), Image(w, h, kNaN), Image(w, h, 0.0), Mask(w, h, 0), Mask(w, h, 0), std::nullopt};
    if (options.ledger)
        tr.ledger = RayLedger{Image(w, h, kNaN), Image(w, h, kNaN), Image(w, h, kNaN), Image(w, h, kNaN),
                              Image(w, h, kNaN), Image(w, h, kNaN), Image(w, h, kNaN)};
    const double Zn = std::max(scene.z_near() - options.z_margin, intr.f_L * 1.5);
    const double Zf = scene.z_far() + options.z_margin;
    const double zn = image_distance_from_depth(Zn, intr.f_L);
    const double zf = image_distance_from_depth(Zf, intr.f_L);
    const double v_mid = v_from_depth(0.5 * (Zn + Zf), intr);

#pragma omp parallel for schedule(dynamic, 4)
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const int t = grid.label(x, y);
            if (t < 0) continue;
            tr.lenslet(x, y) = 1;
            const Vec2 s(x, y);
            const Vec2& c = grid.center(t);
            auto point = [&](double v, IncidentAngle& th) {
                th = chief_ray_angle(s, c, v, intr);
                const double Z = depth_from_image_distance(dcm_forward(aberration, th, v, intr), intr.f_L);
                return Vec3(th.theta_x * Z, th.theta_y * Z, Z);
            };
            auto g = [&](double v) {
                IncidentAngle th;
                const Vec3 P = point(v, th);
                const double S = scene.depth(P.x(), P.y());
                return std::isfinite(S) ? P.z() - S : -1.0;
            };
            const IncidentAngle th0 = chief_ray_angle(s, c, v_mid, intr);
            double v_hi, v_lo;
            try {
                v_hi = solve_observed_v(aberration, th0, zn, intr) + 0.3;
                v_lo = std::max(1.01, solve_observed_v(aberration, th0, zf, intr) - 0.3);
            } catch (const NumericalError&) {
                continue;
            }
            double b = v_hi, gb = g(b);
            double root = kNaN;
            while (b > v_lo) {
                const double a = std::max(b - options.v_step, v_lo);
                const double ga = g(a);
                if (gb < 0 && ga >= 0) {
                    // Illinois false position on [a, b]: g(a) >= 0 > g(b)
                    double lo = a, glo = ga, hi = b, ghi = gb;
                    int side = 0;
                    for (int i = 0; i < 200 && hi - lo > 1e-12; ++i) {
                        double m = (lo * ghi - hi * glo) / (ghi - glo);
                        if (!(m > lo && m < hi)) m = 0.5 * (lo + hi);
                        const double gm = g(m);
                        if (gm >= 0) {
                            lo = m;
                            glo = gm;
                            if (side == -1) ghi *= 0.5;
                            side = -1;
                        } else {
                            hi = m;
                            ghi = gm;
                            if (side == 1) glo *= 0.5;
                            side = 1;
                        }
                        if (gm == 0) {
                            hi = lo;
                            break;
                        }
                    }
                    root = lo;
                    break;
                }
                b = a;
                gb = ga;
            }
            if (!std::isfinite(root)) continue;
            IncidentAngle th;
            const Vec3 P = point(root, th);
            Vec2 xp;
            try {
                xp = project(projector, P);
            } catch (const NumericalError&) {
                continue;
            }
            if (tr.ledger) {
                auto& L = *tr.ledger;
                L.theta_x(x, y) = th.theta_x;
                L.theta_y(x, y) = th.theta_y;
                L.X(x, y) = P.x();
                L.Y(x, y) = P.y();
                L.Z(x, y) = P.z();
                L.v(x, y) = root;
                L.D(x, y) = disparity_from_v(root, intr);
            }
            tr.xp(x, y) = xp.x();
            tr.yp(x, y) = xp.y();
            tr.albedo(x, y) = scene.albedo(P.x(), P.y(), P.z());
            tr.hit(x, y) = 1;
        }
    return tr;
}

std::vector<Image> shade(const TraceResult& trace, const FringeConfig& fringe, const NoiseSpec& noise,
                         const Illumination& light, std::uint64_t stream)
{
    fringe.validate();
    const int w = trace.xp.width(), h = trace.xp.height();
    const bool rows = fringe.orientation == FringeOrientation::Rows;
    std::vector<Image> out;
    for (int n = 0; n < fringe.N; ++n) {
        Image img(w, h, 0.0);
        const std::uint64_t st = stream * 1024 + static_cast<std::uint64_t>(n) + 1;
#pragma omp parallel for schedule(static)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const std::size_t i = img.index(x, y);
                if (!trace.lenslet[i]) continue;
                double v;
                if (trace.hit[i]) {
                    const double coord = rows ? trace.yp[i] : trace.xp[i];
                    const bool inside = trace.xp[i] >= -0.5 && trace.xp[i] <= fringe.width - 0.5 &&
                                        trace.yp[i] >= -0.5 && trace.yp[i] <= fringe.height - 0.5;
                    v = trace.albedo[i] * (light.ambient + (inside ? light.gain * fringe.intensity(n, coord) : 0.0));
                } else {
                    v = 0.2 * light.ambient;
                }
                if (noise.fixed_pattern > 0) v *= 1.0 + noise.fixed_pattern * counter_gaussian(noise.seed, 0xF17ED, i);
                if (noise.sigma > 0) v += noise.sigma * counter_gaussian(noise.seed, st, i);
                img[i] = std::max(v, 0.0);
            }
        out.push_back(std::move(img));
    }
    return out;
}

RenderResult render_lightfield(const Scene& scene, const FringeConfig& fringe, const PlenopticIntrinsics& intr,
                               const LensletGrid& grid, const ProjectionMatrix& projector,
                               const AberrationSpec& aberration, const NoiseSpec& noise,
                               const TraceOptions& options, const Illumination& light)
{
    RenderResult r;
    r.trace = trace_scene(scene, intr, grid, projector, aberration, options);
    r.images = shade(r.trace, fringe, noise, light, 0);
    return r;
}

GroundTruth ground_truth_cloud(const Scene& scene, const VirtualCamera& vcam, const ProjectionMatrix& projector,
                               const FringeConfig& fringe)
{
    const int w = vcam.width, h = vcam.height;
    GroundTruth gt;
    gt.cloud.width = w;
    gt.cloud.height = h;
    gt.cloud.points.assign(static_cast<std::size_t>(w) * h, Vec3::Constant(kNaN));
    gt.cloud.valid.assign(static_cast<std::size_t>(w) * h, 0);
    gt.Z = Image(w, h, kNaN);
    gt.yp = Image(w, h, kNaN);
    gt.Phi = Image(w, h, kNaN);
    gt.valid = Mask(w, h, 0);
    const double lo = scene.z_near() - 5, hi = scene.z_far() + 5;
    const bool rows = fringe.orientation == FringeOrientation::Rows;
#pragma omp parallel for schedule(dynamic, 4)
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const IncidentAngle th = vcam.theta(x, y);
            const double Z = intersect_ray(scene, th, lo, hi);
            if (!std::isfinite(Z)) continue;
            const Vec3 P(th.theta_x * Z, th.theta_y * Z, Z);
            const Vec2 xp = project(projector, P);
            if (xp.x() < -0.5 || xp.x() > fringe.width - 0.5 || xp.y() < -0.5 || xp.y() > fringe.height - 0.5) continue;
            const std::size_t i = gt.Z.index(x, y);
            gt.cloud.points[i] = P;
            gt.cloud.valid[i] = 1;
            gt.Z[i] = Z;
            gt.yp[i] = xp.y();
            gt.Phi[i] = fringe.phase_of(rows ? xp.y() : xp.x());
            gt.valid[i] = 1;
        }
    return gt;
}

SessionSpec SessionSpec::defaults(const FieldOfView& fov)
{
    SessionSpec s;
    const double spacing = std::min(1.5 * fov.half_x / 6.0, 1.5 * fov.half_y / 4.0);
    s.board = CirclePattern{7, 5, spacing, 0.28 * spacing, 0.25, 1.0};
    s.targets = {{{0, 0, 392}, 12, 0}, {{0, 0, 405}, 0, 15}, {{0, 0, 418}, -10, -10}, {{0, 0, 400}, 8, -12}};
    return s;
}

SimulatedSession::SimulatedSession(SimulatedSystem system, AberrationSpec aberration, SessionSpec spec)
    : system_(std::move(system)), aberration_(aberration), spec_(std::move(spec))
{
    require(spec_.freqs.size() == spec_.steps.size() && !spec_.freqs.empty(), "session: one step count per frequency");
    for (double Z : spec_.plate_Z)
        if (Z < spec_.Z_min || Z > spec_.Z_max)
            throw ValidationError("session: plate at " + std::to_string(Z) + " mm lies outside the working volume [" +
                                  std::to_string(spec_.Z_min) + ", " + std::to_string(spec_.Z_max) + "]");
    for (const auto& t : spec_.targets)
        if (t.center.z() < spec_.Z_min || t.center.z() > spec_.Z_max)
            throw ValidationError("session: target pose outside the working volume");
}

FringeConfig SimulatedSession::fringe(int k, FringeOrientation o) const
{
    FringeConfig f;
    f.f = spec_.freqs[static_cast<std::size_t>(k)];
    f.N = spec_.steps[static_cast<std::size_t>(k)];
    f.width = system_.projector_spec.width;
    f.height = system_.projector_spec.height;
    f.orientation = o;
    return f;
}

PlateCapture SimulatedSession::plate(int i) const
{
    const double Z = spec_.plate_Z.at(static_cast<std::size_t>(i));
    const PlaneScene scene(Vec3(0, 0, Z));
    const TraceResult tr = trace_scene(scene, system_.intr, system_.grid, system_.projector, aberration_);
    PlateCapture cap;
    cap.Z_nominal = Z;
    cap.projector_width = system_.projector_spec.width;
    cap.projector_height = system_.projector_spec.height;
    cap.freqs = spec_.freqs;
    cap.steps = spec_.steps;
    for (std::size_t k = 0; k < spec_.freqs.size(); ++k)
        cap.rows.push_back(shade(tr, fringe(static_cast<int>(k), FringeOrientation::Rows), spec_.noise, {},
                                 static_cast<std::uint64_t>(1000 + 10 * i) + k));
    return cap;
}

TargetCapture SimulatedSession::target(int i) const
{
    const TargetPose& pose = spec_.targets.at(static_cast<std::size_t>(i));
    const PlaneScene scene(pose.center, pose.tilt_x_deg, pose.tilt_y_deg, spec_.board, "target");
    const TraceResult tr = trace_scene(scene, system_.intr, system_.grid, system_.projector, aberration_);
    TargetCapture cap;
    cap.world_points = scene.circle_centers();
    cap.grid_cols = spec_.board.cols;
    cap.grid_rows = spec_.board.rows;
    cap.projector_width = system_.projector_spec.width;
    cap.projector_height = system_.projector_spec.height;
    cap.freqs = spec_.freqs;
    cap.steps = spec_.steps;
    for (std::size_t k = 0; k < spec_.freqs.size(); ++k) {
        const auto base = static_cast<std::uint64_t>(5000 + 20 * i) + 2 * k;
        cap.rows.push_back(shade(tr, fringe(static_cast<int>(k), FringeOrientation::Rows), spec_.noise, {}, base));
        cap.cols.push_back(shade(tr, fringe(static_cast<int>(k), FringeOrientation::Columns), spec_.noise, {}, base + 1));
    }
    return cap;
}

} // namespace pglf
