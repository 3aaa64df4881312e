#include "pglf/reconstruct.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pglf {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double median_of(std::vector<double>& v)
{
    const std::size_t n = v.size();
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(n / 2), v.end());
    const double hi = v[n / 2];
    if (n % 2) return hi;
    const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(n / 2));
    return 0.5 * (lo + hi);
}
} // namespace

VirtualCamera VirtualCamera::make(const PlenopticIntrinsics& intr, double v_w)
{
    intr.validate();
    require(v_w > 1, "virtual camera: working virtual depth must exceed 1");
    VirtualCamera c;
    c.v_w = v_w;
    c.width = static_cast<int>(std::lround(intr.sensor_width / v_w));
    c.height = static_cast<int>(std::lround(intr.sensor_height / v_w));
    c.focal = (intr.d + v_w * intr.d_mu) / v_w;
    c.cx = (c.width - 1) / 2.0;
    c.cy = (c.height - 1) / 2.0;
    c.projection = c.nominal();
    return c;
}

ProjectionMatrix VirtualCamera::nominal() const
{
    Mat34 m = Mat34::Zero();
    m(0, 0) = focal;
    m(1, 1) = focal;
    m(0, 2) = cx;
    m(1, 2) = cy;
    m(2, 2) = 1;
    return {m, Device::Camera};
}

double DepthMap::coverage() const
{
    if (valid.empty()) return 0;
    std::size_t n = 0;
    for (auto v : valid.storage()) n += v != 0;
    return static_cast<double>(n) / static_cast<double>(valid.size());
}

PointCloud initial_point_cloud(const DisparityField& disp, const PlenopticIntrinsics& intr, const LensletGrid& grid,
                               const DcmParams& dcm)
{
    PointCloud cloud;
    for (int y = 0; y < disp.height(); ++y)
        for (int x = 0; x < disp.width(); ++x) {
            if (!disp.ok(x, y)) continue;
            const int t = grid.label(x, y);
            if (t < 0) continue;
            const Vec2 s(x, y);
            const double v = virtual_depth(disp.D(x, y), intr);
            const double Z_r = depth_from_v(v, intr).Z;
            const Vec2 XY = lateral_coords(Z_r, s, grid.center(t), intr);
            const IncidentAngle theta{XY.x() / Z_r, XY.y() / Z_r};
            const double Zc = depth_from_image_distance(dcm_forward(dcm, theta, v, intr), intr.f_L);
            cloud.points.emplace_back(theta.theta_x * Zc, theta.theta_y * Zc, Zc);
            cloud.valid.push_back(1);
            cloud.quality.push_back(static_cast<float>(v));
        }
    return cloud;
}

DepthMap reproject(const PointCloud& cloud, const VirtualCamera& vcam)
{
    DepthMap dm{Image(vcam.width, vcam.height, kNaN), Mask(vcam.width, vcam.height, 0), DepthProvenance::Reprojected};
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        if (!cloud.valid[i]) continue;
        const Vec3& P = cloud.points[i];
        Vec2 px;
        try {
            px = project(vcam.projection, P);
        } catch (const NumericalError&) {
            continue;
        }
        const long xi = std::lround(px.x()), yi = std::lround(px.y());
        if (xi < 0 || yi < 0 || xi >= vcam.width || yi >= vcam.height) continue;
        const int x = static_cast<int>(xi), y = static_cast<int>(yi);
        if (!dm.valid(x, y) || P.z() < dm.Z(x, y)) {
            dm.Z(x, y) = P.z();
            dm.valid(x, y) = 1;
        }
    }
    return dm;
}

void FilterConfig::validate() const
{
    require(fill_radius >= 0, "filter: fill radius must be non-negative");
    require(gap_factor > 0 && gap_floor >= 0, "filter: gap parameters must be positive");
    require(median_size >= 1 && median_size % 2 == 1, "filter: median size must be odd");
    require(side_radius >= 1, "filter: side-window radius must be at least 1");
    require(bilateral_sigma_s > 0 && bilateral_sigma_d > 0, "filter: bilateral sigmas must be positive");
    require(min_coverage >= 0 && min_coverage <= 1, "filter: coverage floor must lie in [0, 1]");
}

DepthMap fill_gaps(const DepthMap& dm, int radius, double gap_threshold)
{
    DepthMap out = dm;
    out.provenance = DepthProvenance::Interpolated;
    const int w = dm.width(), h = dm.height();
#pragma omp parallel
    {
        std::vector<double> vals;
#pragma omp for schedule(dynamic, 8)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                if (dm.ok(x, y)) continue;
                int best = std::numeric_limits<int>::max();
                double zn = 0;
                for (int dy = -radius; dy <= radius; ++dy)
                    for (int dx = -radius; dx <= radius; ++dx) {
                        const int r2 = dx * dx + dy * dy;
                        if (r2 > radius * radius || r2 >= best || !dm.ok(x + dx, y + dy)) continue;
                        best = r2;
                        zn = dm.Z(x + dx, y + dy);
                    }
                if (best == std::numeric_limits<int>::max()) continue;
                vals.clear();
                for (int dy = -radius; dy <= radius; ++dy)
                    for (int dx = -radius; dx <= radius; ++dx) {
                        if (dx * dx + dy * dy > radius * radius || !dm.ok(x + dx, y + dy)) continue;
                        const double z = dm.Z(x + dx, y + dy);
                        if (std::abs(z - zn) <= gap_threshold) vals.push_back(z - zn);
                    }
                out.Z(x, y) = zn + median_of(vals);
                out.valid(x, y) = 1;
            }
    }
    return out;
}

double median_gradient(const DepthMap& dm)
{
    std::vector<double> g;
    for (int y = 0; y < dm.height(); ++y)
        for (int x = 0; x < dm.width(); ++x) {
            if (!dm.ok(x, y)) continue;
            if (dm.ok(x + 1, y)) g.push_back(std::abs(dm.Z(x + 1, y) - dm.Z(x, y)));
            if (dm.ok(x, y + 1)) g.push_back(std::abs(dm.Z(x, y + 1) - dm.Z(x, y)));
        }
    return g.empty() ? 0.0 : median_of(g);
}

DepthMap median_filter(const DepthMap& dm, int size)
{
    DepthMap out = dm;
    const int r = size / 2;
#pragma omp parallel
    {
        std::vector<double> diffs;
#pragma omp for schedule(static)
        for (int y = 0; y < dm.height(); ++y)
            for (int x = 0; x < dm.width(); ++x) {
                if (!dm.ok(x, y)) continue;
                diffs.clear();
                const double zc = dm.Z(x, y);
                for (int dy = -r; dy <= r; ++dy)
                    for (int dx = -r; dx <= r; ++dx)
                        if (dm.ok(x + dx, y + dy)) diffs.push_back(dm.Z(x + dx, y + dy) - zc);
                out.Z(x, y) = zc + median_of(diffs);
            }
    }
    return out;
}

DepthMap side_window_filter(const DepthMap& dm, int radius)
{
    // column range, row range of the eight half/quarter windows
    const int r = radius;
    const int win[8][4] = {{-r, 0, -r, r}, {0, r, -r, r}, {-r, r, -r, 0}, {-r, r, 0, r},
                           {-r, 0, -r, 0}, {0, r, -r, 0}, {-r, 0, 0, r},  {0, r, 0, r}};
    DepthMap out = dm;
#pragma omp parallel for schedule(static)
    for (int y = 0; y < dm.height(); ++y)
        for (int x = 0; x < dm.width(); ++x) {
            if (!dm.ok(x, y)) continue;
            const double zc = dm.Z(x, y);
            double best = 0;
            double best_abs = std::numeric_limits<double>::infinity();
            for (const auto& wnd : win) {
                double sum = 0;
                int n = 0;
                for (int dy = wnd[2]; dy <= wnd[3]; ++dy)
                    for (int dx = wnd[0]; dx <= wnd[1]; ++dx)
                        if (dm.ok(x + dx, y + dy)) {
                            sum += dm.Z(x + dx, y + dy) - zc;
                            ++n;
                        }
                const double mean = sum / n;
                if (std::abs(mean) < best_abs) {
                    best_abs = std::abs(mean);
                    best = mean;
                }
            }
            out.Z(x, y) = zc + best;
        }
    return out;
}

DepthMap bilateral_filter(const DepthMap& dm, double sigma_s, double sigma_d)
{
    DepthMap out = dm;
    const int r = static_cast<int>(std::ceil(2 * sigma_s));
    std::vector<double> spatial(static_cast<std::size_t>((2 * r + 1) * (2 * r + 1)));
    for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx)
            spatial[static_cast<std::size_t>((dy + r) * (2 * r + 1) + dx + r)] =
                std::exp(-(dx * dx + dy * dy) / (2 * sigma_s * sigma_s));
    const double inv2d = 1.0 / (2 * sigma_d * sigma_d);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < dm.height(); ++y)
        for (int x = 0; x < dm.width(); ++x) {
            if (!dm.ok(x, y)) continue;
            const double zc = dm.Z(x, y);
            double sw = 0, swd = 0;
            for (int dy = -r; dy <= r; ++dy)
                for (int dx = -r; dx <= r; ++dx) {
                    if (!dm.ok(x + dx, y + dy)) continue;
                    const double dz = dm.Z(x + dx, y + dy) - zc;
                    const double wgt = spatial[static_cast<std::size_t>((dy + r) * (2 * r + 1) + dx + r)] * std::exp(-dz * dz * inv2d);
                    sw += wgt;
                    swd += wgt * dz;
                }
            out.Z(x, y) = zc + swd / sw;
        }
    return out;
}

DepthMap fill_and_filter(const DepthMap& dm, const FilterConfig& cfg)
{
    cfg.validate();
    const double cov = dm.coverage();
    if (cov < cfg.min_coverage)
        throw ValidationError("fill_and_filter: insufficient coverage " + std::to_string(cov) + " < " +
                              std::to_string(cfg.min_coverage));
    const double gap = std::max(cfg.gap_factor * median_gradient(dm), cfg.gap_floor);
    DepthMap out = fill_gaps(dm, cfg.fill_radius, gap);
    out = median_filter(out, cfg.median_size);
    out = side_window_filter(out, cfg.side_radius);
    out = bilateral_filter(out, cfg.bilateral_sigma_s, cfg.bilateral_sigma_d);
    out.provenance = DepthProvenance::Filtered;
    return out;
}

Image build_vmap(const DisparityField& disp, const VirtualCamera& vcam, const PlenopticIntrinsics& intr,
                 const LensletGrid& grid, const RefocusConfig& cfg, Mask& valid)
{
    Image sum(vcam.width, vcam.height, 0.0), cnt(vcam.width, vcam.height, 0.0);
    for (int y = 0; y < disp.height(); ++y)
        for (int x = 0; x < disp.width(); ++x) {
            if (!disp.ok(x, y)) continue;
            const int t = grid.label(x, y);
            if (t < 0) continue;
            const double v = virtual_depth(disp.D(x, y), intr);
            const Vec2 px = vcam.pixel(chief_ray_angle(Vec2(x, y), grid.center(t), v, intr));
            const long xi = std::lround(px.x()), yi = std::lround(px.y());
            if (xi < 0 || yi < 0 || xi >= vcam.width || yi >= vcam.height) continue;
            sum(static_cast<int>(xi), static_cast<int>(yi)) += v;
            cnt(static_cast<int>(xi), static_cast<int>(yi)) += 1;
        }
    DepthMap m{Image(vcam.width, vcam.height, kNaN), Mask(vcam.width, vcam.height, 0), DepthProvenance::Reprojected};
    for (std::size_t i = 0; i < sum.size(); ++i)
        if (cnt[i] > 0) {
            m.Z[i] = sum[i] / cnt[i];
            m.valid[i] = 1;
        }
    m = fill_gaps(m, cfg.vmap_fill_radius, cfg.vmap_gap);
    m = median_filter(m, 3);
    valid = m.valid;
    return m.Z;
}

RefocusResult refocus_with_vmap(std::span<const Image> images, const Image& vmap, const Mask& vmask,
                                const DisparityField* disp, const VirtualCamera& vcam,
                                const PlenopticIntrinsics& intr, const LensletGrid& grid, const RefocusConfig& cfg)
{
    validate_stack(images, 1, "refocus");
    require(images.front().width() == grid.width() && images.front().height() == grid.height(),
            "refocus: images and lenslet grid differ in size");
    require(vmap.width() == vcam.width && vmap.height() == vcam.height, "refocus: v-map does not match the camera");
    const std::size_t N = images.size();
    RefocusResult out;
    out.images.assign(N, Image(vcam.width, vcam.height, 0.0));
    out.valid = Mask(vcam.width, vcam.height, 0);
    out.count = Image(vcam.width, vcam.height, 0.0);
    out.v = vmap;
    const Vec2 axis = intr.axis();
    const double R = grid.radius() - cfg.rim_margin;
#pragma omp parallel
    {
        std::vector<int> near;
        std::vector<double> acc(N);
#pragma omp for schedule(dynamic, 4)
        for (int y = 0; y < vcam.height; ++y)
            for (int x = 0; x < vcam.width; ++x) {
                if (!vmask(x, y)) continue;
                const double v = vmap(x, y);
                if (!(v > 1)) continue;
                const IncidentAngle th = vcam.theta(x, y);
                const double a = intr.d + v * intr.d_mu;
                const Vec2 q = axis + a * Vec2(th.theta_x, th.theta_y);
                const double D_expect = intr.D_mu * (1 - 1 / v);
                grid.lenslets_near(q, v * R, near);
                std::fill(acc.begin(), acc.end(), 0.0);
                int n = 0;
                for (int t : near) {
                    const Vec2& c = grid.center(t);
                    const Vec2 s = c + (q - c) / v;
                    if ((s - c).norm() > R) continue;
                    const int x0 = static_cast<int>(std::floor(s.x())), y0 = static_cast<int>(std::floor(s.y()));
                    if (grid.label(x0, y0) != t || grid.label(x0 + 1, y0) != t || grid.label(x0, y0 + 1) != t ||
                        grid.label(x0 + 1, y0 + 1) != t)
                        continue;
                    if (cfg.check_consistency && disp) {
                        const int xr = static_cast<int>(std::lround(s.x())), yr = static_cast<int>(std::lround(s.y()));
                        if (disp->ok(xr, yr) && std::abs(disp->D(xr, yr) - D_expect) > cfg.consistency_tol) continue;
                    }
                    for (std::size_t k = 0; k < N; ++k) acc[k] += sample_bilinear(images[k], s.x(), s.y());
                    ++n;
                }
                if (n == 0) continue;
                for (std::size_t k = 0; k < N; ++k) out.images[k](x, y) = acc[k] / n;
                out.count(x, y) = n;
                out.valid(x, y) = 1;
            }
    }
    return out;
}

RefocusResult refocus(std::span<const Image> images, const DisparityField& disp, const VirtualCamera& vcam,
                      const PlenopticIntrinsics& intr, const LensletGrid& grid, const RefocusConfig& cfg)
{
    Mask vmask;
    const Image vmap = build_vmap(disp, vcam, intr, grid, cfg, vmask);
    return refocus_with_vmap(images, vmap, vmask, &disp, vcam, intr, grid, cfg);
}

UnwrapResult unwrap_with_reference(const PhaseMap& phase_v, const DepthMap& ref, const ProjectionMatrix& mc,
                                   const ProjectionMatrix& mp, const FringeConfig& fringe)
{
    require(phase_v.phase.same_shape(ref.Z), "unwrap: phase and reference depth are not aligned");
    const int w = phase_v.width(), h = phase_v.height();
    UnwrapResult out{Image(w, h, kNaN), Image(w, h, kNaN), Grid<int>(w, h, 0), Mask(w, h, 0)};
    const bool rows = fringe.orientation == FringeOrientation::Rows;
#pragma omp parallel for schedule(static)
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (!phase_v.valid(x, y) || !ref.ok(x, y)) continue;
            double phi_ref;
            try {
                const Vec3 P = back_project_at_depth(mc, Vec2(x, y), ref.Z(x, y));
                const Vec2 xp = project(mp, P);
                phi_ref = fringe.phase_of(rows ? xp.y() : xp.x());
            } catch (const NumericalError&) {
                continue;
            }
            const double phi = phase_v.phase(x, y);
            const double order = std::round((phi_ref - phi) / kTwoPi);
            const double Phi = phi + kTwoPi * order;
            out.Phi_ref(x, y) = phi_ref;
            out.order(x, y) = static_cast<int>(order);
            out.Phi(x, y) = Phi;
            out.success(x, y) = std::abs(Phi - phi_ref) < std::numbers::pi ? 1 : 0;
        }
    return out;
}

PointCloud final_point_cloud(const UnwrapResult& unwrap, const ProjectionMatrix& mc, const ProjectionMatrix& mp,
                             const FringeConfig& fringe)
{
    require(fringe.orientation == FringeOrientation::Rows, "final_point_cloud: row fringes are required");
    PointCloud cloud;
    cloud.width = unwrap.Phi.width();
    cloud.height = unwrap.Phi.height();
    const std::size_t n = unwrap.Phi.size();
    cloud.points.assign(n, Vec3::Constant(kNaN));
    cloud.valid.assign(n, 0);
    cloud.quality.assign(n, 0.0f);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < cloud.height; ++y)
        for (int x = 0; x < cloud.width; ++x) {
            const std::size_t i = unwrap.Phi.index(x, y);
            if (!unwrap.success[i]) continue;
            try {
                const Vec3 P = triangulate(mc, mp, Vec2(x, y), fringe.coord_of(unwrap.Phi[i]));
                if (!P.allFinite()) continue;
                cloud.points[i] = P;
                cloud.valid[i] = 1;
                cloud.quality[i] = 1.0f;
            } catch (const NumericalError&) {
            }
        }
    return cloud;
}

} // namespace pglf
