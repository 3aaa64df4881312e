#include "pglf/lightfield.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pglf {

void PlenopticIntrinsics::validate() const
{
    require(D_mu > 0, "intrinsics: D_mu must be positive");
    require(d_mu > 0, "intrinsics: d_mu must be positive");
    require(f_L > 0, "intrinsics: f_L must be positive");
    require(std::isfinite(d) && d > 0, "intrinsics: d must be positive");
    require(sensor_width > 0 && sensor_height > 0, "intrinsics: sensor dimensions must be positive");
    require(pixel_pitch > 0, "intrinsics: pixel pitch must be positive");
}

LensletGrid::LensletGrid(std::vector<Vec2> centers, LensletLayout layout, double D_mu, int width, int height)
    : centers_(std::move(centers)), layout_(layout), D_mu_(D_mu), labels_(width, height, -1)
{
    require(D_mu > 0, "lenslet grid: diameter must be positive");
    const double r = radius();
    Grid<double> best(width, height, std::numeric_limits<double>::infinity());
    for (int i = 0; i < size(); ++i) {
        const Vec2& c = centers_[static_cast<std::size_t>(i)];
        const int x0 = std::max(0, static_cast<int>(std::floor(c.x() - r)));
        const int x1 = std::min(width - 1, static_cast<int>(std::ceil(c.x() + r)));
        const int y0 = std::max(0, static_cast<int>(std::floor(c.y() - r)));
        const int y1 = std::min(height - 1, static_cast<int>(std::ceil(c.y() + r)));
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) {
                const double dist = std::hypot(x - c.x(), y - c.y());
                if (dist <= r && dist < best(x, y)) {
                    best(x, y) = dist;
                    labels_(x, y) = i;
                }
            }
    }

    bucket_w_ = std::max(1, static_cast<int>(std::ceil(width / D_mu)) + 1);
    bucket_h_ = std::max(1, static_cast<int>(std::ceil(height / D_mu)) + 1);
    buckets_.assign(static_cast<std::size_t>(bucket_w_) * bucket_h_, {});
    for (int i = 0; i < size(); ++i) {
        const Vec2& c = centers_[static_cast<std::size_t>(i)];
        const int bx = std::clamp(static_cast<int>(std::floor(c.x() / D_mu)), 0, bucket_w_ - 1);
        const int by = std::clamp(static_cast<int>(std::floor(c.y() / D_mu)), 0, bucket_h_ - 1);
        buckets_[static_cast<std::size_t>(by) * bucket_w_ + bx].push_back(i);
    }

    neighbors_.assign(centers_.size(), {});
    std::vector<int> near;
    for (int i = 0; i < size(); ++i) {
        const Vec2& c = centers_[static_cast<std::size_t>(i)];
        lenslets_near(c, 1.1 * D_mu, near);
        auto& list = neighbors_[static_cast<std::size_t>(i)];
        for (int j : near) {
            if (j == i) continue;
            const Vec2 delta = centers_[static_cast<std::size_t>(j)] - c;
            if (std::abs(delta.norm() - D_mu) <= 0.01 * D_mu) list.push_back({j, delta.normalized()});
        }
        std::sort(list.begin(), list.end(), [](const LensletNeighbor& a, const LensletNeighbor& b) {
            return std::atan2(a.u.y(), a.u.x()) < std::atan2(b.u.y(), b.u.x());
        });
    }
}

LensletGrid LensletGrid::make(const PlenopticIntrinsics& intr, LensletLayout layout)
{
    require(intr.D_mu > 0 && intr.sensor_width > 0 && intr.sensor_height > 0, "lenslet grid: bad intrinsics");
    const double D = intr.D_mu;
    const double r = 0.5 * D;
    const Vec2 axis = intr.axis();
    const double row_step = layout == LensletLayout::Hexagonal ? D * std::sqrt(3.0) / 2.0 : D;
    const double xmin = r - 0.5, xmax = intr.sensor_width - 0.5 - r;
    const double ymin = r - 0.5, ymax = intr.sensor_height - 0.5 - r;
    const int rows = static_cast<int>(std::ceil(intr.sensor_height / row_step)) + 1;
    const int cols = static_cast<int>(std::ceil(intr.sensor_width / D)) + 1;
    std::vector<Vec2> centers;
    for (int ri = -rows; ri <= rows; ++ri) {
        const double y = axis.y() + ri * row_step;
        if (y < ymin || y > ymax) continue;
        const double shift = layout == LensletLayout::Hexagonal && (std::abs(ri) % 2 == 1) ? 0.5 * D : 0.0;
        for (int ci = -cols; ci <= cols; ++ci) {
            const double x = axis.x() + ci * D + shift;
            if (x < xmin || x > xmax) continue;
            centers.emplace_back(x, y);
        }
    }
    return LensletGrid(std::move(centers), layout, D, intr.sensor_width, intr.sensor_height);
}

void LensletGrid::lenslets_near(const Vec2& p, double radius, std::vector<int>& out) const
{
    out.clear();
    if (buckets_.empty()) return;
    const int bx0 = std::max(0, static_cast<int>(std::floor((p.x() - radius) / D_mu_)));
    const int bx1 = std::min(bucket_w_ - 1, static_cast<int>(std::floor((p.x() + radius) / D_mu_)));
    const int by0 = std::max(0, static_cast<int>(std::floor((p.y() - radius) / D_mu_)));
    const int by1 = std::min(bucket_h_ - 1, static_cast<int>(std::floor((p.y() + radius) / D_mu_)));
    for (int by = by0; by <= by1; ++by)
        for (int bx = bx0; bx <= bx1; ++bx)
            for (int i : buckets_[static_cast<std::size_t>(by) * bucket_w_ + bx])
                if ((centers_[static_cast<std::size_t>(i)] - p).norm() <= radius) out.push_back(i);
    std::sort(out.begin(), out.end());
}

int LensletGrid::lenslet_at(const Vec2& p) const
{
    thread_local std::vector<int> near;
    lenslets_near(p, radius(), near);
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (int i : near) {
        const double dist = (centers_[static_cast<std::size_t>(i)] - p).norm();
        if (dist < best_d) {
            best_d = dist;
            best = i;
        }
    }
    return best;
}

double virtual_depth(double D, const PlenopticIntrinsics& intr)
{
    const double den = intr.D_mu - D;
    if (std::abs(den) < 1e-12) throw NumericalError("virtual depth is infinite at D = D_mu");
    return intr.D_mu / den;
}

double disparity_from_v(double v, const PlenopticIntrinsics& intr)
{
    if (v == 0) throw NumericalError("disparity undefined at v = 0");
    return intr.D_mu * (1.0 - 1.0 / v);
}

double depth_from_image_distance(double z, double f_L)
{
    const double den = z - f_L;
    if (std::abs(den) < 1e-12) throw NumericalError("focal singularity: image distance equals f_L");
    return z * f_L / den;
}

double image_distance_from_depth(double Z, double f_L)
{
    const double den = Z - f_L;
    if (std::abs(den) < 1e-12) throw NumericalError("focal singularity: depth equals f_L");
    return Z * f_L / den;
}

DepthPair depth_from_v(double v, const PlenopticIntrinsics& intr)
{
    if (!std::isfinite(v)) throw NumericalError("depth_from_v: non-finite virtual depth");
    const double z = (v * intr.d_mu + intr.d) * intr.pixel_pitch;
    return {z, depth_from_image_distance(z, intr.f_L)};
}

double v_from_depth(double Z, const PlenopticIntrinsics& intr)
{
    const double z = image_distance_from_depth(Z, intr.f_L);
    return (z / intr.pixel_pitch - intr.d) / intr.d_mu;
}

IncidentAngle incident_angles(double x, double y, double z)
{
    if (z == 0) throw NumericalError("incident_angles: z = 0");
    return {x / z, y / z};
}

ImagePoint image_point(const Vec2& s, const Vec2& c, double v, const PlenopticIntrinsics& intr)
{
    const Vec2 c_mm = intr.to_mm(c);
    const Vec2 s_mm = intr.to_mm(s);
    return {c_mm + v * (s_mm - c_mm), (v * intr.d_mu + intr.d) * intr.pixel_pitch};
}

IncidentAngle chief_ray_angle(const Vec2& s, const Vec2& c, double v, const PlenopticIntrinsics& intr)
{
    const ImagePoint ip = image_point(s, c, v, intr);
    return incident_angles(ip.q.x(), ip.q.y(), ip.a);
}

LateralModel lateral_model(const Vec2& s, const Vec2& c, const PlenopticIntrinsics& intr)
{
    const Vec2 c_mm = intr.to_mm(c);
    const Vec2 B = (intr.to_mm(s) - c_mm) / intr.d_mu_mm();
    const Vec2 A = c_mm - B * intr.d_mm();
    return {A / intr.f_L + B, -A};
}

Vec2 lateral_coords(double Z_r, const Vec2& s, const Vec2& c, const PlenopticIntrinsics& intr)
{
    const LateralModel m = lateral_model(s, c, intr);
    return m.k * Z_r + m.b;
}

} // namespace pglf
