#include "pglf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "pglf/calibration.hpp"

namespace pglf {

ErrorStats error_stats(std::vector<double> errors)
{
    ErrorStats s;
    s.count = errors.size();
    if (errors.empty()) return s;
    double sq = 0, ab = 0;
    for (double e : errors) {
        sq += e * e;
        ab += std::abs(e);
        s.max = std::max(s.max, std::abs(e));
    }
    s.rmse = std::sqrt(sq / static_cast<double>(errors.size()));
    s.mae = ab / static_cast<double>(errors.size());
    for (double& e : errors) e = std::abs(e);
    const auto mid = errors.begin() + static_cast<std::ptrdiff_t>(errors.size() / 2);
    std::nth_element(errors.begin(), mid, errors.end());
    s.median = *mid;
    return s;
}

ErrorStats depth_errors(const Image& Z, const Mask& valid, const Image& Z_true, const Mask& truth_valid)
{
    require(Z.same_shape(Z_true) && valid.same_shape(Z) && truth_valid.same_shape(Z), "depth_errors: shape mismatch");
    std::vector<double> e;
    for (std::size_t i = 0; i < Z.size(); ++i)
        if (valid[i] && truth_valid[i] && std::isfinite(Z[i])) e.push_back(Z[i] - Z_true[i]);
    return error_stats(std::move(e));
}

ErrorStats cloud_depth_errors(const PointCloud& cloud, const GroundTruth& gt)
{
    require(cloud.organized() && cloud.width == gt.Z.width() && cloud.height == gt.Z.height(),
            "cloud_depth_errors: cloud is not on the ground-truth grid");
    std::vector<double> e;
    for (std::size_t i = 0; i < cloud.size(); ++i)
        if (cloud.valid[i] && gt.valid[i]) e.push_back(cloud.points[i].z() - gt.Z[i]);
    return error_stats(std::move(e));
}

SuccessRate success_rate(const PhaseMap& phase_v, const DepthMap& ref, const UnwrapResult& unwrap, const GroundTruth& gt)
{
    require(phase_v.phase.same_shape(gt.Z) && ref.Z.same_shape(gt.Z) && unwrap.Phi.same_shape(gt.Z),
            "success_rate: maps are not aligned");
    SuccessRate s;
    for (std::size_t i = 0; i < gt.Z.size(); ++i) {
        if (!phase_v.mask[i] || !ref.valid[i] || !gt.valid[i]) continue;
        ++s.attempted;
        if (unwrap.success[i] && std::abs(unwrap.Phi[i] - gt.Phi[i]) < std::numbers::pi) ++s.correct;
    }
    s.rate = s.attempted ? static_cast<double>(s.correct) / static_cast<double>(s.attempted) : 0.0;
    return s;
}

PlaneFit fit_plane(const std::vector<Vec3>& points)
{
    require(points.size() >= 3, "fit_plane: need at least three points");
    // centred normal equations keep the 3x3 system well conditioned
    Vec3 mean = Vec3::Zero();
    for (const auto& p : points) mean += p;
    mean /= static_cast<double>(points.size());
    Eigen::Matrix3d A = Eigen::Matrix3d::Zero();
    Vec3 b = Vec3::Zero();
    for (const auto& p : points) {
        const Vec3 r(p.x() - mean.x(), p.y() - mean.y(), 1.0);
        A += r * r.transpose();
        b += r * (p.z() - mean.z());
    }
    const Vec3 s = A.ldlt().solve(b);
    PlaneFit f;
    f.a = s.x();
    f.b = s.y();
    f.c = mean.z() + s.z() - f.a * mean.x() - f.b * mean.y();
    f.count = points.size();
    double sq = 0;
    for (const auto& p : points) sq += std::pow(p.z() - f.at(p.x(), p.y()), 2);
    f.rms = std::sqrt(sq / static_cast<double>(points.size()));
    return f;
}

StepReport step_heights(const PointCloud& cloud, const StaircaseScene& scene, double margin)
{
    const auto& edges = scene.edges();
    const auto& depths = scene.tiers();
    std::vector<std::vector<Vec3>> pts(depths.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        if (!cloud.valid[i]) continue;
        const Vec3& p = cloud.points[i];
        const int t = scene.tier_of(p.x());
        const bool far_lo = t == 0 || p.x() - edges[static_cast<std::size_t>(t - 1)] >= margin;
        const bool far_hi = t == static_cast<int>(edges.size()) || edges[static_cast<std::size_t>(t)] - p.x() >= margin;
        if (far_lo && far_hi) pts[static_cast<std::size_t>(t)].push_back(p);
    }
    StepReport r;
    for (auto& p : pts) r.tiers.push_back(fit_plane(p));
    double sum = 0;
    for (std::size_t k = 0; k < edges.size(); ++k) {
        const double h = std::abs(r.tiers[k + 1].at(edges[k], 0) - r.tiers[k].at(edges[k], 0));
        const double e = std::abs(depths[k + 1] - depths[k]);
        r.heights.push_back(h);
        r.expected.push_back(e);
        sum += std::abs(h - e);
    }
    r.mae = edges.empty() ? 0.0 : sum / static_cast<double>(edges.size());
    return r;
}

CircleGridReport circle_grid_distances(const Image& intensity, const Mask& valid, const PointCloud& cloud,
                                       const ProjectionMatrix& mc, int cols, int rows, double spacing, int window)
{
    require(cloud.organized() && cloud.width == intensity.width() && cloud.height == intensity.height(),
            "circle_grid_distances: cloud and intensity are not aligned");
    const auto ordered = order_grid(detect_circles(intensity, valid, 6, static_cast<int>(intensity.size() / 8)), cols, rows);
    if (window <= 0) {
        // half the centre spacing in pixels, measured along the first row or column
        const double px = cols > 1 ? (ordered[1] - ordered[0]).norm() : (ordered[static_cast<std::size_t>(cols)] - ordered[0]).norm();
        window = std::max(4, static_cast<int>(0.5 * px));
    }
    CircleGridReport r;
    r.expected = spacing;
    for (const Vec2& c : ordered) {
        std::vector<Vec3> pts;
        const int cx = static_cast<int>(std::lround(c.x())), cy = static_cast<int>(std::lround(c.y()));
        for (int y = cy - window; y <= cy + window; ++y)
            for (int x = cx - window; x <= cx + window; ++x) {
                if (x < 0 || y < 0 || x >= cloud.width || y >= cloud.height) continue;
                const std::size_t i = static_cast<std::size_t>(y) * cloud.width + x;
                if (cloud.valid[i]) pts.push_back(cloud.points[i]);
            }
        const PlaneFit pl = fit_plane(pts);
        // the ray is affine in Z, so one secant step lands on the plane
        const Vec3 p0 = back_project_at_depth(mc, c, 300.0), p1 = back_project_at_depth(mc, c, 500.0);
        const double f0 = p0.z() - pl.at(p0.x(), p0.y()), f1 = p1.z() - pl.at(p1.x(), p1.y());
        require(std::abs(f1 - f0) > 1e-12, "circle_grid_distances: ray parallel to the fitted plane");
        r.centers.push_back(p0 + (p1 - p0) * (f0 / (f0 - f1)));
    }
    double sum = 0;
    for (int j = 0; j < rows; ++j)
        for (int i = 0; i < cols; ++i) {
            const Vec3& a = r.centers[static_cast<std::size_t>(j * cols + i)];
            if (i + 1 < cols) r.distances.push_back((r.centers[static_cast<std::size_t>(j * cols + i + 1)] - a).norm());
            if (j + 1 < rows) r.distances.push_back((r.centers[static_cast<std::size_t>((j + 1) * cols + i)] - a).norm());
        }
    for (double d : r.distances) sum += std::abs(d - spacing);
    r.mae = r.distances.empty() ? 0.0 : sum / static_cast<double>(r.distances.size());
    return r;
}

} // namespace pglf
