#pragma once

#include <vector>

#include "pglf/geometry.hpp"
#include "pglf/reconstruct.hpp"
#include "pglf/simulator.hpp"

namespace pglf {

struct ErrorStats {
    std::size_t count = 0;
    double rmse = 0;
    double mae = 0;
    double median = 0;
    double max = 0;
};

ErrorStats error_stats(std::vector<double> errors);

/// |Z - Z_true| over pixels valid in both maps.
ErrorStats depth_errors(const Image& Z, const Mask& valid, const Image& Z_true, const Mask& truth_valid);
ErrorStats cloud_depth_errors(const PointCloud& cloud, const GroundTruth& gt);

struct SuccessRate {
    std::size_t attempted = 0; ///< wrapped phase, reference and truth available
    std::size_t correct = 0;   ///< unwrapped and within pi of the true absolute phase
    double rate = 0;
};

SuccessRate success_rate(const PhaseMap& phase_v, const DepthMap& ref, const UnwrapResult& unwrap, const GroundTruth& gt);

/// Least-squares plane Z = a X + b Y + c.
struct PlaneFit {
    double a = 0, b = 0, c = 0;
    double rms = 0; ///< RMS of Z residuals
    std::size_t count = 0;
    double at(double X, double Y) const { return a * X + b * Y + c; }
};

PlaneFit fit_plane(const std::vector<Vec3>& points);

struct StepReport {
    std::vector<PlaneFit> tiers;
    std::vector<double> heights;  ///< measured, between consecutive tiers at the shared edge
    std::vector<double> expected;
    double mae = 0;
};

/// Plane per tier from cloud points at least `margin` mm from the tier edges.
StepReport step_heights(const PointCloud& cloud, const StaircaseScene& scene, double margin = 2.0);

struct CircleGridReport {
    std::vector<Vec3> centers;     ///< measured, row-major
    std::vector<double> distances; ///< between row and column neighbours
    double expected = 0;
    double mae = 0;
};

/// Circle centres from the refocused intensity: each centroid's camera ray
/// meets a plane fitted to the final cloud around it.
CircleGridReport circle_grid_distances(const Image& intensity, const Mask& valid, const PointCloud& cloud,
                                       const ProjectionMatrix& mc, int cols, int rows, double spacing,
                                       int window = 0);

} // namespace pglf
