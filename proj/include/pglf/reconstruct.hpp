#pragma once

#include <span>
#include <vector>

#include "pglf/dcm.hpp"
#include "pglf/fringe.hpp"
#include "pglf/geometry.hpp"
#include "pglf/lightfield.hpp"
#include "pglf/matching.hpp"

namespace pglf {

/// Pinhole camera at the main-lens centre sampling the incident angle at the
/// effective resolution sensor / v_w. `focal`, `cx`, `cy` define the nominal
/// angle <-> pixel map used for refocusing; `projection` holds the calibrated
/// matrix used for metric work (initially the nominal one).
struct VirtualCamera {
    int width = 0;
    int height = 0;
    double v_w = 3.0;
    double focal = 0;
    double cx = 0, cy = 0;
    ProjectionMatrix projection;

    static VirtualCamera make(const PlenopticIntrinsics& intr, double v_w = 3.0);
    ProjectionMatrix nominal() const;
    IncidentAngle theta(double x, double y) const { return {(x - cx) / focal, (y - cy) / focal}; }
    Vec2 pixel(const IncidentAngle& t) const { return {focal * t.theta_x + cx, focal * t.theta_y + cy}; }
};

enum class DepthProvenance { Reprojected, Interpolated, Filtered };

struct DepthMap {
    Image Z;
    Mask valid;
    DepthProvenance provenance = DepthProvenance::Reprojected;

    int width() const { return Z.width(); }
    int height() const { return Z.height(); }
    bool ok(int x, int y) const { return valid.contains(x, y) && valid(x, y) != 0; }
    double coverage() const;
};

/// Per valid disparity pixel: linear depth, chief-ray lateral position and the
/// DCM-corrected point. `quality` carries the virtual depth of each point.
PointCloud initial_point_cloud(const DisparityField& disp, const PlenopticIntrinsics& intr, const LensletGrid& grid,
                               const DcmParams& dcm);

/// Nearest-depth splat of a cloud through vcam.projection.
DepthMap reproject(const PointCloud& cloud, const VirtualCamera& vcam);

struct FilterConfig {
    int fill_radius = 5;
    double gap_factor = 3.0;     ///< gap threshold = factor * median |grad Z|
    double gap_floor = 1.0;      ///< lower bound on the gap threshold, mm
    int median_size = 3;
    int side_radius = 2;
    double bilateral_sigma_s = 3.0;
    double bilateral_sigma_d = 1.0;
    double min_coverage = 0.10;

    void validate() const;
};

/// Edge-preserving hole filling. Each hole takes the median of the valid
/// pixels within the radius that lie on the same side of any depth gap as
/// its nearest valid pixel.
DepthMap fill_gaps(const DepthMap& dm, int radius, double gap_threshold);
/// Median of |grad Z| over valid 4-neighbour pairs.
double median_gradient(const DepthMap& dm);
DepthMap median_filter(const DepthMap& dm, int size);
DepthMap side_window_filter(const DepthMap& dm, int radius);
DepthMap bilateral_filter(const DepthMap& dm, double sigma_s, double sigma_d);

DepthMap fill_and_filter(const DepthMap& dm, const FilterConfig& cfg);

struct RefocusConfig {
    double rim_margin = 1.0;        ///< samples keep this distance from the lenslet rim, px
    bool check_consistency = true;  ///< drop samples whose own disparity disagrees
    double consistency_tol = 1.0;   ///< px
    int vmap_fill_radius = 8;
    double vmap_gap = 0.05;         ///< gap threshold for the virtual-depth map
};

struct RefocusResult {
    std::vector<Image> images;
    Mask valid;
    Image count;
    Image v; ///< virtual depth used per virtual pixel
};

/// Virtual depth on the virtual grid from forward-mapped disparities, hole filled.
Image build_vmap(const DisparityField& disp, const VirtualCamera& vcam, const PlenopticIntrinsics& intr,
                 const LensletGrid& grid, const RefocusConfig& cfg, Mask& valid);

/// Averages, per virtual pixel, every lenslet sample of the same scene point.
RefocusResult refocus(std::span<const Image> images, const DisparityField& disp, const VirtualCamera& vcam,
                      const PlenopticIntrinsics& intr, const LensletGrid& grid, const RefocusConfig& cfg = {});
/// Same with an explicit virtual-depth map.
RefocusResult refocus_with_vmap(std::span<const Image> images, const Image& vmap, const Mask& vmask,
                                const DisparityField* disp, const VirtualCamera& vcam,
                                const PlenopticIntrinsics& intr, const LensletGrid& grid, const RefocusConfig& cfg);

struct UnwrapResult {
    Image Phi;
    Image Phi_ref;
    Grid<int> order;
    Mask success;
};

UnwrapResult unwrap_with_reference(const PhaseMap& phase_v, const DepthMap& ref, const ProjectionMatrix& mc,
                                   const ProjectionMatrix& mp, const FringeConfig& fringe);

/// Organised cloud at virtual-camera resolution; invalid sites are NaN.
PointCloud final_point_cloud(const UnwrapResult& unwrap, const ProjectionMatrix& mc, const ProjectionMatrix& mp,
                             const FringeConfig& fringe);

} // namespace pglf
