#pragma once

#include <vector>

#include "pglf/geometry.hpp"
#include "pglf/image.hpp"

namespace pglf {

/// Focused-plenoptic camera. Lengths d_mu and d are in sensor pixels and are
/// converted to mm with pixel_pitch; f_L is in mm.
struct PlenopticIntrinsics {
    double D_mu = 35.0;
    double d_mu = 50.0;
    double f_L = 35.0;
    double d = 0.0;
    int sensor_width = 3840;
    int sensor_height = 2160;
    double pixel_pitch = 0.005;

    void validate() const;
    double d_mm() const { return d * pixel_pitch; }
    double d_mu_mm() const { return d_mu * pixel_pitch; }
    /// Optical axis in pixel coordinates (sensor centre).
    Vec2 axis() const { return {(sensor_width - 1) / 2.0, (sensor_height - 1) / 2.0}; }
    /// Pixel coordinate to mm relative to the optical axis.
    Vec2 to_mm(const Vec2& px) const { return (px - axis()) * pixel_pitch; }
    Vec2 to_px(const Vec2& mm) const { return mm / pixel_pitch + axis(); }
};

enum class LensletLayout { Hexagonal, Square };

struct LensletNeighbor {
    int index = -1;
    Vec2 u = Vec2::Zero(); ///< unit vector from this centre to the neighbour's
};

class LensletGrid {
public:
    LensletGrid() = default;
    /// Builds the label map and neighbour table for the given centres.
    LensletGrid(std::vector<Vec2> centers, LensletLayout layout, double D_mu, int width, int height);

    /// Regular grid with one lenslet on the optical axis; only lenslets whose
    /// whole disc lies on the sensor are kept.
    static LensletGrid make(const PlenopticIntrinsics& intr, LensletLayout layout = LensletLayout::Hexagonal);

    int size() const { return static_cast<int>(centers_.size()); }
    const std::vector<Vec2>& centers() const { return centers_; }
    const Vec2& center(int i) const { return centers_[static_cast<std::size_t>(i)]; }
    LensletLayout layout() const { return layout_; }
    double diameter() const { return D_mu_; }
    double radius() const { return 0.5 * D_mu_; }
    int width() const { return labels_.width(); }
    int height() const { return labels_.height(); }
    const std::vector<LensletNeighbor>& neighbors(int i) const { return neighbors_[static_cast<std::size_t>(i)]; }

    /// Lenslet owning the pixel, or -1 outside every disc.
    int label(int x, int y) const { return labels_.contains(x, y) ? labels_(x, y) : -1; }
    const Grid<int>& labels() const { return labels_; }
    /// Lenslet whose disc contains the (sub-pixel) point, or -1.
    int lenslet_at(const Vec2& p) const;
    /// Lenslets whose centre lies within `radius` of p.
    void lenslets_near(const Vec2& p, double radius, std::vector<int>& out) const;

private:
    std::vector<Vec2> centers_;
    LensletLayout layout_ = LensletLayout::Hexagonal;
    double D_mu_ = 0;
    Grid<int> labels_;
    std::vector<std::vector<LensletNeighbor>> neighbors_;
    // coarse buckets of lenslet indices, cell size D_mu
    int bucket_w_ = 0, bucket_h_ = 0;
    std::vector<std::vector<int>> buckets_;
};

struct IncidentAngle {
    double theta_x = 0;
    double theta_y = 0;
};

struct VirtualDepthSample {
    double v = 1;
    double D = 0;
    double z = 0; ///< image distance, mm
    double Z = 0; ///< object depth, mm
};

double virtual_depth(double D, const PlenopticIntrinsics& intr);
double disparity_from_v(double v, const PlenopticIntrinsics& intr);

/// Thin-lens maps between image distance z and object depth Z (both mm).
double depth_from_image_distance(double z, double f_L);
double image_distance_from_depth(double Z, double f_L);

struct DepthPair {
    double z = 0;
    double Z = 0;
};
/// Linear model: z = v*d_mu + d (converted to mm), Z by the thin lens.
DepthPair depth_from_v(double v, const PlenopticIntrinsics& intr);
/// Inverse of depth_from_v.
double v_from_depth(double Z, const PlenopticIntrinsics& intr);

IncidentAngle incident_angles(double x, double y, double z);

/// Image-space point (mm, relative to the axis) seen by sensor pixel s through
/// lenslet centre c at virtual depth v, and its axial distance from the main lens.
struct ImagePoint {
    Vec2 q = Vec2::Zero();
    double a = 0;
};
ImagePoint image_point(const Vec2& s, const Vec2& c, double v, const PlenopticIntrinsics& intr);
IncidentAngle chief_ray_angle(const Vec2& s, const Vec2& c, double v, const PlenopticIntrinsics& intr);

/// Per-pixel affine law [X Y] = k*Z + b of the chief ray (mm).
struct LateralModel {
    Vec2 k = Vec2::Zero();
    Vec2 b = Vec2::Zero();
};
LateralModel lateral_model(const Vec2& s, const Vec2& c, const PlenopticIntrinsics& intr);
Vec2 lateral_coords(double Z_r, const Vec2& s, const Vec2& c, const PlenopticIntrinsics& intr);

} // namespace pglf
