#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pglf/dcm.hpp"
#include "pglf/fringe.hpp"
#include "pglf/geometry.hpp"
#include "pglf/lightfield.hpp"
#include "pglf/reconstruct.hpp"

namespace pglf {

/// Single-valued surface Z(X, Y) in the camera frame (mm) with an albedo.
class Scene {
public:
    virtual ~Scene() = default;
    /// Surface depth under (X, Y); NaN where there is no surface.
    virtual double depth(double X, double Y) const = 0;
    virtual double albedo(double /*X*/, double /*Y*/, double /*Z*/) const { return 1.0; }
    /// Depth bounds of the surface over the working volume.
    virtual double z_near() const = 0;
    virtual double z_far() const = 0;
    virtual std::string name() const = 0;
};

/// Dark circles on a light plane, laid out on a rows x cols grid in the plane's own frame.
struct CirclePattern {
    int cols = 0;
    int rows = 0;
    double spacing = 0;
    double radius = 0;
    double dark = 0.25;
    double light = 1.0;
};

/// Plane through `center` tilted about the X then Y axis. Plane coordinates
/// (u, w) follow the rotated X and Y axes; circles are centred on the origin.
class PlaneScene : public Scene {
public:
    PlaneScene(Vec3 center, double tilt_x_deg = 0, double tilt_y_deg = 0, CirclePattern pattern = {},
               std::string name = "plate");
    double depth(double X, double Y) const override;
    double albedo(double X, double Y, double Z) const override;
    double z_near() const override;
    double z_far() const override;
    std::string name() const override { return name_; }
    /// Circle centres in the camera frame, row-major (rows top to bottom).
    std::vector<Vec3> circle_centers() const;
    const Eigen::Matrix3d& rotation() const { return R_; }
    const Vec3& center() const { return center_; }
    const CirclePattern& pattern() const { return pattern_; }

private:
    Vec3 center_;
    Eigen::Matrix3d R_;
    Vec3 normal_;
    CirclePattern pattern_;
    std::string name_;
};

/// Fronto-parallel tiers along X. tier i covers [edges[i], edges[i+1]); the
/// outer tiers extend without bound.
class StaircaseScene : public Scene {
public:
    StaircaseScene(std::vector<double> tier_depths, std::vector<double> edges, std::string name = "staircase");
    double depth(double X, double Y) const override;
    double z_near() const override;
    double z_far() const override;
    std::string name() const override { return name_; }
    const std::vector<double>& tiers() const { return depths_; }
    const std::vector<double>& edges() const { return edges_; }
    int tier_of(double X) const;

private:
    std::vector<double> depths_;
    std::vector<double> edges_;
    std::string name_;
};

struct GaussianBump {
    double x = 0, y = 0;
    double amplitude = 0; ///< mm, negative moves towards the camera
    double sigma = 10;
};

/// Smooth relief: gently tilted base plane plus Gaussian bumps.
class ReliefScene : public Scene {
public:
    ReliefScene(double base, double slope_x, double slope_y, std::vector<GaussianBump> bumps,
                std::string name = "handicraft");
    double depth(double X, double Y) const override;
    double albedo(double X, double Y, double Z) const override;
    double z_near() const override;
    double z_far() const override;
    std::string name() const override { return name_; }

private:
    double base_, sx_, sy_;
    std::vector<GaussianBump> bumps_;
    std::string name_;
    double lo_, hi_;
};

/// Working-volume extent used to size presets: half field of view in X and Y at 400 mm.
struct FieldOfView {
    double half_x = 0;
    double half_y = 0;
};

std::unique_ptr<Scene> make_preset_scene(const std::string& preset, const FieldOfView& fov, double Z = 400.0);

struct NoiseSpec {
    double sigma = 0;          ///< additive Gaussian on intensity
    double fixed_pattern = 0;  ///< relative per-pixel gain spread
    std::uint64_t seed = 1;
};

struct Illumination {
    double ambient = 0.05;
    double gain = 0.9;
};

/// Projector intrinsics/extrinsics of the simulated rig.
struct ProjectorSpec {
    int width = 912;
    int height = 1140;
    double focal = 1700;
    Vec3 position{0, -150, 0};
    Vec3 target{0, 0, 400};
};

ProjectionMatrix make_projector(const ProjectorSpec& spec);

struct SystemSpec {
    int sensor_width = 3840;
    int sensor_height = 2160;
    double pixel_pitch = 0.005;
    double D_mu = 35;
    double d_mu = 50;
    double f_L = 35;
    double Z_ref = 400;  ///< depth imaged at v_ref by the linear model
    double v_ref = 3;
    LensletLayout layout = LensletLayout::Hexagonal;
    ProjectorSpec projector;
};

struct SimulatedSystem {
    PlenopticIntrinsics intr;
    LensletGrid grid;
    ProjectionMatrix projector;
    ProjectorSpec projector_spec;
    VirtualCamera vcam;
    FieldOfView fov;
};

SimulatedSystem make_system(const SystemSpec& spec = {});
FieldOfView field_of_view(const SystemSpec& spec);
PlenopticIntrinsics make_intrinsics(const SystemSpec& spec);

/// Per-sensor-pixel ground truth of one trace.
struct RayLedger {
    Image theta_x, theta_y;
    Image X, Y, Z;
    Image v, D;
};

struct TraceResult {
    Image xp, yp, albedo;
    Mask lenslet;  ///< pixel lies under a lenslet
    Mask hit;      ///< ray met the surface
    std::optional<RayLedger> ledger;
};

struct TraceOptions {
    bool ledger = false;
    double z_margin = 15;   ///< extra depth searched around the scene bounds, mm
    double v_step = 0.1;
};

TraceResult trace_scene(const Scene& scene, const PlenopticIntrinsics& intr, const LensletGrid& grid,
                        const ProjectionMatrix& projector, const AberrationSpec& aberration,
                        const TraceOptions& options = {});

/// Fringe images for one pattern set. `stream` decorrelates the noise of
/// different pattern sets rendered from the same trace.
std::vector<Image> shade(const TraceResult& trace, const FringeConfig& fringe, const NoiseSpec& noise,
                         const Illumination& light = {}, std::uint64_t stream = 0);

struct RenderResult {
    std::vector<Image> images;
    TraceResult trace;
};

RenderResult render_lightfield(const Scene& scene, const FringeConfig& fringe, const PlenopticIntrinsics& intr,
                               const LensletGrid& grid, const ProjectionMatrix& projector,
                               const AberrationSpec& aberration, const NoiseSpec& noise,
                               const TraceOptions& options = {}, const Illumination& light = {});

/// Zero-mean unit Gaussian from a counter-based hash; identical for identical arguments.
double counter_gaussian(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

/// Scene sampled along the nominal virtual-camera rays.
struct GroundTruth {
    PointCloud cloud;
    Image Z;
    Image yp;   ///< projector row of each surface point
    Image Phi;  ///< absolute phase for the given fringe set
    Mask valid;
};

GroundTruth ground_truth_cloud(const Scene& scene, const VirtualCamera& vcam, const ProjectionMatrix& projector,
                               const FringeConfig& fringe);

/// Depth where the object-space ray X = theta * Z meets the scene; NaN on a miss.
double intersect_ray(const Scene& scene, const IncidentAngle& theta, double z_lo, double z_hi, double step = 0.25);

// ---- calibration sessions --------------------------------------------------

struct TargetPose {
    Vec3 center{0, 0, 400};
    double tilt_x_deg = 0;
    double tilt_y_deg = 0;
};

struct SessionSpec {
    std::vector<double> plate_Z{376, 387, 398, 409, 420};
    std::vector<TargetPose> targets;
    CirclePattern board{7, 5, 9.0, 2.5, 0.25, 1.0};
    std::vector<int> freqs{1, 8, 32};
    std::vector<int> steps{3, 3, 6};
    NoiseSpec noise;
    double Z_min = 355;
    double Z_max = 450;

    /// Default board poses scaled to the field of view.
    static SessionSpec defaults(const FieldOfView& fov);
};

struct PlateCapture {
    double Z_nominal = 0;
    int projector_width = 912;
    int projector_height = 1140;
    std::vector<int> freqs;
    std::vector<int> steps;
    std::vector<std::vector<Image>> rows;  ///< one stack per frequency
};

struct TargetCapture {
    std::vector<Vec3> world_points;  ///< circle centres, row-major
    int grid_cols = 0;
    int grid_rows = 0;
    int projector_width = 912;
    int projector_height = 1140;
    std::vector<int> freqs;
    std::vector<int> steps;
    std::vector<std::vector<Image>> rows;
    std::vector<std::vector<Image>> cols;
};

/// Streams calibration captures one at a time.
class CalibrationSource {
public:
    virtual ~CalibrationSource() = default;
    virtual int plate_count() const = 0;
    virtual PlateCapture plate(int i) const = 0;
    /// Nominal depth of plate i without loading its images.
    virtual double plate_depth(int i) const = 0;
    virtual int target_count() const = 0;
    virtual TargetCapture target(int i) const = 0;
    virtual double Z_min() const = 0;
    virtual double Z_max() const = 0;
};

class SimulatedSession : public CalibrationSource {
public:
    SimulatedSession(SimulatedSystem system, AberrationSpec aberration, SessionSpec spec);
    int plate_count() const override { return static_cast<int>(spec_.plate_Z.size()); }
    PlateCapture plate(int i) const override;
    double plate_depth(int i) const override { return spec_.plate_Z.at(static_cast<std::size_t>(i)); }
    int target_count() const override { return static_cast<int>(spec_.targets.size()); }
    TargetCapture target(int i) const override;
    double Z_min() const override { return spec_.Z_min; }
    double Z_max() const override { return spec_.Z_max; }
    const SessionSpec& spec() const { return spec_; }
    const SimulatedSystem& system() const { return system_; }

private:
    FringeConfig fringe(int freq_index, FringeOrientation o) const;
    SimulatedSystem system_;
    AberrationSpec aberration_;
    SessionSpec spec_;
};

} // namespace pglf
