#pragma once

#include <string>
#include <vector>

#include "pglf/dcm.hpp"
#include "pglf/geometry.hpp"
#include "pglf/matching.hpp"
#include "pglf/reconstruct.hpp"
#include "pglf/simulator.hpp"

namespace pglf {

/// Dark blob centroids on a light background, weighted by darkness.
/// Blobs touching invalid pixels or the border are dropped.
std::vector<Vec2> detect_circles(const Image& intensity, const Mask& valid, int min_area = 6, int max_area = 5000);

/// Sorts detected centroids into a rows x cols grid, row-major with rows
/// ordered by increasing y and columns by increasing x.
std::vector<Vec2> order_grid(const std::vector<Vec2>& centroids, int cols, int rows);

struct CalibrationOptions {
    PsadConfig psad;
    RefocusConfig refocus;
    DcmSolverOptions solver;
    int max_targets_per_plate = 2000; ///< T
    double modulation_threshold = kDefaultModulationThreshold;
};

struct TargetReport {
    int index = 0;
    int detected = 0;
    bool used = false;
};

struct CalibrationReport {
    double camera_rmse = 0;     ///< px, virtual camera
    double projector_rmse = 0;  ///< px
    int stereo_points = 0;
    std::vector<TargetReport> targets;
    std::vector<int> plate_samples;
    DcmReport dcm;
};

struct CalibrationResult {
    ProjectionMatrix mc;
    ProjectionMatrix mp;
    DcmParams dcm;
    CalibrationDataset dataset;
    CalibrationReport report;
};

/// Stereo calibration of the virtual camera and projector from the circle
/// targets, then the per-plate dataset and the DCM fit. Failures name the
/// step that raised them.
CalibrationResult run_calibration_pipeline(const CalibrationSource& source, const PlenopticIntrinsics& intr,
                                           const LensletGrid& grid, const VirtualCamera& vcam,
                                           const CalibrationOptions& options = {});

/// Stages exposed for tests.
struct StereoCalibration {
    CalibrationFit camera;
    CalibrationFit projector;
    int points = 0;
    std::vector<TargetReport> targets;
};
StereoCalibration calibrate_stereo(const CalibrationSource& source, const PlenopticIntrinsics& intr,
                                   const LensletGrid& grid, const VirtualCamera& vcam, const FeasibleRegion& region,
                                   const CalibrationOptions& options);

/// One (theta, v, Z) sample per lenslet centre, indexed by lenslet.
struct PlateSamples {
    std::vector<DcmSample> samples;
    std::vector<std::uint8_t> valid;
};
PlateSamples plate_samples(const PlateCapture& plate, int plate_index, const PlenopticIntrinsics& intr,
                           const LensletGrid& grid, const VirtualCamera& vcam, const ProjectionMatrix& mc,
                           const ProjectionMatrix& mp, const FeasibleRegion& region, const CalibrationOptions& options);

} // namespace pglf
