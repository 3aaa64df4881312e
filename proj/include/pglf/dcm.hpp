#pragma once

#include <array>
#include <string>
#include <vector>

#include "pglf/lightfield.hpp"

namespace pglf {

/// Deformed cone model: z~ = (a . p(theta)) (1 + k v) (v d_mu + d), with
/// p = [1, tx, ty, tx*ty, tx^2, ty^2]. d is in pixels like PlenopticIntrinsics::d.
struct DcmParams {
    std::array<double, 6> a{1, 0, 0, 0, 0, 0};
    double k = 0;
    double d = 0;

    /// Aberration-free parameters for the given camera.
    static DcmParams linear(const PlenopticIntrinsics& intr);
    void validate() const;
    bool is_linear() const;
};

/// The simulator uses the same parameterisation generatively.
using AberrationSpec = DcmParams;

std::array<double, 6> dcm_basis(const IncidentAngle& theta);

/// Corrected image distance in mm.
double dcm_forward(const DcmParams& params, const IncidentAngle& theta, double v, const PlenopticIntrinsics& intr);

/// Gradient of dcm_forward with respect to (a1..a5, k, d).
std::array<double, 7> dcm_jacobian(const DcmParams& params, const IncidentAngle& theta, double v,
                                   const PlenopticIntrinsics& intr);

/// Virtual depth v whose corrected image distance equals z (mm) at this angle.
double solve_observed_v(const DcmParams& params, const IncidentAngle& theta, double z,
                        const PlenopticIntrinsics& intr);

struct DcmSample {
    double theta_x = 0;
    double theta_y = 0;
    double v = 0;
    double Z = 0;
    int plate = 0;
};

struct CalibrationDataset {
    std::vector<DcmSample> samples;
    double Z_min = 0;
    double Z_max = 0;

    int plates() const;
};

struct DcmSolverOptions {
    int max_iterations = 200;
    double step_tolerance = 1e-10;
    double residual_tolerance = 1e-12;
    double initial_lambda = 1e-3;
};

struct DcmResidual {
    int plate = 0;
    double theta_x = 0, theta_y = 0, v = 0;
    double Z = 0, z = 0, z_model = 0, Z_model = 0;
};

struct DcmReport {
    int iterations = 0;
    bool converged = false;
    std::string stop_reason;
    double initial_cost = 0; ///< 0.5 * sum of squared z residuals at the linear start
    double final_cost = 0;
    double rmse_z = 0, mae_z = 0;   ///< image space, mm
    double rmse_Z = 0, mae_Z = 0;   ///< object space, mm
    std::vector<DcmResidual> residuals;

    std::string residual_csv() const;
};

struct DcmCalibration {
    DcmParams params;
    DcmReport report;
};

/// Levenberg-Marquardt fit of (a1..a5, k, d) in image-distance space,
/// started from the linear model with d taken from intr.d.
DcmCalibration calibrate_dcm(const CalibrationDataset& dataset, const PlenopticIntrinsics& intr,
                             const DcmSolverOptions& options = {});

/// Residual report of arbitrary parameters on a dataset.
DcmReport evaluate_dcm(const DcmParams& params, const CalibrationDataset& dataset, const PlenopticIntrinsics& intr);

} // namespace pglf
