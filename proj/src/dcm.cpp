#include "pglf/dcm.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace pglf {

DcmParams DcmParams::linear(const PlenopticIntrinsics& intr)
{
    DcmParams p;
    p.d = intr.d;
    return p;
}

void DcmParams::validate() const
{
    require(a[0] == 1.0, "dcm: a0 must equal 1");
    for (double v : a) require(std::isfinite(v), "dcm: non-finite coefficient");
    require(std::isfinite(k) && std::isfinite(d), "dcm: non-finite k or d");
}

bool DcmParams::is_linear() const
{
    return k == 0 && std::all_of(a.begin() + 1, a.end(), [](double v) { return v == 0; });
}

std::array<double, 6> dcm_basis(const IncidentAngle& t)
{
    return {1.0, t.theta_x, t.theta_y, t.theta_x * t.theta_y, t.theta_x * t.theta_x, t.theta_y * t.theta_y};
}

namespace {

double dot6(const std::array<double, 6>& a, const std::array<double, 6>& p)
{
    double s = 0;
    for (int i = 0; i < 6; ++i) s += a[static_cast<std::size_t>(i)] * p[static_cast<std::size_t>(i)];
    return s;
}

} // namespace

double dcm_forward(const DcmParams& params, const IncidentAngle& theta, double v, const PlenopticIntrinsics& intr)
{
    const double ap = dot6(params.a, dcm_basis(theta));
    return ap * (1.0 + params.k * v) * (v * intr.d_mu + params.d) * intr.pixel_pitch;
}

std::array<double, 7> dcm_jacobian(const DcmParams& params, const IncidentAngle& theta, double v,
                                   const PlenopticIntrinsics& intr)
{
    const auto p = dcm_basis(theta);
    const double ap = dot6(params.a, p);
    const double cone = v * intr.d_mu + params.d;
    const double gain = 1.0 + params.k * v;
    std::array<double, 7> j{};
    for (int i = 1; i < 6; ++i) j[static_cast<std::size_t>(i - 1)] = p[static_cast<std::size_t>(i)] * gain * cone * intr.pixel_pitch;
    j[5] = ap * v * cone * intr.pixel_pitch;
    j[6] = ap * gain * intr.pixel_pitch;
    return j;
}

double solve_observed_v(const DcmParams& params, const IncidentAngle& theta, double z, const PlenopticIntrinsics& intr)
{
    const double ap = dot6(params.a, dcm_basis(theta));
    if (!(std::abs(ap) > 0)) throw NumericalError("solve_observed_v: vanishing angular factor");
    // (1 + k v)(v d_mu + d) = z / (ap * pitch)  ->  A v^2 + B v + C = 0
    const double A = params.k * intr.d_mu;
    const double B = intr.d_mu + params.k * params.d;
    const double C = params.d - z / (ap * intr.pixel_pitch);
    const double disc = B * B - 4 * A * C;
    if (disc < 0) throw NumericalError("solve_observed_v: no real virtual depth");
    const double den = B + std::copysign(std::sqrt(disc), B);
    if (den == 0) throw NumericalError("solve_observed_v: degenerate quadratic");
    return -2 * C / den;
}

int CalibrationDataset::plates() const
{
    std::set<int> ids;
    for (const auto& s : samples) ids.insert(s.plate);
    return static_cast<int>(ids.size());
}

std::string DcmReport::residual_csv() const
{
    std::ostringstream os;
    os.precision(12);
    os << "plate,theta_x,theta_y,v,Z,z,z_model,residual_z,Z_model,residual_Z\n";
    for (const auto& r : residuals)
        os << r.plate << ',' << r.theta_x << ',' << r.theta_y << ',' << r.v << ',' << r.Z << ',' << r.z << ','
           << r.z_model << ',' << (r.z - r.z_model) << ',' << r.Z_model << ',' << (r.Z - r.Z_model) << '\n';
    return os.str();
}

DcmReport evaluate_dcm(const DcmParams& params, const CalibrationDataset& dataset, const PlenopticIntrinsics& intr)
{
    DcmReport rep;
    double sz = 0, az = 0, sZ = 0, aZ = 0;
    rep.residuals.reserve(dataset.samples.size());
    for (const auto& s : dataset.samples) {
        DcmResidual r;
        r.plate = s.plate;
        r.theta_x = s.theta_x;
        r.theta_y = s.theta_y;
        r.v = s.v;
        r.Z = s.Z;
        r.z = image_distance_from_depth(s.Z, intr.f_L);
        r.z_model = dcm_forward(params, {s.theta_x, s.theta_y}, s.v, intr);
        r.Z_model = depth_from_image_distance(r.z_model, intr.f_L);
        const double ez = r.z - r.z_model, eZ = r.Z - r.Z_model;
        sz += ez * ez;
        az += std::abs(ez);
        sZ += eZ * eZ;
        aZ += std::abs(eZ);
        rep.residuals.push_back(r);
    }
    const double n = std::max<std::size_t>(1, dataset.samples.size());
    rep.rmse_z = std::sqrt(sz / n);
    rep.mae_z = az / n;
    rep.rmse_Z = std::sqrt(sZ / n);
    rep.mae_Z = aZ / n;
    rep.final_cost = 0.5 * sz;
    return rep;
}

DcmCalibration calibrate_dcm(const CalibrationDataset& dataset, const PlenopticIntrinsics& intr,
                             const DcmSolverOptions& options)
{
    intr.validate();
    const auto& S = dataset.samples;
    if (dataset.plates() < 3)
        throw ValidationError("calibrate_dcm: degenerate dataset, need at least 3 plate positions, got " +
                              std::to_string(dataset.plates()));
    if (S.size() < 20) throw ValidationError("calibrate_dcm: need at least 20 samples");
    double zmin = S.front().Z, zmax = S.front().Z;
    for (const auto& s : S) {
        if (!(s.v > 1) || !std::isfinite(s.theta_x) || !std::isfinite(s.theta_y) || !std::isfinite(s.Z))
            throw ValidationError("calibrate_dcm: samples need finite angles and v > 1");
        if (dataset.Z_max > dataset.Z_min && (s.Z < dataset.Z_min || s.Z > dataset.Z_max))
            throw ValidationError("calibrate_dcm: sample depth outside the working range");
        zmin = std::min(zmin, s.Z);
        zmax = std::max(zmax, s.Z);
    }
    if (zmax - zmin < 1e-9) throw ValidationError("calibrate_dcm: degenerate dataset, all plates at one depth");

    const std::size_t n = S.size();
    std::vector<double> target(n);
    for (std::size_t i = 0; i < n; ++i) target[i] = image_distance_from_depth(S[i].Z, intr.f_L);

    auto unpack = [](const Eigen::Matrix<double, 7, 1>& x) {
        DcmParams p;
        for (int i = 0; i < 5; ++i) p.a[static_cast<std::size_t>(i + 1)] = x(i);
        p.k = x(5);
        p.d = x(6);
        return p;
    };
    auto cost_of = [&](const DcmParams& p) {
        double c = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double r = target[i] - dcm_forward(p, {S[i].theta_x, S[i].theta_y}, S[i].v, intr);
            c += r * r;
        }
        return 0.5 * c;
    };

    Eigen::Matrix<double, 7, 1> x = Eigen::Matrix<double, 7, 1>::Zero();
    x(6) = intr.d;
    DcmParams p = unpack(x);
    double cost = cost_of(p);
    const double initial_cost = cost;
    double lambda = options.initial_lambda;
    int it = 0;
    bool converged = false;
    std::string reason = "iteration cap";

    while (it < options.max_iterations) {
        ++it;
        Eigen::Matrix<double, 7, 7> jtj = Eigen::Matrix<double, 7, 7>::Zero();
        Eigen::Matrix<double, 7, 1> jtr = Eigen::Matrix<double, 7, 1>::Zero();
        for (std::size_t i = 0; i < n; ++i) {
            const IncidentAngle t{S[i].theta_x, S[i].theta_y};
            const double r = target[i] - dcm_forward(p, t, S[i].v, intr);
            const auto jarr = dcm_jacobian(p, t, S[i].v, intr);
            const Eigen::Map<const Eigen::Matrix<double, 7, 1>> j(jarr.data());
            jtj.selfadjointView<Eigen::Lower>().rankUpdate(j);
            jtr += j * r;
        }
        jtj = jtj.selfadjointView<Eigen::Lower>();
        Eigen::Matrix<double, 7, 1> diag = jtj.diagonal();
        const double dmax = diag.maxCoeff();
        if (!(dmax > 0)) throw NumericalError("calibrate_dcm: zero Jacobian");
        diag = diag.cwiseMax(1e-12 * dmax);

        bool accepted = false;
        while (!accepted) {
            Eigen::Matrix<double, 7, 7> a = jtj;
            a.diagonal() += lambda * diag;
            const Eigen::LDLT<Eigen::Matrix<double, 7, 7>> ldlt(a);
            if (ldlt.info() != Eigen::Success) throw NumericalError("calibrate_dcm: singular normal equations");
            const Eigen::Matrix<double, 7, 1> step = ldlt.solve(jtr);
            if (!step.allFinite()) throw NumericalError("calibrate_dcm: non-finite step");
            const Eigen::Matrix<double, 7, 1> xn = x + step;
            const DcmParams pn = unpack(xn);
            const double cn = cost_of(pn);
            const double step_norm = step.cwiseProduct(diag.cwiseSqrt()).norm();
            const double x_norm = x.cwiseProduct(diag.cwiseSqrt()).norm();
            if (cn <= cost) {
                const double drop = cost - cn;
                x = xn;
                p = pn;
                cost = cn;
                lambda = std::max(lambda / 10, 1e-15);
                accepted = true;
                if (cost <= options.residual_tolerance) {
                    converged = true;
                    reason = "residual tolerance";
                } else if (drop <= options.residual_tolerance * (cost + drop)) {
                    converged = true;
                    reason = "cost stagnation";
                } else if (step_norm <= options.step_tolerance * (x_norm + options.step_tolerance)) {
                    converged = true;
                    reason = "step tolerance";
                }
            } else {
                lambda *= 10;
                if (step_norm <= options.step_tolerance * (x_norm + options.step_tolerance) || lambda > 1e15) {
                    converged = true;
                    reason = "step tolerance";
                    break;
                }
            }
        }
        if (converged) break;
    }
    if (!converged)
        throw NumericalError("calibrate_dcm: no convergence after " + std::to_string(options.max_iterations) +
                             " iterations");

    DcmCalibration out{p, evaluate_dcm(p, dataset, intr)};
    out.report.iterations = it;
    out.report.converged = converged;
    out.report.stop_reason = reason;
    out.report.initial_cost = initial_cost;
    return out;
}

} // namespace pglf
