#include "pglf/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace pglf {

namespace {

// Runs f and prefixes any library error with the step that raised it.
template <class F>
auto step(const std::string& label, F&& f)
{
    try {
        return f();
    } catch (const ValidationError& e) {
        throw ValidationError("calibration [" + label + "]: " + e.what());
    } catch (const NumericalError& e) {
        throw NumericalError("calibration [" + label + "]: " + e.what());
    } catch (const IoError& e) {
        throw IoError("calibration [" + label + "]: " + e.what());
    }
}

double percentile(std::vector<double> v, double q)
{
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    const auto k = static_cast<std::size_t>(std::clamp(q, 0.0, 1.0) * static_cast<double>(v.size() - 1));
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
    return v[k];
}

std::vector<PhaseMap> phases_of(const std::vector<std::vector<Image>>& stacks, double threshold)
{
    std::vector<PhaseMap> out;
    for (const auto& s : stacks) out.push_back(compute_phase(s, threshold));
    return out;
}

// Bilinear sample of an absolute map; all four taps must be valid.
bool sample_abs(const AbsolutePhase& a, const Vec2& p, double& out)
{
    const int x0 = static_cast<int>(std::floor(p.x())), y0 = static_cast<int>(std::floor(p.y()));
    for (int dy = 0; dy <= 1; ++dy)
        for (int dx = 0; dx <= 1; ++dx)
            if (!a.mask.contains(x0 + dx, y0 + dy) || !a.mask(x0 + dx, y0 + dy)) return false;
    out = sample_bilinear(a.phi, p.x(), p.y());
    return true;
}

void check_capture(const std::vector<int>& freqs, const std::vector<std::vector<Image>>& stacks, const char* what)
{
    require(!freqs.empty() && freqs.size() == stacks.size(), std::string(what) + ": one stack per frequency expected");
    require(freqs.front() == 1, std::string(what) + ": the lowest frequency must be 1");
}

} // namespace

std::vector<Vec2> detect_circles(const Image& intensity, const Mask& valid, int min_area, int max_area)
{
    require(intensity.same_shape(valid), "detect_circles: intensity and mask differ in size");
    const int w = intensity.width(), h = intensity.height();
    std::vector<double> vals;
    for (std::size_t i = 0; i < intensity.size(); ++i)
        if (valid[i]) vals.push_back(intensity[i]);
    require(vals.size() > 16, "detect_circles: no valid pixels");
    const double light = percentile(vals, 0.9), dark = percentile(vals, 0.02);
    require(light > dark, "detect_circles: image has no contrast");
    const double thr = 0.5 * (light + dark);

    Grid<int> label(w, h, -1);
    std::vector<Vec2> out;
    std::vector<Pixel> stack, members;
    int next = 0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (label(x, y) >= 0 || !valid(x, y) || intensity(x, y) >= thr) continue;
            const int id = next++;
            members.clear();
            stack.assign(1, {x, y});
            label(x, y) = id;
            bool clean = true;
            int x0 = x, x1 = x, y0 = y, y1 = y;
            while (!stack.empty()) {
                const Pixel p = stack.back();
                stack.pop_back();
                members.push_back(p);
                x0 = std::min(x0, p.x), x1 = std::max(x1, p.x), y0 = std::min(y0, p.y), y1 = std::max(y1, p.y);
                const Pixel nb[4] = {{p.x + 1, p.y}, {p.x - 1, p.y}, {p.x, p.y + 1}, {p.x, p.y - 1}};
                for (const Pixel& q : nb) {
                    if (!valid.contains(q.x, q.y) || !valid(q.x, q.y)) {
                        clean = false;
                        continue;
                    }
                    if (label(q.x, q.y) >= 0 || intensity(q.x, q.y) >= thr) continue;
                    label(q.x, q.y) = id;
                    stack.push_back(q);
                }
            }
            const int area = static_cast<int>(members.size());
            if (!clean || area < min_area || area > max_area) continue;
            // darkness-weighted centroid over the blob grown by two pixels
            double sw = 0, sx = 0, sy = 0;
            bool ok = true;
            for (int yy = y0 - 2; yy <= y1 + 2 && ok; ++yy)
                for (int xx = x0 - 2; xx <= x1 + 2; ++xx) {
                    bool near = false;
                    for (int dy = -2; dy <= 2 && !near; ++dy)
                        for (int dx = -2; dx <= 2; ++dx)
                            if (label.contains(xx + dx, yy + dy) && label(xx + dx, yy + dy) == id) {
                                near = true;
                                break;
                            }
                    if (!near) continue;
                    if (!valid.contains(xx, yy) || !valid(xx, yy)) {
                        ok = false;
                        break;
                    }
                    const double wt = std::clamp((light - intensity(xx, yy)) / (light - dark), 0.0, 1.0);
                    sw += wt;
                    sx += wt * xx;
                    sy += wt * yy;
                }
            if (ok && sw > 0) out.emplace_back(sx / sw, sy / sw);
        }
    return out;
}

std::vector<Vec2> order_grid(const std::vector<Vec2>& centroids, int cols, int rows)
{
    require(cols > 0 && rows > 0, "order_grid: empty grid");
    if (centroids.size() != static_cast<std::size_t>(cols) * static_cast<std::size_t>(rows))
        throw ValidationError("order_grid: found " + std::to_string(centroids.size()) + " circles, expected " +
                              std::to_string(cols * rows));
    std::vector<Vec2> pts = centroids;
    std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) { return a.y() < b.y(); });
    for (int r = 0; r + 1 < rows; ++r) {
        const auto a = pts.begin() + static_cast<std::ptrdiff_t>(r) * cols;
        const double hi = std::max_element(a, a + cols, [](const Vec2& p, const Vec2& q) { return p.y() < q.y(); })->y();
        const double lo = (a + cols)->y();
        if (!(lo > hi)) throw ValidationError("order_grid: rows overlap");
    }
    for (int r = 0; r < rows; ++r) {
        const auto a = pts.begin() + static_cast<std::ptrdiff_t>(r) * cols;
        std::sort(a, a + cols, [](const Vec2& p, const Vec2& q) { return p.x() < q.x(); });
    }
    return pts;
}

StereoCalibration calibrate_stereo(const CalibrationSource& source, const PlenopticIntrinsics& intr,
                                   const LensletGrid& grid, const VirtualCamera& vcam, const FeasibleRegion& region,
                                   const CalibrationOptions& options)
{
    StereoCalibration out;
    std::vector<Correspondence> cam, proj;
    for (int i = 0; i < source.target_count(); ++i) {
        const std::string tag = "stereo target " + std::to_string(i);
        const TargetCapture cap = step(tag + ": load", [&] { return source.target(i); });
        check_capture(cap.freqs, cap.rows, "stereo target rows");
        check_capture(cap.freqs, cap.cols, "stereo target columns");
        const auto row_phase = step(tag + ": phase", [&] { return phases_of(cap.rows, options.modulation_threshold); });
        const DisparityField disp =
            step(tag + ": lenslet matching", [&] { return match_lenslets(row_phase.back(), grid, region, options.psad); });

        std::vector<Image> all;
        for (const auto& s : cap.rows) all.insert(all.end(), s.begin(), s.end());
        for (const auto& s : cap.cols) all.insert(all.end(), s.begin(), s.end());
        const RefocusResult rf =
            step(tag + ": refocus", [&] { return refocus(all, disp, vcam, intr, grid, options.refocus); });
        std::vector<std::vector<Image>> vrows, vcols;
        std::size_t k = 0;
        for (const auto& s : cap.rows) {
            vrows.emplace_back(rf.images.begin() + static_cast<std::ptrdiff_t>(k),
                               rf.images.begin() + static_cast<std::ptrdiff_t>(k + s.size()));
            k += s.size();
        }
        for (const auto& s : cap.cols) {
            vcols.emplace_back(rf.images.begin() + static_cast<std::ptrdiff_t>(k),
                               rf.images.begin() + static_cast<std::ptrdiff_t>(k + s.size()));
            k += s.size();
        }
        const AbsolutePhase yp = step(tag + ": row unwrapping", [&] {
            return unwrap_temporal(phases_of(vrows, options.modulation_threshold), cap.freqs);
        });
        const AbsolutePhase xp = step(tag + ": column unwrapping", [&] {
            return unwrap_temporal(phases_of(vcols, options.modulation_threshold), cap.freqs);
        });
        Image intensity = mean_intensity(vrows.front());
        Mask valid = rf.valid;
        const auto centroids = detect_circles(intensity, valid);
        TargetReport rep{i, static_cast<int>(centroids.size()), false};
        if (centroids.size() == static_cast<std::size_t>(cap.grid_cols * cap.grid_rows) &&
            cap.world_points.size() == centroids.size()) {
            const auto ordered = order_grid(centroids, cap.grid_cols, cap.grid_rows);
            const double sy = cap.projector_height / (kTwoPi * cap.freqs.back());
            const double sx = cap.projector_width / (kTwoPi * cap.freqs.back());
            std::vector<Correspondence> c, p;
            for (std::size_t j = 0; j < ordered.size(); ++j) {
                double py, px;
                if (!sample_abs(yp, ordered[j], py) || !sample_abs(xp, ordered[j], px)) continue;
                c.push_back({cap.world_points[j], ordered[j], Device::Camera});
                p.push_back({cap.world_points[j], Vec2(px * sx, py * sy), Device::Projector});
            }
            if (c.size() == ordered.size()) {
                cam.insert(cam.end(), c.begin(), c.end());
                proj.insert(proj.end(), p.begin(), p.end());
                rep.used = true;
            }
        }
        out.targets.push_back(rep);
    }
    int used = 0;
    for (const auto& t : out.targets) used += t.used;
    if (used < 2)
        throw ValidationError("calibration [stereo calibration]: only " + std::to_string(used) +
                              " stereo targets gave a complete circle grid; at least 2 poses are needed");
    out.points = static_cast<int>(cam.size());
    out.camera = step("stereo calibration: camera", [&] { return calibrate_projection(cam); });
    out.projector = step("stereo calibration: projector", [&] { return calibrate_projection(proj); });
    out.camera.matrix.role = Device::Camera;
    out.projector.matrix.role = Device::Projector;
    return out;
}

PlateSamples plate_samples(const PlateCapture& plate, int plate_index, const PlenopticIntrinsics& intr,
                           const LensletGrid& grid, const VirtualCamera& vcam, const ProjectionMatrix& mc,
                           const ProjectionMatrix& mp, const FeasibleRegion& region, const CalibrationOptions& options)
{
    const std::string tag = "plate " + std::to_string(plate_index);
    check_capture(plate.freqs, plate.rows, "plate");
    const auto phases = step(tag + ": phase", [&] { return phases_of(plate.rows, options.modulation_threshold); });
    const AbsolutePhase abs = step(tag + ": temporal unwrapping", [&] { return unwrap_temporal(phases, plate.freqs); });
    std::vector<Pixel> centers;
    for (int t = 0; t < grid.size(); ++t) {
        const Vec2& c = grid.center(t);
        centers.push_back({static_cast<int>(std::lround(c.x())), static_cast<int>(std::lround(c.y()))});
    }
    const DisparityField disp = step(tag + ": lenslet matching", [&] {
        return match_pixels(phases.back(), grid, region, options.psad, centers);
    });
    const double sy = plate.projector_height / (kTwoPi * plate.freqs.back());
    PlateSamples out;
    out.samples.resize(static_cast<std::size_t>(grid.size()));
    out.valid.assign(static_cast<std::size_t>(grid.size()), 0);
    step(tag + ": structured-light depth", [&] {
        for (int t = 0; t < grid.size(); ++t) {
            const Pixel p = centers[static_cast<std::size_t>(t)];
            if (!disp.ok(p.x, p.y) || !abs.mask(p.x, p.y)) continue;
            const double v = virtual_depth(disp.D(p.x, p.y), intr);
            if (!(v > 1)) continue;
            const IncidentAngle th = chief_ray_angle(Vec2(p.x, p.y), grid.center(t), v, intr);
            Vec3 P;
            try {
                P = triangulate(mc, mp, vcam.pixel(th), abs.phi(p.x, p.y) * sy);
            } catch (const NumericalError&) {
                continue;
            }
            if (!(P.z() > intr.f_L)) continue;
            out.samples[static_cast<std::size_t>(t)] = {P.x() / P.z(), P.y() / P.z(), v, P.z(), plate_index};
            out.valid[static_cast<std::size_t>(t)] = 1;
        }
        return 0;
    });
    return out;
}

namespace {

void check_plate_range(int m, double Z, double Z_min, double Z_max)
{
    if (Z >= Z_min && Z <= Z_max) return;
    std::ostringstream os;
    os << "calibration [plate " << m << "]: plate at " << Z << " mm lies outside the working range [" << Z_min << ", "
       << Z_max << "] mm";
    throw ValidationError(os.str());
}

} // namespace

CalibrationResult run_calibration_pipeline(const CalibrationSource& source, const PlenopticIntrinsics& intr,
                                           const LensletGrid& grid, const VirtualCamera& vcam,
                                           const CalibrationOptions& options)
{
    intr.validate();
    const int M = source.plate_count();
    if (M < 3)
        throw ValidationError("calibration [dataset]: degenerate dataset, " + std::to_string(M) +
                              " plate position(s) given, at least 3 are needed");
    const double Z_min = source.Z_min(), Z_max = source.Z_max();
    const FeasibleRegion region = step("feasible region", [&] { return compute_feasible_region(Z_min, Z_max, intr); });
    for (int m = 0; m < M; ++m) check_plate_range(m, source.plate_depth(m), Z_min, Z_max);

    CalibrationResult res;
    const StereoCalibration stereo = calibrate_stereo(source, intr, grid, vcam, region, options);
    res.mc = stereo.camera.matrix;
    res.mp = stereo.projector.matrix;
    res.report.camera_rmse = stereo.camera.rmse;
    res.report.projector_rmse = stereo.projector.rmse;
    res.report.stereo_points = stereo.points;
    res.report.targets = stereo.targets;

    std::vector<PlateSamples> per;
    for (int m = 0; m < M; ++m) {
        const PlateCapture cap = step("plate " + std::to_string(m) + ": load", [&] { return source.plate(m); });
        check_plate_range(m, cap.Z_nominal, Z_min, Z_max);
        per.push_back(plate_samples(cap, m, intr, grid, vcam, res.mc, res.mp, region, options));
    }
    // lenslets valid on every plate, thinned to at most T
    std::vector<int> common;
    for (int t = 0; t < grid.size(); ++t) {
        bool all = true;
        for (const auto& p : per) all = all && p.valid[static_cast<std::size_t>(t)];
        if (all) common.push_back(t);
    }
    const std::size_t T = static_cast<std::size_t>(std::max(1, options.max_targets_per_plate));
    std::vector<int> chosen;
    if (common.size() <= T) {
        chosen = common;
    } else {
        for (std::size_t j = 0; j < T; ++j) chosen.push_back(common[j * common.size() / T]);
    }
    res.dataset.Z_min = Z_min;
    res.dataset.Z_max = Z_max;
    for (const auto& p : per) {
        int n = 0;
        for (int t : chosen) {
            const DcmSample& s = p.samples[static_cast<std::size_t>(t)];
            if (s.Z < Z_min || s.Z > Z_max) continue;
            res.dataset.samples.push_back(s);
            ++n;
        }
        res.report.plate_samples.push_back(n);
    }
    const DcmCalibration fit = step("deformed cone fit", [&] { return calibrate_dcm(res.dataset, intr, options.solver); });
    res.dcm = fit.params;
    res.report.dcm = fit.report;
    return res;
}

} // namespace pglf
