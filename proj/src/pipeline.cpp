#include "pglf/pipeline.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "pglf/io.hpp"
#include "pglf/metrics.hpp"
#include "pglf/uniqueness.hpp"

namespace pglf {

namespace fs = std::filesystem;

// ---- configuration ---------------------------------------------------------

fs::path PipelineConfig::capture_dir() const
{
    return inputs.capture.empty() ? work_dir / "captures" / run : inputs.capture;
}

fs::path PipelineConfig::calibration_file() const
{
    return inputs.calibration.empty() ? work_dir / "calibration" / "calibration.json" : inputs.calibration;
}

fs::path PipelineConfig::session_dir() const
{
    return inputs.session.empty() ? work_dir / "session" : inputs.session;
}

fs::path PipelineConfig::run_dir() const
{
    return work_dir / "runs" / run;
}

namespace {

template <class T>
T field(const Json& j, const char* key, T fallback, const std::string& where)
{
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const Json::exception& e) {
        throw ValidationError(where + "." + key + ": " + e.what());
    }
}

const Json& section(const Json& j, const char* key)
{
    static const Json empty = Json::object();
    return j.contains(key) ? j.at(key) : empty;
}

void check_run_name(const std::string& run)
{
    require(!run.empty() && run.find_first_of("/\\") == std::string::npos && run != "." && run != "..",
            "run: '" + run + "' is not a valid run name");
}

} // namespace

Json to_json(const PipelineConfig& c)
{
    Json fringe = to_json(c.fringe);
    fringe.erase("orientation");
    return {
        {"schema_version", PipelineConfig::kSchemaVersion},
        {"work_dir", c.work_dir.string()},
        {"threads", c.threads},
        {"run", c.run},
        {"system", to_json(c.system)},
        {"fringe", fringe},
        {"psad", to_json(c.psad)},
        {"depth_range", {{"Z_min", c.Z_min}, {"Z_max", c.Z_max}}},
        {"filter", to_json(c.filter)},
        {"refocus", to_json(c.refocus)},
        {"virtual_depth", c.virtual_depth},
        {"modulation_threshold", c.modulation_threshold},
        {"simulate",
         {{"kind", c.simulate.kind == SimulateKind::Scene ? "scene" : "session"},
          {"scene", c.simulate.scene},
          {"noise", to_json(c.simulate.noise)},
          {"aberration", c.simulate.aberration},
          {"ledger", c.simulate.ledger}}},
        {"session", c.session},
        {"calibrate",
         {{"mode", c.calibrate.mode == CalibrationMode::Session ? "session" : "truth"},
          {"max_targets", c.calibrate.max_targets},
          {"max_iterations", c.calibrate.max_iterations}}},
        {"reconstruct",
         {{"model", c.reconstruct.model == DepthModel::Dcm ? "dcm" : "linear"}, {"cache", c.reconstruct.cache}}},
        {"inputs",
         {{"capture", c.inputs.capture.string()},
          {"calibration", c.inputs.calibration.string()},
          {"session", c.inputs.session.string()}}},
    };
}

Json default_config_json()
{
    return to_json(PipelineConfig{});
}

PipelineConfig parse_config(const Json& j)
{
    check_keys(j, {"schema_version", "work_dir", "threads", "run", "system", "fringe", "psad", "depth_range", "filter",
                   "refocus", "virtual_depth", "modulation_threshold", "simulate", "session", "calibrate",
                   "reconstruct", "inputs"},
               "config");
    PipelineConfig c;
    const int version = field(j, "schema_version", PipelineConfig::kSchemaVersion, "config");
    require(version == PipelineConfig::kSchemaVersion,
            "config: unsupported schema_version " + std::to_string(version));
    c.work_dir = field(j, "work_dir", std::string("."), "config");
    c.threads = field(j, "threads", 0, "config");
    require(c.threads >= 0, "config.threads must be >= 0");
    c.run = field(j, "run", c.run, "config");
    check_run_name(c.run);

    c.system = system_from_json(section(j, "system"));
    {
        Json f = section(j, "fringe");
        check_keys(f, {"f", "N"}, "fringe");
        c.fringe = fringe_from_json(f, c.system.projector);
    }
    c.psad = psad_from_json(section(j, "psad"));
    {
        const Json& r = section(j, "depth_range");
        check_keys(r, {"Z_min", "Z_max"}, "depth_range");
        c.Z_min = field(r, "Z_min", c.Z_min, "depth_range");
        c.Z_max = field(r, "Z_max", c.Z_max, "depth_range");
        require(c.Z_min > c.system.f_L && c.Z_max > c.Z_min, "depth_range: need f_L < Z_min < Z_max");
    }
    c.filter = filter_from_json(section(j, "filter"));
    c.refocus = refocus_from_json(section(j, "refocus"));
    c.virtual_depth = field(j, "virtual_depth", c.virtual_depth, "config");
    require(c.virtual_depth > 1, "config.virtual_depth must exceed 1");
    c.modulation_threshold = field(j, "modulation_threshold", c.modulation_threshold, "config");
    require(c.modulation_threshold >= 0, "config.modulation_threshold must be >= 0");

    const PlenopticIntrinsics intr = make_intrinsics(c.system);
    const FieldOfView fov = field_of_view(c.system);
    {
        const Json& s = section(j, "simulate");
        const std::string w = "simulate";
        check_keys(s, {"kind", "scene", "noise", "aberration", "ledger"}, w);
        const std::string kind = field(s, "kind", std::string("scene"), w);
        if (kind == "scene") c.simulate.kind = SimulateKind::Scene;
        else if (kind == "session") c.simulate.kind = SimulateKind::Session;
        else throw ValidationError("simulate.kind: expected 'scene' or 'session'");
        if (s.contains("scene")) c.simulate.scene = s.at("scene");
        scene_from_json(c.simulate.scene, fov);
        if (s.contains("noise")) c.simulate.noise = noise_from_json(s.at("noise"));
        if (s.contains("aberration")) c.simulate.aberration = s.at("aberration");
        dcm_from_json(c.simulate.aberration, intr);
        c.simulate.ledger = field(s, "ledger", c.simulate.ledger, w);
    }
    c.session = section(j, "session");
    {
        const SessionSpec spec = session_from_json(c.session, fov);
        require(spec.Z_min > c.system.f_L && spec.Z_max > spec.Z_min, "session: need f_L < Z_min < Z_max");
    }
    {
        const Json& s = section(j, "calibrate");
        const std::string w = "calibrate";
        check_keys(s, {"mode", "max_targets", "max_iterations"}, w);
        const std::string mode = field(s, "mode", std::string("session"), w);
        if (mode == "session") c.calibrate.mode = CalibrationMode::Session;
        else if (mode == "truth") c.calibrate.mode = CalibrationMode::Truth;
        else throw ValidationError("calibrate.mode: expected 'session' or 'truth'");
        c.calibrate.max_targets = field(s, "max_targets", c.calibrate.max_targets, w);
        c.calibrate.max_iterations = field(s, "max_iterations", c.calibrate.max_iterations, w);
        require(c.calibrate.max_targets > 0 && c.calibrate.max_iterations > 0,
                "calibrate: max_targets and max_iterations must be positive");
    }
    {
        const Json& s = section(j, "reconstruct");
        const std::string w = "reconstruct";
        check_keys(s, {"model", "cache"}, w);
        const std::string model = field(s, "model", std::string("dcm"), w);
        if (model == "dcm") c.reconstruct.model = DepthModel::Dcm;
        else if (model == "linear") c.reconstruct.model = DepthModel::Linear;
        else throw ValidationError("reconstruct.model: expected 'dcm' or 'linear'");
        c.reconstruct.cache = field(s, "cache", c.reconstruct.cache, w);
    }
    {
        const Json& s = section(j, "inputs");
        check_keys(s, {"capture", "calibration", "session"}, "inputs");
        c.inputs.capture = field(s, "capture", std::string(), "inputs");
        c.inputs.calibration = field(s, "calibration", std::string(), "inputs");
        c.inputs.session = field(s, "session", std::string(), "inputs");
    }
    return c;
}

void apply_override(Json& config, const std::string& assignment)
{
    const auto eq = assignment.find('=');
    require(eq != std::string::npos && eq > 0, "override '" + assignment + "': expected key.path=value");
    const std::string path = assignment.substr(0, eq), text = assignment.substr(eq + 1);
    Json value;
    try {
        value = Json::parse(text);
    } catch (const Json::exception&) {
        value = text;
    }
    Json* node = &config;
    std::stringstream ss(path);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ss, part, '.')) {
        require(!part.empty(), "override '" + assignment + "': empty key");
        parts.push_back(part);
    }
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
        if (!node->is_object()) throw ValidationError("override '" + assignment + "': " + parts[i] + " is not a section");
        node = &(*node)[parts[i]];
        if (node->is_null()) *node = Json::object();
    }
    if (!node->is_object()) throw ValidationError("override '" + assignment + "': parent is not a section");
    (*node)[parts.back()] = value;
}

Json load_config_json(const fs::path& path, const std::vector<std::string>& overrides, Json base)
{
    Json j = std::move(base);
    if (!path.empty()) {
        if (!fs::exists(path)) throw ValidationError("config file not found: " + path.string());
        Json file;
        try {
            file = Json::parse(io::read_text(path));
        } catch (const Json::exception& e) {
            throw ValidationError("config file " + path.string() + ": " + e.what());
        }
        if (!file.is_object()) throw ValidationError("config file " + path.string() + ": expected an object");
        j.merge_patch(file);
    }
    for (const auto& o : overrides) apply_override(j, o);
    return j;
}

// ---- shared helpers --------------------------------------------------------

namespace {

void emit(const LogFn& log, const std::string& msg)
{
    if (log) log(msg);
}

void set_threads(const PipelineConfig& cfg)
{
    if (cfg.threads > 0) omp_set_num_threads(cfg.threads);
}

Json read_json(const fs::path& path, const std::string& what)
{
    if (!fs::exists(path)) throw ValidationError(what + " not found: " + path.string());
    try {
        return Json::parse(io::read_text(path));
    } catch (const Json::exception& e) {
        throw ValidationError(what + " " + path.string() + ": " + e.what());
    }
}

void write_json(const fs::path& path, const Json& j)
{
    io::write_text(path, j.dump(2) + "\n");
}

void make_dirs(const fs::path& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

/// Runs one labelled stage, prefixing any library error with the label and keeping its type.
template <class F>
auto stage(const char* label, F&& f) -> decltype(f())
{
    try {
        return f();
    } catch (const ValidationError& e) {
        throw ValidationError(std::string(label) + ": " + e.what());
    } catch (const NumericalError& e) {
        throw NumericalError(std::string(label) + ": " + e.what());
    } catch (const IoError& e) {
        throw IoError(std::string(label) + ": " + e.what());
    }
}

Image mask_to_image(const Mask& m)
{
    Image out(m.width(), m.height());
    for (std::size_t i = 0; i < m.size(); ++i) out[i] = m[i];
    return out;
}

Mask image_to_mask(const Image& g)
{
    Mask out(g.width(), g.height());
    for (std::size_t i = 0; i < g.size(); ++i) out[i] = g[i] != 0 ? 1 : 0;
    return out;
}

Json with_system(const SystemSpec& spec, const Json& aberration)
{
    return {{"system", to_json(spec)}, {"aberration", aberration}};
}

SimulatedSystem build_system(const SystemSpec& spec, double virtual_depth)
{
    SimulatedSystem sys = make_system(spec);
    if (virtual_depth != spec.v_ref) sys.vcam = VirtualCamera::make(sys.intr, virtual_depth);
    return sys;
}

} // namespace

// ---- simulate --------------------------------------------------------------

SimulateOutput cmd_simulate(const PipelineConfig& cfg, const LogFn& log)
{
    set_threads(cfg);
    const SimulatedSystem sys = build_system(cfg.system, cfg.virtual_depth);
    const AberrationSpec aberration = dcm_from_json(cfg.simulate.aberration, sys.intr);
    SimulateOutput out;

    if (cfg.simulate.kind == SimulateKind::Session) {
        const SessionSpec spec = session_from_json(cfg.session, sys.fov);
        out.dir = cfg.session_dir();
        make_dirs(out.dir);
        emit(log, "simulate: calibration session with " + std::to_string(spec.plate_Z.size()) + " plates and " +
                      std::to_string(spec.targets.size()) + " targets");
        const SimulatedSession session(sys, aberration, spec);
        stage("simulate session", [&] { write_session(out.dir, session); });
        Json sys_json = with_system(cfg.system, cfg.simulate.aberration);
        sys_json["virtual_depth"] = cfg.virtual_depth;
        sys_json["session"] = to_json(spec);
        write_json(out.dir / "system.json", sys_json);
        out.files.push_back(out.dir / "manifest.json");
        out.files.push_back(out.dir / "system.json");
        return out;
    }

    out.dir = cfg.capture_dir();
    make_dirs(out.dir);
    const auto scene = scene_from_json(cfg.simulate.scene, sys.fov);
    emit(log, "simulate: scene '" + scene->name() + "', sensor " + std::to_string(cfg.system.sensor_width) + "x" +
                  std::to_string(cfg.system.sensor_height) + ", " + std::to_string(sys.grid.size()) + " lenslets");
    TraceOptions to;
    to.ledger = cfg.simulate.ledger;
    const RenderResult rr = stage("simulate render", [&] {
        return render_lightfield(*scene, cfg.fringe, sys.intr, sys.grid, sys.projector, aberration, cfg.simulate.noise, to);
    });

    Json images = Json::array();
    for (std::size_t n = 0; n < rr.images.size(); ++n) {
        char name[32];
        std::snprintf(name, sizeof name, "fringe_%02zu.pfm", n);
        io::write_pfm(out.dir / name, rr.images[n]);
        images.push_back({{"file", name}, {"sha256", io::sha256_file(out.dir / name)}});
        out.files.push_back(out.dir / name);
    }
    Json ledger = nullptr;
    if (rr.trace.ledger) {
        const RayLedger& l = *rr.trace.ledger;
        io::write_pfm(out.dir / "ledger_ray.pfm", {&l.theta_x, &l.theta_y, &l.D});
        io::write_pfm(out.dir / "ledger_point.pfm", {&l.X, &l.Y, &l.Z});
        io::write_pfm(out.dir / "ledger_projector.pfm", {&rr.trace.xp, &rr.trace.yp, &l.v});
        ledger = {{"ray", {{"file", "ledger_ray.pfm"}, {"channels", {"theta_x", "theta_y", "D"}}}},
                  {"point", {{"file", "ledger_point.pfm"}, {"channels", {"X", "Y", "Z"}}}},
                  {"projector", {{"file", "ledger_projector.pfm"}, {"channels", {"x_p", "y_p", "v"}}}}};
        for (const char* f : {"ledger_ray.pfm", "ledger_point.pfm", "ledger_projector.pfm"}) out.files.push_back(out.dir / f);
    }
    Json fringe = to_json(cfg.fringe);
    fringe.erase("orientation");
    const Json manifest = {{"schema_version", 1},
                           {"kind", "capture"},
                           {"scene", cfg.simulate.scene},
                           {"scene_name", scene->name()},
                           {"system", to_json(cfg.system)},
                           {"aberration", to_json(aberration)},
                           {"noise", to_json(cfg.simulate.noise)},
                           {"fringe", fringe},
                           {"images", images},
                           {"ledger", ledger},
                           {"config", to_json(cfg)}};
    write_json(out.dir / "manifest.json", manifest);
    out.files.push_back(out.dir / "manifest.json");
    emit(log, "simulate: wrote " + std::to_string(out.files.size()) + " files to " + out.dir.string());
    return out;
}

// ---- calibrate -------------------------------------------------------------

namespace {

Json report_json(const CalibrationReport& r)
{
    Json targets = Json::array();
    for (const auto& t : r.targets) targets.push_back({{"index", t.index}, {"detected", t.detected}, {"used", t.used}});
    return {{"camera_rmse_px", r.camera_rmse},
            {"projector_rmse_px", r.projector_rmse},
            {"stereo_points", r.stereo_points},
            {"targets", targets},
            {"plate_samples", r.plate_samples},
            {"dcm",
             {{"iterations", r.dcm.iterations},
              {"converged", r.dcm.converged},
              {"stop_reason", r.dcm.stop_reason},
              {"initial_cost", r.dcm.initial_cost},
              {"final_cost", r.dcm.final_cost},
              {"rmse_z_mm", r.dcm.rmse_z},
              {"mae_z_mm", r.dcm.mae_z},
              {"rmse_Z_mm", r.dcm.rmse_Z},
              {"mae_Z_mm", r.dcm.mae_Z},
              {"samples", r.dcm.residuals.size()}}}};
}

} // namespace

CalibrateOutput cmd_calibrate(const PipelineConfig& cfg, const LogFn& log)
{
    set_threads(cfg);
    CalibrateOutput out;
    const fs::path dir = cfg.calibration_file().parent_path();
    CalibrationDocument& doc = out.document;

    if (cfg.calibrate.mode == CalibrationMode::Truth) {
        // nominal rig taken as known; used when a session is not worth rendering
        const SimulatedSystem sys = build_system(cfg.system, cfg.virtual_depth);
        doc.intr = sys.intr;
        doc.layout = cfg.system.layout;
        doc.centers = sys.grid.centers();
        doc.dcm = dcm_from_json(cfg.simulate.aberration, sys.intr);
        doc.mc = sys.vcam.projection;
        doc.mp = sys.projector;
        doc.v_w = sys.vcam.v_w;
        doc.projector_width = cfg.system.projector.width;
        doc.projector_height = cfg.system.projector.height;
        doc.report = {{"mode", "truth"}};
        emit(log, "calibrate: writing the simulator's ground-truth calibration");
    } else {
        const fs::path sdir = cfg.session_dir();
        if (!fs::exists(sdir / "manifest.json"))
            throw ValidationError("calibration session not found: " + sdir.string() + " (run 'simulate' with simulate.kind=session)");
        SystemSpec spec = cfg.system;
        double v_w = cfg.virtual_depth;
        if (fs::exists(sdir / "system.json")) {
            const Json s = read_json(sdir / "system.json", "session system");
            spec = system_from_json(s.at("system"));
            v_w = s.value("virtual_depth", v_w);
        }
        const SimulatedSystem sys = build_system(spec, v_w);
        const DiskSession session(sdir);
        require(session.plate_count() >= 1 && session.target_count() >= 1, "calibration session is empty");
        CalibrationOptions opts;
        opts.psad = cfg.psad;
        opts.refocus = cfg.refocus;
        opts.max_targets_per_plate = cfg.calibrate.max_targets;
        opts.solver.max_iterations = cfg.calibrate.max_iterations;
        opts.modulation_threshold = cfg.modulation_threshold;
        emit(log, "calibrate: " + std::to_string(session.plate_count()) + " plates, " +
                      std::to_string(session.target_count()) + " targets");
        const CalibrationResult res = run_calibration_pipeline(session, sys.intr, sys.grid, sys.vcam, opts);
        const PlateCapture p0 = session.plate(0);
        doc.intr = sys.intr;
        doc.layout = spec.layout;
        doc.centers = sys.grid.centers();
        doc.dcm = res.dcm;
        doc.mc = res.mc;
        doc.mp = res.mp;
        doc.v_w = sys.vcam.v_w;
        doc.projector_width = p0.projector_width;
        doc.projector_height = p0.projector_height;
        doc.report = report_json(res.report);
        doc.report["mode"] = "session";
        make_dirs(dir);
        io::write_text(dir / "dcm_residuals.csv", res.report.dcm.residual_csv());
        emit(log, "calibrate: camera rmse " + std::to_string(res.report.camera_rmse) + " px, projector rmse " +
                      std::to_string(res.report.projector_rmse) + " px, DCM rmse_Z " +
                      std::to_string(res.report.dcm.rmse_Z) + " mm");
    }
    make_dirs(dir);
    out.calibration = cfg.calibration_file();
    save_calibration(out.calibration, doc);
    Json report = doc.report;
    report["config"] = to_json(cfg);
    write_json(dir / "report.json", report);
    return out;
}

// ---- reconstruct -----------------------------------------------------------

namespace {

/// Stage outputs kept as lossless raw grids under cache/<stage>-<key>.
class StageCache {
public:
    StageCache(fs::path root, bool enabled) : root_(std::move(root)), enabled_(enabled) {}

    fs::path path(const std::string& stage, const std::string& key) const
    {
        return root_ / (stage + "-" + key.substr(0, 24)) / "data.raw";
    }

    bool load(const std::string& stage, const std::string& key, std::vector<Image>& out) const
    {
        if (!enabled_) return false;
        const fs::path p = path(stage, key);
        if (!fs::exists(p)) return false;
        try {
            out = io::read_raw(p);
            return true;
        } catch (const Error&) {
            return false; // corrupt entries are recomputed
        }
    }

    void store(const std::string& stage, const std::string& key, const std::vector<const Image*>& grids) const
    {
        if (!enabled_) return;
        const fs::path p = path(stage, key);
        make_dirs(p.parent_path());
        const fs::path tmp = p.string() + ".tmp";
        io::write_raw(tmp, grids);
        fs::rename(tmp, p);
    }

private:
    fs::path root_;
    bool enabled_;
};

std::string chain(const std::string& stage, std::initializer_list<std::string> parts)
{
    std::string s = "pglf-stage-v1:" + stage;
    for (const auto& p : parts) s += "\n" + p;
    return io::sha256_hex(s);
}

Json stats_json(const ErrorStats& s)
{
    return {{"count", s.count}, {"rmse", s.rmse}, {"mae", s.mae}, {"median", s.median}, {"max", s.max}};
}

void write_cloud_ply(const fs::path& path, const PointCloud& cloud, const std::string& comment)
{
    std::vector<io::PlyPoint> pts;
    pts.reserve(cloud.valid_count());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        if (!cloud.valid[i]) continue;
        const Vec3& p = cloud.points[i];
        pts.push_back({static_cast<float>(p.x()), static_cast<float>(p.y()), static_cast<float>(p.z()),
                       cloud.quality.size() == cloud.size() ? cloud.quality[i] : 0.0f});
    }
    io::write_ply(path, pts, cloud.quality.size() == cloud.size(), {comment});
}

} // namespace

ReconstructOutput cmd_reconstruct(const PipelineConfig& cfg, const LogFn& log)
{
    set_threads(cfg);
    ReconstructOutput out;

    // everything is validated before the first expensive stage
    const fs::path calib_path = cfg.calibration_file();
    if (!fs::exists(calib_path)) throw ValidationError("calibration file not found: " + calib_path.string());
    const CalibrationDocument doc = load_calibration(calib_path);
    const fs::path cap = cfg.capture_dir();
    const Json manifest = read_json(cap / "manifest.json", "capture manifest");
    if (manifest.value("kind", std::string()) != "capture") throw ValidationError("capture manifest: not a capture");

    Json fringe_json = manifest.contains("fringe") ? manifest.at("fringe") : to_json(cfg.fringe);
    fringe_json.erase("orientation");
    ProjectorSpec pspec;
    pspec.width = doc.projector_width;
    pspec.height = doc.projector_height;
    const FringeConfig fringe = fringe_from_json(fringe_json, pspec);

    std::vector<fs::path> image_files;
    std::string input_hash;
    for (const auto& im : manifest.at("images")) {
        const fs::path f = cap / im.at("file").get<std::string>();
        if (!fs::exists(f)) throw ValidationError("capture image missing: " + f.string());
        image_files.push_back(f);
        input_hash += io::sha256_file(f) + ";";
    }
    require(static_cast<int>(image_files.size()) == fringe.N,
            "capture: " + std::to_string(image_files.size()) + " images for N = " + std::to_string(fringe.N));

    const LensletGrid grid = doc.grid();
    const VirtualCamera vcam = doc.vcam();
    const FeasibleRegion region = stage("feasible region", [&] { return compute_feasible_region(cfg.Z_min, cfg.Z_max, doc.intr); });
    const DcmParams dcm = cfg.reconstruct.model == DepthModel::Linear ? DcmParams::linear(doc.intr) : doc.dcm;
    const std::string calib_hash = io::sha256_file(calib_path);
    const StageCache cache(cfg.work_dir / "cache", cfg.reconstruct.cache);

    std::vector<Image> images;
    auto load_images = [&] {
        if (!images.empty()) return;
        for (const auto& f : image_files) images.push_back(io::read_pfm(f));
        validate_stack(images, 3, "capture");
        require(images[0].width() == doc.intr.sensor_width && images[0].height() == doc.intr.sensor_height,
                "capture size does not match the calibrated sensor");
    };

    // phase
    const std::string k_phase = chain("phase", {input_hash, to_json(fringe).dump(), Json(cfg.modulation_threshold).dump()});
    PhaseMap phase;
    {
        std::vector<Image> c;
        if (cache.load("phase", k_phase, c) && c.size() == 3) {
            phase.phase = std::move(c[0]);
            phase.modulation = std::move(c[1]);
            phase.mask = image_to_mask(c[2]);
            out.cache_hits.push_back("phase");
        } else {
            load_images();
            phase = stage("phase", [&] { return compute_phase(images, cfg.modulation_threshold); });
            const Image m = mask_to_image(phase.mask);
            cache.store("phase", k_phase, {&phase.phase, &phase.modulation, &m});
        }
    }
    emit(log, "reconstruct: phase ready");

    // match
    const Json grid_json = {{"intrinsics", to_json(doc.intr)}, {"centers", to_json(doc)["lenslets"]}};
    const std::string k_match = chain("match", {k_phase, to_json(cfg.psad).dump(), Json({cfg.Z_min, cfg.Z_max}).dump(),
                                                io::sha256_hex(grid_json.dump())});
    DisparityField disp;
    {
        std::vector<Image> c;
        if (cache.load("match", k_match, c) && c.size() == 4) {
            disp.D = std::move(c[0]);
            disp.count = Grid<std::uint8_t>(c[1].width(), c[1].height());
            for (std::size_t i = 0; i < c[1].size(); ++i) disp.count[i] = static_cast<std::uint8_t>(c[1][i]);
            disp.valid = image_to_mask(c[2]);
            disp.cost = std::move(c[3]);
            disp.region = region;
            out.cache_hits.push_back("match");
        } else {
            disp = stage("match", [&] { return match_lenslets(phase, grid, region, cfg.psad); });
            Image cnt(disp.count.width(), disp.count.height());
            for (std::size_t i = 0; i < cnt.size(); ++i) cnt[i] = disp.count[i];
            const Image v = mask_to_image(disp.valid);
            cache.store("match", k_match, {&disp.D, &cnt, &v, &disp.cost});
        }
    }
    emit(log, "reconstruct: " + std::to_string(disp.valid_count()) + " disparities");

    // reference depth
    const std::string k_ref = chain("reference", {k_match, calib_hash, to_json(dcm).dump(), to_json(cfg.filter).dump()});
    DepthMap ref;
    {
        std::vector<Image> c;
        if (cache.load("reference", k_ref, c) && c.size() == 2) {
            ref.Z = std::move(c[0]);
            ref.valid = image_to_mask(c[1]);
            ref.provenance = DepthProvenance::Filtered;
            out.cache_hits.push_back("reference");
        } else {
            ref = stage("reference depth", [&] {
                const PointCloud initial = initial_point_cloud(disp, doc.intr, grid, dcm);
                return fill_and_filter(reproject(initial, vcam), cfg.filter);
            });
            const Image v = mask_to_image(ref.valid);
            cache.store("reference", k_ref, {&ref.Z, &v});
        }
    }
    emit(log, "reconstruct: reference depth coverage " + std::to_string(ref.coverage()));

    // refocus
    const std::string k_refocus = chain("refocus", {k_match, input_hash, calib_hash, to_json(cfg.refocus).dump()});
    std::vector<Image> refocused;
    Mask refocus_valid;
    {
        std::vector<Image> c;
        if (cache.load("refocus", k_refocus, c) && c.size() == static_cast<std::size_t>(fringe.N) + 1) {
            refocus_valid = image_to_mask(c.back());
            c.pop_back();
            refocused = std::move(c);
            out.cache_hits.push_back("refocus");
        } else {
            load_images();
            RefocusResult rf = stage("refocus", [&] { return refocus(images, disp, vcam, doc.intr, grid, cfg.refocus); });
            refocused = std::move(rf.images);
            refocus_valid = std::move(rf.valid);
            std::vector<const Image*> g;
            for (const auto& im : refocused) g.push_back(&im);
            const Image v = mask_to_image(refocus_valid);
            g.push_back(&v);
            cache.store("refocus", k_refocus, g);
        }
    }

    // unwrap + final cloud; cheap, always recomputed
    const PhaseMap phase_v = stage("virtual phase", [&] { return compute_phase(refocused, cfg.modulation_threshold); });
    const UnwrapResult unwrap = stage("unwrap", [&] { return unwrap_with_reference(phase_v, ref, doc.mc, doc.mp, fringe); });
    const PointCloud cloud = stage("final cloud", [&] { return final_point_cloud(unwrap, doc.mc, doc.mp, fringe); });
    const UniquenessReport uq = check_uniqueness(fringe, region, doc.intr, grid, doc.mp);

    out.dir = cfg.run_dir();
    make_dirs(out.dir);

    Image zref = ref.Z;
    for (std::size_t i = 0; i < zref.size(); ++i)
        if (!ref.valid[i]) zref[i] = std::numeric_limits<double>::quiet_NaN();
    io::write_pfm(out.dir / "reference_depth.pfm", zref);
    write_json(out.dir / "reference_depth.json", {{"width", zref.width()}, {"height", zref.height()}, {"units", "mm"},
                                                  {"invalid", "NaN"}, {"provenance", "filtered"},
                                                  {"coverage", ref.coverage()}});
    write_cloud_ply(out.dir / "cloud.ply", cloud, "pglf final cloud " + std::to_string(cloud.width) + "x" + std::to_string(cloud.height));

    Json metrics = {{"run", cfg.run},
                    {"scene", manifest.value("scene_name", std::string())},
                    {"model", cfg.reconstruct.model == DepthModel::Dcm ? "dcm" : "linear"},
                    {"sites", {cloud.width, cloud.height}},
                    {"cloud_valid", cloud.valid_count()},
                    {"valid_fraction", static_cast<double>(cloud.valid_count()) / static_cast<double>(cloud.size())},
                    {"disparity_valid", disp.valid_count()},
                    {"reference_coverage", ref.coverage()},
                    {"uniqueness", {{"unique", uq.unique}, {"worst_span_rad", uq.worst_span}}}};

    // ground truth from the analytic scene the capture was rendered from
    if (manifest.contains("scene") && manifest.contains("system")) {
        stage("metrics", [&] {
            const SystemSpec truth_spec = system_from_json(manifest.at("system"));
            const SimulatedSystem truth = build_system(truth_spec, doc.v_w);
            if (truth.vcam.width != vcam.width || truth.vcam.height != vcam.height) {
                metrics["ground_truth"] = "virtual camera size differs from the rendered system";
                return;
            }
            const auto scene = scene_from_json(manifest.at("scene"), truth.fov);
            const GroundTruth gt = ground_truth_cloud(*scene, truth.vcam, truth.projector, fringe);
            metrics["reference_depth"] = stats_json(depth_errors(ref.Z, ref.valid, gt.Z, gt.valid));
            metrics["final_depth"] = stats_json(cloud_depth_errors(cloud, gt));
            const SuccessRate sr = success_rate(phase_v, ref, unwrap, gt);
            metrics["success_rate"] = {{"attempted", sr.attempted}, {"correct", sr.correct}, {"rate", sr.rate}};
            if (const auto* stair = dynamic_cast<const StaircaseScene*>(scene.get())) {
                const StepReport st = step_heights(cloud, *stair);
                metrics["steps"] = {{"heights", st.heights}, {"expected", st.expected}, {"mae", st.mae}};
            }
            if (const auto* plane = dynamic_cast<const PlaneScene*>(scene.get()); plane && plane->pattern().cols > 0) {
                const CirclePattern& pat = plane->pattern();
                try {
                    const CircleGridReport cg = circle_grid_distances(mean_intensity(refocused), refocus_valid, cloud,
                                                                      doc.mc, pat.cols, pat.rows, pat.spacing);
                    metrics["circle_grid"] = {{"distances", cg.distances}, {"expected", cg.expected}, {"mae", cg.mae}};
                } catch (const ValidationError& e) {
                    metrics["circle_grid"] = {{"error", e.what()}};
                }
            }
            if (manifest.contains("ledger") && manifest.at("ledger").is_object()) {
                const auto ch = io::read_pfm_channels(cap / manifest.at("ledger").at("ray").at("file").get<std::string>());
                std::vector<double> e;
                for (std::size_t i = 0; i < disp.D.size(); ++i)
                    if (disp.valid[i] && std::isfinite(ch[2][i])) e.push_back(disp.D[i] - ch[2][i]);
                metrics["disparity_vs_ledger"] = stats_json(error_stats(std::move(e)));
            }
        });
    }
    write_json(out.dir / "metrics.json", metrics);

    Json outputs = Json::object();
    for (const char* f : {"reference_depth.pfm", "reference_depth.json", "cloud.ply", "metrics.json"})
        outputs[f] = io::sha256_file(out.dir / f);
    write_json(out.dir / "manifest.json", {{"schema_version", 1},
                                           {"kind", "reconstruction"},
                                           {"capture", cap.string()},
                                           {"calibration", calib_path.string()},
                                           {"calibration_sha256", calib_hash},
                                           {"stages", {{"phase", k_phase}, {"match", k_match},
                                                       {"reference", k_ref}, {"refocus", k_refocus}}},
                                           {"outputs", outputs},
                                           {"config", to_json(cfg)}});
    out.metrics = std::move(metrics);
    emit(log, "reconstruct: " + std::to_string(cloud.valid_count()) + " of " + std::to_string(cloud.size()) +
                  " sites valid; outputs in " + out.dir.string());
    return out;
}

// ---- report ----------------------------------------------------------------

namespace {

/// Value at a dotted path, serialised exactly as in the metrics file; empty when absent.
std::string cell(const Json& j, const std::string& path)
{
    const Json* node = &j;
    std::stringstream ss(path);
    std::string part;
    while (std::getline(ss, part, '.')) {
        if (!node->is_object() || !node->contains(part)) return "";
        node = &node->at(part);
    }
    return node->is_string() ? node->get<std::string>() : node->dump();
}

} // namespace

ReportOutput cmd_report(const fs::path& work_dir, const LogFn& log)
{
    const fs::path runs = work_dir / "runs";
    std::vector<fs::path> files;
    if (fs::is_directory(runs))
        for (const auto& e : fs::directory_iterator(runs))
            if (e.is_directory() && fs::exists(e.path() / "metrics.json")) files.push_back(e.path() / "metrics.json");
    if (files.empty()) throw ValidationError("no metrics found below " + runs.string());
    std::sort(files.begin(), files.end());

    static const std::vector<std::pair<std::string, std::string>> columns = {
        {"run", "run"},
        {"scene", "scene"},
        {"model", "model"},
        {"valid_fraction", "valid_fraction"},
        {"ref_rmse_mm", "reference_depth.rmse"},
        {"ref_mae_mm", "reference_depth.mae"},
        {"final_rmse_mm", "final_depth.rmse"},
        {"final_mae_mm", "final_depth.mae"},
        {"sr", "success_rate.rate"},
        {"disparity_mae_px", "disparity_vs_ledger.mae"},
        {"step_mae_mm", "steps.mae"},
        {"circle_mae_mm", "circle_grid.mae"},
    };
    std::vector<std::vector<std::string>> table;
    for (const auto& f : files) {
        const Json m = read_json(f, "metrics");
        std::vector<std::string> row;
        for (const auto& [name, path] : columns) row.push_back(cell(m, path));
        if (row[0].empty()) row[0] = f.parent_path().filename().string();
        table.push_back(std::move(row));
    }

    ReportOutput out;
    out.rows = static_cast<int>(table.size());
    for (std::size_t c = 0; c < columns.size(); ++c) out.csv += (c ? "," : "") + columns[c].first;
    out.csv += "\n";
    for (const auto& row : table) {
        for (std::size_t c = 0; c < row.size(); ++c) out.csv += (c ? "," : "") + row[c];
        out.csv += "\n";
    }
    std::vector<std::size_t> width(columns.size());
    for (std::size_t c = 0; c < columns.size(); ++c) {
        width[c] = columns[c].first.size();
        for (const auto& row : table) width[c] = std::max(width[c], row[c].size());
    }
    auto line = [&](const std::vector<std::string>& cells) {
        std::string s;
        for (std::size_t c = 0; c < cells.size(); ++c) {
            s += cells[c];
            if (c + 1 < cells.size()) s += std::string(width[c] - cells[c].size() + 2, ' ');
        }
        return s + "\n";
    };
    std::vector<std::string> header;
    for (const auto& col : columns) header.push_back(col.first);
    out.summary = std::to_string(table.size()) + " run(s) in " + work_dir.string() + "\n" + line(header);
    for (const auto& row : table) out.summary += line(row);

    const fs::path dir = work_dir / "report";
    make_dirs(dir);
    io::write_text(dir / "metrics.csv", out.csv);
    io::write_text(dir / "summary.txt", out.summary);
    emit(log, "report: " + std::to_string(out.rows) + " run(s)");
    return out;
}

} // namespace pglf
