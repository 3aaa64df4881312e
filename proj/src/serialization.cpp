#include "pglf/serialization.hpp"

#include <algorithm>
#include <cmath>
#include <regex>

#include "pglf/io.hpp"

namespace pglf {

namespace fs = std::filesystem;

namespace {

template <class T>
T get(const Json& j, const char* key, T fallback, const std::string& where)
{
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const Json::exception& e) {
        throw ValidationError(where + "." + key + ": " + e.what());
    }
}

Vec3 vec3_from(const Json& j, const std::string& where)
{
    if (!j.is_array() || j.size() != 3) throw ValidationError(where + ": expected an array of three numbers");
    try {
        return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
    } catch (const Json::exception& e) {
        throw ValidationError(where + ": " + e.what());
    }
}

Json vec3_json(const Vec3& v)
{
    return Json::array({v.x(), v.y(), v.z()});
}

std::string layout_name(LensletLayout l)
{
    return l == LensletLayout::Hexagonal ? "hexagonal" : "square";
}

LensletLayout layout_from(const std::string& s, const std::string& where)
{
    if (s == "hexagonal") return LensletLayout::Hexagonal;
    if (s == "square") return LensletLayout::Square;
    throw ValidationError(where + ": unknown lenslet layout '" + s + "'");
}

std::vector<Image> load_stack(const fs::path& dir, const Json& files, const std::string& where)
{
    if (!files.is_array() || files.empty()) throw ValidationError(where + ": expected a non-empty file list");
    std::vector<Image> out;
    for (const auto& f : files) out.push_back(io::read_pfm(dir / f.get<std::string>()));
    return out;
}

Json save_stack(const fs::path& dir, const std::string& stem, const std::vector<Image>& images)
{
    Json files = Json::array();
    for (std::size_t n = 0; n < images.size(); ++n) {
        const std::string name = stem + "_" + std::to_string(n) + ".pfm";
        io::write_pfm(dir / name, images[n]);
        files.push_back(name);
    }
    return files;
}

} // namespace

void check_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where)
{
    if (!j.is_object()) throw ValidationError(where + ": expected an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        const bool known = std::any_of(allowed.begin(), allowed.end(), [&](const char* k) { return it.key() == k; });
        if (!known) throw ValidationError(where + ": unknown key '" + it.key() + "'");
    }
}

Json to_json(const PlenopticIntrinsics& i)
{
    return {{"D_mu", i.D_mu}, {"d_mu", i.d_mu}, {"f_L", i.f_L}, {"d", i.d},
            {"sensor_width", i.sensor_width}, {"sensor_height", i.sensor_height}, {"pixel_pitch", i.pixel_pitch}};
}

PlenopticIntrinsics intrinsics_from_json(const Json& j)
{
    const std::string w = "intrinsics";
    check_keys(j, {"D_mu", "d_mu", "f_L", "d", "sensor_width", "sensor_height", "pixel_pitch"}, w);
    PlenopticIntrinsics i;
    i.D_mu = get(j, "D_mu", i.D_mu, w);
    i.d_mu = get(j, "d_mu", i.d_mu, w);
    i.f_L = get(j, "f_L", i.f_L, w);
    i.d = get(j, "d", i.d, w);
    i.sensor_width = get(j, "sensor_width", i.sensor_width, w);
    i.sensor_height = get(j, "sensor_height", i.sensor_height, w);
    i.pixel_pitch = get(j, "pixel_pitch", i.pixel_pitch, w);
    i.validate();
    return i;
}

Json to_json(const DcmParams& p)
{
    return {{"a", p.a}, {"k", p.k}, {"d", p.d}};
}

DcmParams dcm_from_json(const Json& j, const PlenopticIntrinsics& intr)
{
    const std::string w = "dcm";
    check_keys(j, {"a", "k", "d"}, w);
    DcmParams p = DcmParams::linear(intr);
    if (j.contains("a")) {
        const auto a = get(j, "a", std::vector<double>{}, w);
        if (a.size() != 6) throw ValidationError("dcm.a: expected six coefficients");
        std::copy(a.begin(), a.end(), p.a.begin());
    }
    p.k = get(j, "k", p.k, w);
    if (j.contains("d") && !j.at("d").is_null()) p.d = get(j, "d", p.d, w);
    p.validate();
    return p;
}

Json to_json(const ProjectionMatrix& m)
{
    Json rows = Json::array();
    for (int r = 0; r < 3; ++r) rows.push_back(Json::array({m.m(r, 0), m.m(r, 1), m.m(r, 2), m.m(r, 3)}));
    return rows;
}

ProjectionMatrix projection_from_json(const Json& j, Device role)
{
    if (!j.is_array() || j.size() != 3) throw ValidationError("projection matrix: expected 3 rows");
    ProjectionMatrix p;
    p.role = role;
    for (int r = 0; r < 3; ++r) {
        if (!j[r].is_array() || j[r].size() != 4) throw ValidationError("projection matrix: expected 4 columns");
        for (int c = 0; c < 4; ++c) p.m(r, c) = j[r][c].get<double>();
    }
    if (!p.m.allFinite()) throw ValidationError("projection matrix: non-finite entry");
    return p;
}

Json to_json(const SystemSpec& s)
{
    return {{"sensor_width", s.sensor_width}, {"sensor_height", s.sensor_height}, {"pixel_pitch", s.pixel_pitch},
            {"D_mu", s.D_mu}, {"d_mu", s.d_mu}, {"f_L", s.f_L}, {"Z_ref", s.Z_ref}, {"v_ref", s.v_ref},
            {"layout", layout_name(s.layout)},
            {"projector", {{"width", s.projector.width}, {"height", s.projector.height}, {"focal", s.projector.focal},
                           {"position", vec3_json(s.projector.position)}, {"target", vec3_json(s.projector.target)}}}};
}

SystemSpec system_from_json(const Json& j)
{
    const std::string w = "system";
    check_keys(j, {"sensor_width", "sensor_height", "pixel_pitch", "D_mu", "d_mu", "f_L", "Z_ref", "v_ref", "layout", "projector"}, w);
    SystemSpec s;
    s.sensor_width = get(j, "sensor_width", s.sensor_width, w);
    s.sensor_height = get(j, "sensor_height", s.sensor_height, w);
    s.pixel_pitch = get(j, "pixel_pitch", s.pixel_pitch, w);
    s.D_mu = get(j, "D_mu", s.D_mu, w);
    s.d_mu = get(j, "d_mu", s.d_mu, w);
    s.f_L = get(j, "f_L", s.f_L, w);
    s.Z_ref = get(j, "Z_ref", s.Z_ref, w);
    s.v_ref = get(j, "v_ref", s.v_ref, w);
    s.layout = layout_from(get(j, "layout", layout_name(s.layout), w), w + ".layout");
    if (j.contains("projector")) {
        const Json& p = j.at("projector");
        const std::string wp = w + ".projector";
        check_keys(p, {"width", "height", "focal", "position", "target"}, wp);
        s.projector.width = get(p, "width", s.projector.width, wp);
        s.projector.height = get(p, "height", s.projector.height, wp);
        s.projector.focal = get(p, "focal", s.projector.focal, wp);
        if (p.contains("position")) s.projector.position = vec3_from(p.at("position"), wp + ".position");
        if (p.contains("target")) s.projector.target = vec3_from(p.at("target"), wp + ".target");
    }
    require(s.sensor_width > 0 && s.sensor_height > 0 && s.pixel_pitch > 0, "system: sensor size and pitch must be positive");
    require(s.Z_ref > s.f_L && s.v_ref > 1, "system: Z_ref must exceed f_L and v_ref must exceed 1");
    require(s.projector.width > 0 && s.projector.height > 0 && s.projector.focal > 0, "system.projector: invalid size or focal length");
    return s;
}

Json to_json(const NoiseSpec& n)
{
    return {{"sigma", n.sigma}, {"fixed_pattern", n.fixed_pattern}, {"seed", n.seed}};
}

NoiseSpec noise_from_json(const Json& j)
{
    const std::string w = "noise";
    check_keys(j, {"sigma", "fixed_pattern", "seed"}, w);
    NoiseSpec n;
    n.sigma = get(j, "sigma", n.sigma, w);
    n.fixed_pattern = get(j, "fixed_pattern", n.fixed_pattern, w);
    n.seed = get(j, "seed", n.seed, w);
    require(n.sigma >= 0 && n.fixed_pattern >= 0, "noise: sigma and fixed_pattern must be non-negative");
    return n;
}

Json to_json(const FringeConfig& f)
{
    return {{"f", f.f}, {"N", f.N}, {"orientation", f.orientation == FringeOrientation::Rows ? "rows" : "columns"}};
}

FringeConfig fringe_from_json(const Json& j, const ProjectorSpec& projector)
{
    const std::string w = "fringe";
    check_keys(j, {"f", "N", "orientation"}, w);
    FringeConfig f;
    f.f = get(j, "f", f.f, w);
    f.N = get(j, "N", f.N, w);
    f.width = projector.width;
    f.height = projector.height;
    const std::string o = get(j, "orientation", std::string("rows"), w);
    if (o == "rows") f.orientation = FringeOrientation::Rows;
    else if (o == "columns") f.orientation = FringeOrientation::Columns;
    else throw ValidationError("fringe.orientation: expected 'rows' or 'columns'");
    f.validate();
    return f;
}

Json to_json(const PsadConfig& c)
{
    return {{"w", c.w}, {"tau1", c.tau1}, {"sigma_s", c.sigma_s}, {"sigma_phi_scale", c.sigma_phi_scale},
            {"tau2_scale", c.tau2_scale}, {"gate_cos", c.gate_cos}, {"disparity_step", c.disparity_step},
            {"coarse_step", c.coarse_step}, {"min_overlap", c.min_overlap}, {"use_weights", c.use_weights},
            {"truncate", c.truncate}, {"refine", c.refine},
            {"weight_source", c.weight_source == WeightSource::Template ? "template" : "target"}};
}

PsadConfig psad_from_json(const Json& j)
{
    const std::string w = "psad";
    check_keys(j, {"w", "tau1", "sigma_s", "sigma_phi_scale", "tau2_scale", "gate_cos", "disparity_step", "coarse_step",
                   "min_overlap", "use_weights", "truncate", "refine", "weight_source"}, w);
    PsadConfig c;
    c.w = get(j, "w", c.w, w);
    c.tau1 = get(j, "tau1", c.tau1, w);
    c.sigma_s = get(j, "sigma_s", c.sigma_s, w);
    c.sigma_phi_scale = get(j, "sigma_phi_scale", c.sigma_phi_scale, w);
    c.tau2_scale = get(j, "tau2_scale", c.tau2_scale, w);
    c.gate_cos = get(j, "gate_cos", c.gate_cos, w);
    c.disparity_step = get(j, "disparity_step", c.disparity_step, w);
    c.coarse_step = get(j, "coarse_step", c.coarse_step, w);
    c.min_overlap = get(j, "min_overlap", c.min_overlap, w);
    c.use_weights = get(j, "use_weights", c.use_weights, w);
    c.truncate = get(j, "truncate", c.truncate, w);
    c.refine = get(j, "refine", c.refine, w);
    const std::string ws = get(j, "weight_source", std::string("template"), w);
    if (ws == "template") c.weight_source = WeightSource::Template;
    else if (ws == "target") c.weight_source = WeightSource::Target;
    else throw ValidationError("psad.weight_source: expected 'template' or 'target'");
    c.validate();
    return c;
}

Json to_json(const FilterConfig& c)
{
    return {{"fill_radius", c.fill_radius}, {"gap_factor", c.gap_factor}, {"gap_floor", c.gap_floor},
            {"median_size", c.median_size}, {"side_radius", c.side_radius}, {"bilateral_sigma_s", c.bilateral_sigma_s},
            {"bilateral_sigma_d", c.bilateral_sigma_d}, {"min_coverage", c.min_coverage}};
}

FilterConfig filter_from_json(const Json& j)
{
    const std::string w = "filter";
    check_keys(j, {"fill_radius", "gap_factor", "gap_floor", "median_size", "side_radius", "bilateral_sigma_s",
                   "bilateral_sigma_d", "min_coverage"}, w);
    FilterConfig c;
    c.fill_radius = get(j, "fill_radius", c.fill_radius, w);
    c.gap_factor = get(j, "gap_factor", c.gap_factor, w);
    c.gap_floor = get(j, "gap_floor", c.gap_floor, w);
    c.median_size = get(j, "median_size", c.median_size, w);
    c.side_radius = get(j, "side_radius", c.side_radius, w);
    c.bilateral_sigma_s = get(j, "bilateral_sigma_s", c.bilateral_sigma_s, w);
    c.bilateral_sigma_d = get(j, "bilateral_sigma_d", c.bilateral_sigma_d, w);
    c.min_coverage = get(j, "min_coverage", c.min_coverage, w);
    c.validate();
    return c;
}

Json to_json(const RefocusConfig& c)
{
    return {{"rim_margin", c.rim_margin}, {"check_consistency", c.check_consistency},
            {"consistency_tol", c.consistency_tol}, {"vmap_fill_radius", c.vmap_fill_radius}, {"vmap_gap", c.vmap_gap}};
}

RefocusConfig refocus_from_json(const Json& j)
{
    const std::string w = "refocus";
    check_keys(j, {"rim_margin", "check_consistency", "consistency_tol", "vmap_fill_radius", "vmap_gap"}, w);
    RefocusConfig c;
    c.rim_margin = get(j, "rim_margin", c.rim_margin, w);
    c.check_consistency = get(j, "check_consistency", c.check_consistency, w);
    c.consistency_tol = get(j, "consistency_tol", c.consistency_tol, w);
    c.vmap_fill_radius = get(j, "vmap_fill_radius", c.vmap_fill_radius, w);
    c.vmap_gap = get(j, "vmap_gap", c.vmap_gap, w);
    require(c.rim_margin >= 0 && c.consistency_tol > 0 && c.vmap_fill_radius >= 0 && c.vmap_gap > 0,
            "refocus: parameters out of range");
    return c;
}

std::unique_ptr<Scene> scene_from_json(const Json& j, const FieldOfView& fov)
{
    if (j.is_string()) {
        // "plate@400mm" shorthand
        static const std::regex re(R"(^([a-z_]+)(?:@([0-9]+(?:\.[0-9]*)?)mm)?$)");
        std::smatch m;
        const std::string s = j.get<std::string>();
        if (!std::regex_match(s, m, re)) throw ValidationError("scene: cannot parse '" + s + "'");
        return make_preset_scene(m[1].str(), fov, m[2].matched ? std::stod(m[2].str()) : 400.0);
    }
    const std::string w = "scene";
    if (!j.is_object()) throw ValidationError("scene: expected a preset name or an object");
    if (j.contains("preset")) {
        check_keys(j, {"preset", "Z"}, w);
        return make_preset_scene(get(j, "preset", std::string(), w), fov, get(j, "Z", 400.0, w));
    }
    const std::string type = get(j, "type", std::string(), w);
    if (type == "plane") {
        check_keys(j, {"type", "center", "tilt_x", "tilt_y", "circles", "name"}, w);
        CirclePattern pat;
        if (j.contains("circles")) {
            const Json& c = j.at("circles");
            check_keys(c, {"cols", "rows", "spacing", "radius", "dark", "light"}, w + ".circles");
            pat.cols = get(c, "cols", 0, w);
            pat.rows = get(c, "rows", 0, w);
            pat.spacing = get(c, "spacing", 0.0, w);
            pat.radius = get(c, "radius", 0.0, w);
            pat.dark = get(c, "dark", pat.dark, w);
            pat.light = get(c, "light", pat.light, w);
        }
        const Vec3 center = j.contains("center") ? vec3_from(j.at("center"), w + ".center") : Vec3(0, 0, 400);
        return std::make_unique<PlaneScene>(center, get(j, "tilt_x", 0.0, w), get(j, "tilt_y", 0.0, w), pat,
                                            get(j, "name", std::string("plate"), w));
    }
    if (type == "staircase") {
        check_keys(j, {"type", "tiers", "edges", "name"}, w);
        return std::make_unique<StaircaseScene>(get(j, "tiers", std::vector<double>{}, w),
                                                get(j, "edges", std::vector<double>{}, w),
                                                get(j, "name", std::string("staircase"), w));
    }
    if (type == "relief") {
        check_keys(j, {"type", "base", "slope_x", "slope_y", "bumps", "name"}, w);
        std::vector<GaussianBump> bumps;
        for (const auto& b : j.value("bumps", Json::array())) {
            check_keys(b, {"x", "y", "amplitude", "sigma"}, w + ".bumps");
            bumps.push_back({get(b, "x", 0.0, w), get(b, "y", 0.0, w), get(b, "amplitude", 0.0, w), get(b, "sigma", 10.0, w)});
        }
        return std::make_unique<ReliefScene>(get(j, "base", 400.0, w), get(j, "slope_x", 0.0, w), get(j, "slope_y", 0.0, w),
                                             bumps, get(j, "name", std::string("relief"), w));
    }
    throw ValidationError("scene: unknown type '" + type + "'");
}

SessionSpec session_from_json(const Json& j, const FieldOfView& fov)
{
    const std::string w = "session";
    check_keys(j, {"plates", "targets", "board", "freqs", "steps", "noise", "Z_min", "Z_max"}, w);
    SessionSpec s = SessionSpec::defaults(fov);
    s.plate_Z = get(j, "plates", s.plate_Z, w);
    if (j.contains("targets")) {
        s.targets.clear();
        for (const auto& t : j.at("targets")) {
            check_keys(t, {"center", "tilt_x", "tilt_y"}, w + ".targets");
            s.targets.push_back({vec3_from(t.at("center"), w + ".targets.center"), get(t, "tilt_x", 0.0, w),
                                 get(t, "tilt_y", 0.0, w)});
        }
    }
    if (j.contains("board")) {
        const Json& b = j.at("board");
        check_keys(b, {"cols", "rows", "spacing", "radius", "dark", "light"}, w + ".board");
        s.board.cols = get(b, "cols", s.board.cols, w);
        s.board.rows = get(b, "rows", s.board.rows, w);
        s.board.spacing = get(b, "spacing", s.board.spacing, w);
        s.board.radius = get(b, "radius", s.board.radius, w);
        s.board.dark = get(b, "dark", s.board.dark, w);
        s.board.light = get(b, "light", s.board.light, w);
    }
    s.freqs = get(j, "freqs", s.freqs, w);
    s.steps = get(j, "steps", s.steps, w);
    if (j.contains("noise")) s.noise = noise_from_json(j.at("noise"));
    s.Z_min = get(j, "Z_min", s.Z_min, w);
    s.Z_max = get(j, "Z_max", s.Z_max, w);
    return s;
}

Json to_json(const SessionSpec& s)
{
    Json targets = Json::array();
    for (const auto& t : s.targets)
        targets.push_back({{"center", vec3_json(t.center)}, {"tilt_x", t.tilt_x_deg}, {"tilt_y", t.tilt_y_deg}});
    return {{"plates", s.plate_Z}, {"targets", targets},
            {"board", {{"cols", s.board.cols}, {"rows", s.board.rows}, {"spacing", s.board.spacing},
                       {"radius", s.board.radius}, {"dark", s.board.dark}, {"light", s.board.light}}},
            {"freqs", s.freqs}, {"steps", s.steps}, {"noise", to_json(s.noise)}, {"Z_min", s.Z_min}, {"Z_max", s.Z_max}};
}

LensletGrid CalibrationDocument::grid() const
{
    return LensletGrid(centers, layout, intr.D_mu, intr.sensor_width, intr.sensor_height);
}

VirtualCamera CalibrationDocument::vcam() const
{
    VirtualCamera c = VirtualCamera::make(intr, v_w);
    c.projection = mc;
    return c;
}

Json to_json(const CalibrationDocument& d)
{
    Json centers = Json::array();
    for (const auto& c : d.centers) centers.push_back(Json::array({c.x(), c.y()}));
    return {{"schema_version", CalibrationDocument::kSchemaVersion},
            {"intrinsics", to_json(d.intr)},
            {"lenslets", {{"layout", layout_name(d.layout)}, {"centers", centers}}},
            {"dcm", to_json(d.dcm)},
            {"camera_matrix", to_json(d.mc)},
            {"projector_matrix", to_json(d.mp)},
            {"projector", {{"width", d.projector_width}, {"height", d.projector_height}}},
            {"virtual_depth", d.v_w},
            {"report", d.report}};
}

CalibrationDocument calibration_from_json(const Json& j)
{
    const std::string w = "calibration";
    check_keys(j, {"schema_version", "intrinsics", "lenslets", "dcm", "camera_matrix", "projector_matrix", "projector",
                   "virtual_depth", "report"}, w);
    const int version = get(j, "schema_version", 0, w);
    if (version != CalibrationDocument::kSchemaVersion)
        throw ValidationError("calibration: unsupported schema_version " + std::to_string(version));
    for (const char* k : {"intrinsics", "lenslets", "dcm", "camera_matrix", "projector_matrix"})
        if (!j.contains(k)) throw ValidationError(std::string("calibration: missing '") + k + "'");
    CalibrationDocument d;
    d.intr = intrinsics_from_json(j.at("intrinsics"));
    const Json& l = j.at("lenslets");
    check_keys(l, {"layout", "centers"}, w + ".lenslets");
    d.layout = layout_from(get(l, "layout", std::string("hexagonal"), w), w + ".lenslets.layout");
    for (const auto& c : l.at("centers")) {
        if (!c.is_array() || c.size() != 2) throw ValidationError("calibration.lenslets.centers: expected [x, y] pairs");
        d.centers.emplace_back(c[0].get<double>(), c[1].get<double>());
    }
    require(!d.centers.empty(), "calibration.lenslets.centers: empty");
    d.dcm = dcm_from_json(j.at("dcm"), d.intr);
    d.mc = projection_from_json(j.at("camera_matrix"), Device::Camera);
    d.mp = projection_from_json(j.at("projector_matrix"), Device::Projector);
    if (j.contains("projector")) {
        d.projector_width = get(j.at("projector"), "width", d.projector_width, w);
        d.projector_height = get(j.at("projector"), "height", d.projector_height, w);
    }
    d.v_w = get(j, "virtual_depth", d.v_w, w);
    require(d.v_w > 1, "calibration.virtual_depth must exceed 1");
    d.report = j.value("report", Json::object());
    return d;
}

void save_calibration(const fs::path& path, const CalibrationDocument& doc)
{
    io::write_text(path, to_json(doc).dump(2) + "\n");
}

CalibrationDocument load_calibration(const fs::path& path)
{
    if (!fs::exists(path)) throw ValidationError("calibration file not found: " + path.string());
    Json j;
    try {
        j = Json::parse(io::read_text(path));
    } catch (const Json::exception& e) {
        throw ValidationError("calibration file " + path.string() + ": " + e.what());
    }
    return calibration_from_json(j);
}

void write_session(const fs::path& dir, const CalibrationSource& source)
{
    Json plates = Json::array(), targets = Json::array();
    for (int m = 0; m < source.plate_count(); ++m) {
        const PlateCapture p = source.plate(m);
        Json rows = Json::array();
        for (std::size_t k = 0; k < p.rows.size(); ++k)
            rows.push_back(save_stack(dir, "plate" + std::to_string(m) + "_rows_f" + std::to_string(p.freqs[k]), p.rows[k]));
        plates.push_back({{"Z_nominal", p.Z_nominal}, {"projector", {p.projector_width, p.projector_height}},
                          {"freqs", p.freqs}, {"steps", p.steps}, {"rows", rows}});
    }
    for (int i = 0; i < source.target_count(); ++i) {
        const TargetCapture t = source.target(i);
        Json rows = Json::array(), cols = Json::array(), world = Json::array();
        for (std::size_t k = 0; k < t.rows.size(); ++k) {
            rows.push_back(save_stack(dir, "target" + std::to_string(i) + "_rows_f" + std::to_string(t.freqs[k]), t.rows[k]));
            cols.push_back(save_stack(dir, "target" + std::to_string(i) + "_cols_f" + std::to_string(t.freqs[k]), t.cols[k]));
        }
        for (const auto& p : t.world_points) world.push_back(vec3_json(p));
        targets.push_back({{"world_points", world}, {"grid", {t.grid_cols, t.grid_rows}},
                           {"projector", {t.projector_width, t.projector_height}}, {"freqs", t.freqs},
                           {"steps", t.steps}, {"rows", rows}, {"cols", cols}});
    }
    const Json manifest = {{"schema_version", 1}, {"kind", "calibration_session"}, {"Z_min", source.Z_min()},
                           {"Z_max", source.Z_max()}, {"plates", plates}, {"targets", targets}};
    io::write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

DiskSession::DiskSession(fs::path dir) : dir_(std::move(dir))
{
    const fs::path m = dir_ / "manifest.json";
    if (!fs::exists(m)) throw ValidationError("session directory has no manifest.json: " + dir_.string());
    try {
        manifest_ = Json::parse(io::read_text(m));
    } catch (const Json::exception& e) {
        throw ValidationError("session manifest: " + std::string(e.what()));
    }
    if (manifest_.value("kind", std::string()) != "calibration_session")
        throw ValidationError("session manifest: not a calibration session");
    for (const char* key : {"plates", "targets", "Z_min", "Z_max"})
        if (!manifest_.contains(key)) throw ValidationError(std::string("session manifest: missing '") + key + "'");
}

int DiskSession::plate_count() const { return static_cast<int>(manifest_.at("plates").size()); }
double DiskSession::plate_depth(int i) const
{
    return manifest_.at("plates").at(static_cast<std::size_t>(i)).at("Z_nominal").get<double>();
}
int DiskSession::target_count() const { return static_cast<int>(manifest_.at("targets").size()); }
double DiskSession::Z_min() const { return manifest_.at("Z_min").get<double>(); }
double DiskSession::Z_max() const { return manifest_.at("Z_max").get<double>(); }

PlateCapture DiskSession::plate(int i) const
{
    const Json& p = manifest_.at("plates").at(static_cast<std::size_t>(i));
    PlateCapture c;
    c.Z_nominal = p.at("Z_nominal").get<double>();
    c.projector_width = p.at("projector")[0].get<int>();
    c.projector_height = p.at("projector")[1].get<int>();
    c.freqs = p.at("freqs").get<std::vector<int>>();
    c.steps = p.value("steps", std::vector<int>{});
    for (const auto& s : p.at("rows")) c.rows.push_back(load_stack(dir_, s, "session plate"));
    return c;
}

TargetCapture DiskSession::target(int i) const
{
    const Json& t = manifest_.at("targets").at(static_cast<std::size_t>(i));
    TargetCapture c;
    for (const auto& w : t.at("world_points")) c.world_points.push_back(vec3_from(w, "session target world point"));
    c.grid_cols = t.at("grid")[0].get<int>();
    c.grid_rows = t.at("grid")[1].get<int>();
    c.projector_width = t.at("projector")[0].get<int>();
    c.projector_height = t.at("projector")[1].get<int>();
    c.freqs = t.at("freqs").get<std::vector<int>>();
    c.steps = t.value("steps", std::vector<int>{});
    for (const auto& s : t.at("rows")) c.rows.push_back(load_stack(dir_, s, "session target"));
    for (const auto& s : t.at("cols")) c.cols.push_back(load_stack(dir_, s, "session target"));
    return c;
}

} // namespace pglf
