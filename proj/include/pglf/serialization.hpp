#pragma once

#include <filesystem>
#include <initializer_list>
#include <memory>
#include <string>

#include "json.hpp"

#include "pglf/calibration.hpp"
#include "pglf/dcm.hpp"
#include "pglf/geometry.hpp"
#include "pglf/lightfield.hpp"
#include "pglf/matching.hpp"
#include "pglf/reconstruct.hpp"
#include "pglf/simulator.hpp"

namespace pglf {

using Json = nlohmann::json;

/// Throws ValidationError naming `where` if `j` is not an object or has keys outside `allowed`.
void check_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where);

Json to_json(const PlenopticIntrinsics& intr);
PlenopticIntrinsics intrinsics_from_json(const Json& j);

Json to_json(const DcmParams& p);
/// Missing fields default to the linear model of `intr`.
DcmParams dcm_from_json(const Json& j, const PlenopticIntrinsics& intr);

Json to_json(const ProjectionMatrix& m);
ProjectionMatrix projection_from_json(const Json& j, Device role);

Json to_json(const SystemSpec& s);
SystemSpec system_from_json(const Json& j);

Json to_json(const NoiseSpec& n);
NoiseSpec noise_from_json(const Json& j);

Json to_json(const FringeConfig& f);
/// Projector size comes from the system; only f, N and orientation are read.
FringeConfig fringe_from_json(const Json& j, const ProjectorSpec& projector);

Json to_json(const PsadConfig& c);
PsadConfig psad_from_json(const Json& j);
Json to_json(const FilterConfig& c);
FilterConfig filter_from_json(const Json& j);
Json to_json(const RefocusConfig& c);
RefocusConfig refocus_from_json(const Json& j);

/// {"preset": name, "Z": depth} or {"type": "plane", "center": [..], "tilt_x": .., "tilt_y": ..}.
std::unique_ptr<Scene> scene_from_json(const Json& j, const FieldOfView& fov);

SessionSpec session_from_json(const Json& j, const FieldOfView& fov);
Json to_json(const SessionSpec& s);

/// Everything reconstruction needs from calibration.
struct CalibrationDocument {
    static constexpr int kSchemaVersion = 1;
    PlenopticIntrinsics intr;
    LensletLayout layout = LensletLayout::Hexagonal;
    std::vector<Vec2> centers;
    DcmParams dcm;
    ProjectionMatrix mc;
    ProjectionMatrix mp;
    double v_w = 3.0;
    int projector_width = 912;
    int projector_height = 1140;
    Json report = Json::object();

    LensletGrid grid() const;
    VirtualCamera vcam() const;
};

Json to_json(const CalibrationDocument& doc);
CalibrationDocument calibration_from_json(const Json& j);
void save_calibration(const std::filesystem::path& path, const CalibrationDocument& doc);
CalibrationDocument load_calibration(const std::filesystem::path& path);

/// Writes every capture of a calibration source below dir (PFM stacks + manifest.json).
void write_session(const std::filesystem::path& dir, const CalibrationSource& source);

/// Calibration source read back from write_session output.
class DiskSession : public CalibrationSource {
public:
    explicit DiskSession(std::filesystem::path dir);
    int plate_count() const override;
    PlateCapture plate(int i) const override;
    double plate_depth(int i) const override;
    int target_count() const override;
    TargetCapture target(int i) const override;
    double Z_min() const override;
    double Z_max() const override;

private:
    std::filesystem::path dir_;
    Json manifest_;
};

} // namespace pglf
