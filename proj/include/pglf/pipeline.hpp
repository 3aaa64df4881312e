#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "pglf/serialization.hpp"

namespace pglf {

enum class SimulateKind { Scene, Session };
enum class CalibrationMode { Session, Truth };
enum class DepthModel { Dcm, Linear };

/// Every tunable of the batch front-end. Built from JSON by parse_config,
/// which rejects unknown keys and out-of-range values before any compute.
struct PipelineConfig {
    static constexpr int kSchemaVersion = 1;

    std::filesystem::path work_dir = ".";
    int threads = 0; ///< 0 keeps the OpenMP default

    SystemSpec system;
    FringeConfig fringe;
    PsadConfig psad;
    double Z_min = 360;
    double Z_max = 450;
    FilterConfig filter;
    RefocusConfig refocus;
    double virtual_depth = 3.0;
    double modulation_threshold = kDefaultModulationThreshold;

    struct Simulate {
        SimulateKind kind = SimulateKind::Scene;
        Json scene = "plate@400mm";
        NoiseSpec noise;
        Json aberration = Json::object(); ///< DcmParams fields; empty means aberration free
        bool ledger = true;
    } simulate;

    Json session = Json::object(); ///< SessionSpec overrides

    struct Calibrate {
        CalibrationMode mode = CalibrationMode::Session;
        int max_targets = 2000;
        int max_iterations = 200;
    } calibrate;

    struct Reconstruct {
        DepthModel model = DepthModel::Dcm;
        bool cache = true;
    } reconstruct;

    std::string run = "default";
    struct Inputs {
        std::filesystem::path capture;     ///< default work_dir/captures/<run>
        std::filesystem::path calibration; ///< default work_dir/calibration/calibration.json
        std::filesystem::path session;     ///< default work_dir/session
    } inputs;

    std::filesystem::path capture_dir() const;
    std::filesystem::path calibration_file() const;
    std::filesystem::path session_dir() const;
    std::filesystem::path run_dir() const;
};

Json default_config_json();
PipelineConfig parse_config(const Json& j);
Json to_json(const PipelineConfig& c);

/// "a.b.c=value": value is parsed as JSON, otherwise taken as a string.
void apply_override(Json& config, const std::string& assignment);

/// Merges a config file (if path is non-empty) over `base`, then applies overrides.
Json load_config_json(const std::filesystem::path& path, const std::vector<std::string>& overrides,
                      Json base = default_config_json());

using LogFn = std::function<void(const std::string&)>;

struct SimulateOutput {
    std::filesystem::path dir;
    std::vector<std::filesystem::path> files;
};
SimulateOutput cmd_simulate(const PipelineConfig& cfg, const LogFn& log = {});

struct CalibrateOutput {
    std::filesystem::path calibration;
    CalibrationDocument document;
};
CalibrateOutput cmd_calibrate(const PipelineConfig& cfg, const LogFn& log = {});

struct ReconstructOutput {
    std::filesystem::path dir;
    Json metrics;
    std::vector<std::string> cache_hits; ///< stages served from the cache
};
ReconstructOutput cmd_reconstruct(const PipelineConfig& cfg, const LogFn& log = {});

struct ReportOutput {
    std::string summary;
    std::string csv;
    int rows = 0;
};
/// Aggregates runs/*/metrics.json below the work dir.
ReportOutput cmd_report(const std::filesystem::path& work_dir, const LogFn& log = {});

} // namespace pglf
