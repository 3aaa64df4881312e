#include <cstdlib>
#include <iostream>

#include "CLI11.hpp"

#include "pglf/pipeline.hpp"

namespace {

enum Exit { kOk = 0, kOther = 1, kValidation = 2, kNumerical = 3, kIo = 4 };

struct Options {
    std::string config;
    std::string work_dir;
    int threads = -1;
    std::vector<std::string> sets;
    std::string run;
    std::string calibration;
    std::string capture;
    std::string session;
    bool no_cache = false;
    bool quiet = false;
};

pglf::PipelineConfig effective_config(const Options& o)
{
    pglf::Json base = pglf::default_config_json();
    if (const char* env = std::getenv("PGLF_WORKDIR"); env && *env) base["work_dir"] = env;
    pglf::Json j = pglf::load_config_json(o.config, {}, base);
    std::vector<std::string> sets = o.sets;
    if (!o.work_dir.empty()) j["work_dir"] = o.work_dir;
    if (o.threads >= 0) j["threads"] = o.threads;
    if (!o.run.empty()) j["run"] = o.run;
    if (!o.calibration.empty()) j["inputs"]["calibration"] = o.calibration;
    if (!o.capture.empty()) j["inputs"]["capture"] = o.capture;
    if (!o.session.empty()) j["inputs"]["session"] = o.session;
    if (o.no_cache) j["reconstruct"]["cache"] = false;
    for (const auto& s : sets) pglf::apply_override(j, s);
    return pglf::parse_config(j);
}

void add_common(CLI::App* cmd, Options& o)
{
    cmd->add_option("-c,--config", o.config, "JSON config file");
    cmd->add_option("-w,--work-dir", o.work_dir, "work directory (default $PGLF_WORKDIR or .)");
    cmd->add_option("-j,--threads", o.threads, "worker threads (0: OpenMP default)");
    cmd->add_option("-s,--set", o.sets, "override a config field, key.path=value")->take_all();
    cmd->add_option("--run", o.run, "run name under captures/ and runs/");
    cmd->add_flag("-q,--quiet", o.quiet, "no progress output");
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Phase-guided light field 3D reconstruction"};
    app.require_subcommand(1);
    Options o;

    auto* sim = app.add_subcommand("simulate", "render a scene capture or a calibration session");
    add_common(sim, o);
    bool session_kind = false;
    sim->add_flag("--session", session_kind, "render the calibration session instead of a scene");

    auto* cal = app.add_subcommand("calibrate", "calibrate from a session directory");
    add_common(cal, o);
    cal->add_option("--session-dir", o.session, "session directory (default <work>/session)");
    cal->add_option("--output", o.calibration, "calibration file (default <work>/calibration/calibration.json)");
    bool truth = false;
    cal->add_flag("--truth", truth, "write the simulator's ground-truth calibration");

    auto* rec = app.add_subcommand("reconstruct", "reconstruct one capture");
    add_common(rec, o);
    rec->add_option("--calibration", o.calibration, "calibration file");
    rec->add_option("--capture", o.capture, "capture directory");
    rec->add_flag("--no-cache", o.no_cache, "recompute every stage");

    auto* rep = app.add_subcommand("report", "tabulate the metrics of every run");
    add_common(rep, o);

    auto* cfg = app.add_subcommand("config", "print the effective config");
    add_common(cfg, o);

    CLI11_PARSE(app, argc, argv);

    const pglf::LogFn log = [&](const std::string& m) {
        if (!o.quiet) std::cerr << m << "\n";
    };
    try {
        if (session_kind) o.sets.insert(o.sets.begin(), "simulate.kind=\"session\"");
        if (truth) o.sets.insert(o.sets.begin(), "calibrate.mode=\"truth\"");
        const pglf::PipelineConfig c = effective_config(o);
        if (*sim) {
            pglf::cmd_simulate(c, log);
        } else if (*cal) {
            const auto r = pglf::cmd_calibrate(c, log);
            std::cout << r.calibration.string() << "\n";
        } else if (*rec) {
            const auto r = pglf::cmd_reconstruct(c, log);
            if (!r.cache_hits.empty()) {
                std::string hits;
                for (const auto& h : r.cache_hits) hits += " " + h;
                log("reconstruct: cached stages:" + hits);
            }
            std::cout << r.metrics.dump(2) << "\n";
        } else if (*rep) {
            std::cout << pglf::cmd_report(c.work_dir, log).summary;
        } else if (*cfg) {
            std::cout << pglf::to_json(c).dump(2) << "\n";
        }
        return kOk;
    } catch (const pglf::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kValidation;
    } catch (const pglf::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kNumerical;
    } catch (const pglf::IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return kIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kOther;
    }
}
