#include "infusion/cli.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <utility>

#include "CLI11.hpp"
#include "json.hpp"

#include "infusion/frac.hpp"
#include "infusion/lti.hpp"
#include "infusion/run_config.hpp"
#include "infusion/sim.hpp"
#include "infusion/svg_plot.hpp"
#include "infusion/tuning.hpp"

namespace infusion::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

class UsageError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

struct Invocation {
    std::string command;
    config::RunConfig cfg;
    std::vector<frac::FopidParams> params;
    std::string cls; // class name or "ALL"; empty means the config's class
    std::optional<double> gamma;
};

// Files are assembled in memory and written only once every computation has
// succeeded, so a failing run leaves no partial outputs.
using FileSet = std::vector<std::pair<std::string, std::string>>;

frac::FopidParams parse_params(const std::string& text) {
    std::vector<double> v;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t comma = std::min(text.find(',', pos), text.size());
        std::string item = text.substr(pos, comma - pos);
        const auto first = item.find_first_not_of(" \t");
        const auto last = item.find_last_not_of(" \t");
        item = first == std::string::npos ? "" : item.substr(first, last - first + 1);
        double x = 0.0;
        const auto [end, ec] = std::from_chars(item.data(), item.data() + item.size(), x);
        if (item.empty() || ec != std::errc() || end != item.data() + item.size() ||
            !std::isfinite(x)) {
            throw UsageError("--params expects numbers \"Kp,Ki,Kd[,lambda,mu]\", got '" + text + "'");
        }
        v.push_back(x);
        pos = comma + 1;
    }
    if (v.size() != 3 && v.size() != 5) {
        throw UsageError("--params needs 3 or 5 values, got " + std::to_string(v.size()));
    }
    frac::FopidParams p{v[0], v[1], v[2]};
    if (v.size() == 5) {
        p.lambda = v[3];
        p.mu = v[4];
    }
    if (p.kp < 0.0 || p.ki < 0.0 || p.kd < 0.0) {
        throw UsageError("controller gains must be nonnegative");
    }
    return p;
}

json params_to_json(const frac::FopidParams& p) {
    return json::array({p.kp, p.ki, p.kd, p.lambda, p.mu});
}

frac::FopidParams params_from_json(const json& a) {
    if (!a.is_array() || a.size() != 5) {
        throw UsageError("manifest params entries need 5 numbers");
    }
    for (const auto& x : a) {
        if (!x.is_number()) {
            throw UsageError("manifest params entries need 5 numbers");
        }
    }
    return {a[0].get<double>(), a[1].get<double>(), a[2].get<double>(), a[3].get<double>(),
            a[4].get<double>()};
}

std::string class_label(const frac::FopidParams& p) {
    for (frac::FopidClass c : frac::kAllClasses) {
        if (frac::validate_class(p, c)) {
            return std::string(frac::to_string(c));
        }
    }
    return "custom";
}

std::string svg(const plot::PlotSpec& spec, const std::vector<plot::Series>& series) {
    std::ostringstream os;
    plot::write_line_plot(os, spec, series);
    return os.str();
}

json manifest_for(const Invocation& inv) {
    json cfg = config::to_json(inv.cfg);
    cfg.erase("patient.model_file"); // organs travel inline under "patient"
    json args = json::object();
    if (!inv.params.empty()) {
        json list = json::array();
        for (const auto& p : inv.params) {
            list.push_back(params_to_json(p));
        }
        args["params"] = list;
    }
    if (!inv.cls.empty()) {
        args["class"] = inv.cls;
    }
    if (inv.gamma) {
        args["gamma"] = *inv.gamma;
    }
    return json{{"artifact_version", kArtifactVersion},
                {"command", inv.command},
                {"arguments", args},
                {"config", cfg},
                {"patient", patient::patient_to_json(inv.cfg.patient)},
                {"seed", inv.cfg.swarm.seed}};
}

Invocation invocation_from_manifest(const json& m) {
    if (!m.is_object() || !m.contains("artifact_version") || !m.contains("command") ||
        !m.contains("config") || !m.contains("patient") || !m.contains("seed")) {
        throw UsageError("manifest is missing required fields");
    }
    if (m["artifact_version"] != kArtifactVersion) {
        throw UsageError("manifest artifact version " + m["artifact_version"].dump() +
                         " differs from " + kArtifactVersion);
    }
    Invocation inv;
    inv.command = m["command"].get<std::string>();
    inv.cfg = config::parse_run_config(m["config"]);
    inv.cfg.patient = patient::patient_from_json(m["patient"]);
    if (!m["seed"].is_number_unsigned()) {
        throw UsageError("manifest seed must be a nonnegative integer");
    }
    inv.cfg.swarm.seed = m["seed"].get<std::uint64_t>();
    inv.cfg.validate();
    const json args = m.value("arguments", json::object());
    if (args.contains("params")) {
        for (const auto& p : args["params"]) {
            inv.params.push_back(params_from_json(p));
        }
    }
    if (args.contains("class")) {
        inv.cls = args["class"].get<std::string>();
    }
    if (args.contains("gamma")) {
        inv.gamma = args["gamma"].get<double>();
    }
    return inv;
}

FileSet run_simulate(const Invocation& inv) {
    if (inv.params.size() != 1) {
        throw UsageError("simulate needs exactly one --params");
    }
    const auto& cfg = inv.cfg;
    const auto patient = cfg.effective_patient();
    const auto controller = frac::build_fopid(inv.params[0], cfg.ora, cfg.sim.deriv_filter_nf);
    const auto trace = sim::simulate_closed_loop(controller, patient, cfg.sim);
    const auto metrics = sim::compute_metrics(trace, cfg.sim);

    FileSet files;
    std::ostringstream tr, me;
    sim::write_trace_csv(tr, trace);
    sim::write_metrics(me, metrics);
    files.emplace_back("trace.csv", tr.str());
    files.emplace_back("metrics.txt", me.str());
    files.emplace_back("patient.json", patient::patient_to_json(patient).dump(2) + "\n");
    files.emplace_back("tracking.svg",
                       svg({"Tracking", "time (min)", "effect", false, false},
                           {{"reference", trace.t, trace.r}, {"effect", trace.t, trace.y}}));
    files.emplace_back("effort.svg", svg({"Control effort", "time (min)", "infusion rate", false, false},
                                         {{"u", trace.t, trace.u}}));
    return files;
}

FileSet report_files(const tuning::TuningReport& report, bool per_class_convergence) {
    FileSet files;
    std::ostringstream csv, table;
    tuning::write_tuning_report_csv(csv, report);
    tuning::write_tuning_report_table(table, report);
    files.emplace_back("report.csv", csv.str());
    files.emplace_back("report.txt", table.str());

    std::vector<plot::Series> series;
    for (const auto& row : report.rows) {
        const std::string name(frac::to_string(row.cls));
        std::ostringstream conv;
        tuning::write_convergence_csv(conv, row.history);
        files.emplace_back(per_class_convergence ? "convergence_" + name + ".csv" : "convergence.csv",
                           conv.str());
        plot::Series s{name, {}, row.history};
        for (std::size_t i = 0; i < row.history.size(); ++i) {
            s.x.push_back(static_cast<double>(i));
        }
        series.push_back(std::move(s));
    }
    files.emplace_back("convergence.svg",
                       svg({"Convergence", "iteration", "best J", false, true}, series));
    return files;
}

FileSet run_tune(const Invocation& inv) {
    const std::string cls = inv.cls.empty() ? std::string(frac::to_string(inv.cfg.tuning_class)) : inv.cls;
    std::string upper;
    for (char c : cls) {
        upper += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    }
    if (upper == "ALL") {
        return report_files(tuning::compare_classes(inv.cfg.tuning_problem(inv.cfg.tuning_class)), true);
    }
    const auto problem = inv.cfg.tuning_problem(frac::parse_class(cls));
    const auto result = tuning::tune_controller(problem);
    tuning::TuningRow row{result.cls, result.params, result.j_min, result.history, std::nullopt};
    row.metrics = tuning::row_metrics(row, problem);
    tuning::TuningReport report;
    report.rows.push_back(std::move(row));
    return report_files(report, false);
}

FileSet run_sweep(const Invocation& inv) {
    if (inv.params.empty()) {
        throw UsageError("sweep needs at least one --params");
    }
    std::vector<tuning::LabelledController> controllers;
    for (const auto& p : inv.params) {
        std::string label = class_label(p);
        std::size_t dup = 0;
        for (const auto& c : controllers) {
            if (c.label == label || c.label.starts_with(label + "#")) {
                ++dup;
            }
        }
        if (dup > 0) {
            label += "#" + std::to_string(dup + 1);
        }
        controllers.push_back({label, p});
    }
    const auto& cfg = inv.cfg;
    const auto report = tuning::robustness_sweep(controllers, cfg.effective_patient(),
                                                 cfg.sweep_factors, cfg.sim, cfg.ora);
    FileSet files;
    std::ostringstream csv, table;
    tuning::write_robustness_csv(csv, report);
    tuning::write_robustness_table(table, report);
    files.emplace_back("robustness.csv", csv.str());
    files.emplace_back("robustness.txt", table.str());

    std::vector<plot::Series> drug, peak;
    for (const auto& c : controllers) {
        plot::Series d{c.label, {}, {}}, p{c.label, {}, {}};
        for (const auto& row : report.rows) {
            if (row.label == c.label && row.metrics) {
                d.x.push_back(row.factor);
                d.y.push_back(row.metrics->total_drug);
                p.x.push_back(row.factor);
                p.y.push_back(row.metrics->peak_u);
            }
        }
        drug.push_back(std::move(d));
        peak.push_back(std::move(p));
    }
    files.emplace_back("robustness_total_drug.svg",
                       svg({"Total drug vs brain dc factor", "factor", "total drug", false, false}, drug));
    files.emplace_back("robustness_peak_u.svg",
                       svg({"Peak infusion vs brain dc factor", "factor", "peak u", false, false}, peak));
    return files;
}

FileSet run_bode(const Invocation& inv) {
    if (!inv.gamma) {
        throw UsageError("bode needs --gamma");
    }
    const double gamma = *inv.gamma;
    const auto& ora = inv.cfg.ora;
    const auto tf = frac::ora_approximate(gamma, ora);
    const int ppd = inv.cfg.bode_points_per_decade;
    // Integer grid indices keep omega = 10^0 = 1 exact whenever it lies in band.
    const auto k_lo = static_cast<long>(std::ceil(std::log10(ora.omega_b) * ppd - 1e-9));
    const auto k_hi = static_cast<long>(std::floor(std::log10(ora.omega_h) * ppd + 1e-9));

    std::ostringstream csv;
    csv << "omega,magnitude,magnitude_db,phase_deg,ideal_magnitude_db,ideal_phase_deg\n";
    plot::Series mag{"ORA", {}, {}}, mag_ideal{"ideal", {}, {}};
    plot::Series ph{"ORA", {}, {}}, ph_ideal{"ideal", {}, {}};
    for (long k = k_lo; k <= k_hi; ++k) {
        const double omega = std::pow(10.0, static_cast<double>(k) / ppd);
        const auto fr = lti::frequency_response(tf, omega);
        const double db = 20.0 * std::log10(fr.magnitude);
        const double ideal_db = 20.0 * gamma * std::log10(omega);
        const double ideal_phase = 90.0 * gamma;
        csv << sim::format_double(omega) << ',' << sim::format_double(fr.magnitude) << ','
            << sim::format_double(db) << ',' << sim::format_double(fr.phase_deg) << ','
            << sim::format_double(ideal_db) << ',' << sim::format_double(ideal_phase) << '\n';
        mag.x.push_back(omega);
        mag.y.push_back(db);
        mag_ideal.x.push_back(omega);
        mag_ideal.y.push_back(ideal_db);
        ph.x.push_back(omega);
        ph.y.push_back(fr.phase_deg);
        ph_ideal.x.push_back(omega);
        ph_ideal.y.push_back(ideal_phase);
    }
    FileSet files;
    files.emplace_back("bode.csv", csv.str());
    files.emplace_back("bode_magnitude.svg",
                       svg({"ORA magnitude", "omega (rad/min)", "dB", true, false}, {mag, mag_ideal}));
    files.emplace_back("bode_phase.svg",
                       svg({"ORA phase", "omega (rad/min)", "deg", true, false}, {ph, ph_ideal}));
    return files;
}

FileSet execute(const Invocation& inv) {
    FileSet files;
    if (inv.command == "simulate") {
        files = run_simulate(inv);
    } else if (inv.command == "tune" || inv.command == "compare") {
        files = run_tune(inv);
    } else if (inv.command == "sweep") {
        files = run_sweep(inv);
    } else if (inv.command == "bode") {
        files = run_bode(inv);
    } else {
        throw UsageError("unknown command '" + inv.command + "'");
    }
    files.emplace_back("manifest.json", manifest_for(inv).dump(2) + "\n");
    return files;
}

void write_files(const fs::path& dir, const FileSet& files) {
    fs::create_directories(dir);
    for (const auto& [name, content] : files) {
        std::ofstream out(dir / name, std::ios::binary);
        out << content;
        if (!out) {
            throw std::runtime_error("cannot write " + (dir / name).string());
        }
    }
}

json read_json_file(const std::string& path, const char* what) {
    std::ifstream in(path);
    if (!in) {
        throw UsageError(std::string("cannot open ") + what + " '" + path + "'");
    }
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw UsageError(std::string("malformed ") + what + " '" + path + "': " + e.what());
    }
}

} // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Closed-loop anesthetic infusion: simulation, FOPID tuning, robustness and ORA checks",
                 "infusion"};
    app.require_subcommand(1);

    std::string config_path, out_dir, cls, manifest_path;
    std::vector<std::string> params;
    std::optional<std::uint64_t> seed;
    std::optional<double> gamma;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "flat JSON run configuration");
        sub->add_option("--out", out_dir, "output directory")->required();
        sub->add_option("--seed", seed, "overrides swarm.seed");
    };
    auto* simulate = app.add_subcommand("simulate", "simulate one controller on the configured patient");
    add_common(simulate);
    simulate->add_option("--params", params, "Kp,Ki,Kd[,lambda,mu]")->required()->expected(1);

    auto* tune = app.add_subcommand("tune", "tune one controller class (or ALL) by swarm search");
    add_common(tune);
    tune->add_option("--class", cls, "PID, FOPID1..FOPID4 or ALL");

    auto* compare = app.add_subcommand("compare", "tune every class and tabulate the results");
    add_common(compare);

    auto* sweep = app.add_subcommand("sweep", "rerun controllers across brain dc-gain factors");
    add_common(sweep);
    sweep->add_option("--params", params, "Kp,Ki,Kd[,lambda,mu]; repeat per controller")->required();

    auto* bode = app.add_subcommand("bode", "frequency response of the ORA of s^gamma");
    add_common(bode);
    bode->add_option("--gamma", gamma, "fractional exponent in (-1, 1)")->required();

    auto* replay = app.add_subcommand("replay", "re-run a command from its manifest");
    replay->add_option("--manifest", manifest_path, "manifest.json of an earlier run")->required();
    replay->add_option("--out", out_dir, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            app.exit(e, out, err);
            return kExitOk;
        }
        err << "error: " << e.what() << '\n';
        return kExitConfig;
    }

    FileSet files;
    try {
        Invocation inv;
        if (replay->parsed()) {
            inv = invocation_from_manifest(read_json_file(manifest_path, "manifest"));
        } else {
            CLI::App* sub = app.get_subcommands().front();
            inv.command = sub->get_name();
            inv.cfg = config_path.empty() ? config::RunConfig{} : config::load_run_config(config_path);
            if (seed) {
                inv.cfg.swarm.seed = *seed;
            }
            inv.cfg.validate();
            for (const auto& p : params) {
                inv.params.push_back(parse_params(p));
            }
            inv.cls = inv.command == "compare" ? "ALL" : cls;
            inv.gamma = gamma;
        }
        files = execute(inv);
    } catch (const sim::DivergenceError& e) {
        err << "error: closed loop diverged at t = " << e.time() << " min: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const tuning::TuningError& e) {
        err << "error: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const lti::DegenerateLoopError& e) {
        err << "error: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitNumeric;
    }

    try {
        write_files(out_dir, files);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfig;
    }
    for (const auto& f : files) {
        out << (fs::path(out_dir) / f.first).string() << '\n';
    }
    return kExitOk;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    std::vector<const char*> argv{"infusion"};
    for (const auto& a : args) {
        argv.push_back(a.c_str());
    }
    return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

} // namespace infusion::cli
