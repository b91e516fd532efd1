#include "infusion/run_config.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <limits>

namespace infusion::config {

using nlohmann::json;

namespace {

double as_number(const json& v, const std::string& key) {
    if (!v.is_number()) {
        throw RunConfigError("'" + key + "' must be a number");
    }
    return v.get<double>();
}

std::uint64_t as_count(const json& v, const std::string& key) {
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
        throw RunConfigError("'" + key + "' must be a nonnegative integer");
    }
    return v.get<std::uint64_t>();
}

bool as_bool(const json& v, const std::string& key) {
    if (!v.is_boolean()) {
        throw RunConfigError("'" + key + "' must be true or false");
    }
    return v.get<bool>();
}

std::string as_string(const json& v, const std::string& key) {
    if (!v.is_string()) {
        throw RunConfigError("'" + key + "' must be a string");
    }
    return v.get<std::string>();
}

struct Field {
    std::string key;
    std::function<void(RunConfig&, const json&, const std::string&)> set;
    std::function<json(const RunConfig&)> get;
};

#define NUMBER_FIELD(KEY, MEMBER)                                                                \
    Field {                                                                                      \
        KEY, [](RunConfig& c, const json& v, const std::string& k) { c.MEMBER = as_number(v, k); }, \
            [](const RunConfig& c) { return json(c.MEMBER); }                                    \
    }

const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        NUMBER_FIELD("sim.t_end", sim.t_end),
        NUMBER_FIELD("sim.step_h", sim.step_h),
        NUMBER_FIELD("sim.setpoint_amplitude", sim.setpoint_amplitude),
        NUMBER_FIELD("sim.setpoint_time", sim.setpoint_time),
        NUMBER_FIELD("sim.w1", sim.w1),
        NUMBER_FIELD("sim.w2", sim.w2),
        NUMBER_FIELD("sim.deriv_filter_nf", sim.deriv_filter_nf),
        {"sim.clamp_nonnegative_u",
         [](RunConfig& c, const json& v, const std::string& k) { c.sim.clamp_nonnegative_u = as_bool(v, k); },
         [](const RunConfig& c) { return json(c.sim.clamp_nonnegative_u); }},
        {"sim.delta_u_mode",
         [](RunConfig& c, const json& v, const std::string& k) {
             c.sim.delta_u_mode = sim::parse_delta_u_mode(as_string(v, k));
         },
         [](const RunConfig& c) { return json(std::string(sim::to_string(c.sim.delta_u_mode))); }},
        {"sim.isdco_exclude_reference_steps",
         [](RunConfig& c, const json& v, const std::string& k) {
             c.sim.isdco_exclude_reference_steps = as_bool(v, k);
         },
         [](const RunConfig& c) { return json(c.sim.isdco_exclude_reference_steps); }},

        {"ora.order_n",
         [](RunConfig& c, const json& v, const std::string& k) {
             c.ora.order_n = static_cast<int>(as_count(v, k));
         },
         [](const RunConfig& c) { return json(c.ora.order_n); }},
        NUMBER_FIELD("ora.omega_b", ora.omega_b),
        NUMBER_FIELD("ora.omega_h", ora.omega_h),

        {"swarm.n_particles",
         [](RunConfig& c, const json& v, const std::string& k) { c.swarm.n_particles = as_count(v, k); },
         [](const RunConfig& c) { return json(c.swarm.n_particles); }},
        {"swarm.n_iterations",
         [](RunConfig& c, const json& v, const std::string& k) { c.swarm.n_iterations = as_count(v, k); },
         [](const RunConfig& c) { return json(c.swarm.n_iterations); }},
        NUMBER_FIELD("swarm.c1", swarm.c1),
        NUMBER_FIELD("swarm.c2", swarm.c2),
        NUMBER_FIELD("swarm.inertia_start", swarm.inertia_start),
        NUMBER_FIELD("swarm.inertia_end", swarm.inertia_end),
        {"swarm.seed",
         [](RunConfig& c, const json& v, const std::string& k) { c.swarm.seed = as_count(v, k); },
         [](const RunConfig& c) { return json(c.swarm.seed); }},
        NUMBER_FIELD("swarm.v_max_fraction", swarm.v_max_fraction),
        {"swarm.threads",
         [](RunConfig& c, const json& v, const std::string& k) {
             c.swarm.threads = static_cast<unsigned>(as_count(v, k));
         },
         [](const RunConfig& c) { return json(c.swarm.threads); }},

        {"tuning.class",
         [](RunConfig& c, const json& v, const std::string& k) {
             c.tuning_class = frac::parse_class(as_string(v, k));
         },
         [](const RunConfig& c) { return json(std::string(frac::to_string(c.tuning_class))); }},
        NUMBER_FIELD("tuning.gain_lo", gain_bounds.lo),
        NUMBER_FIELD("tuning.gain_hi", gain_bounds.hi),
        NUMBER_FIELD("tuning.order_margin", order_margin),
        {"tuning.max_simulations",
         [](RunConfig& c, const json& v, const std::string& k) { c.max_simulations = as_count(v, k); },
         [](const RunConfig& c) { return json(c.max_simulations); }},

        {"patient.topology",
         [](RunConfig& c, const json& v, const std::string& k) {
             c.patient.topology = patient::parse_topology(as_string(v, k));
         },
         [](const RunConfig& c) { return json(std::string(patient::to_string(c.patient.topology))); }},
        NUMBER_FIELD("patient.shunt_gain", patient.shunt_gain),
        NUMBER_FIELD("patient.hill_ec50", patient.hill.ec50),
        NUMBER_FIELD("patient.hill_gamma", patient.hill.gamma_h),
        NUMBER_FIELD("patient.infusion_scale", patient.infusion_scale),

        {"perturbation.organ",
         [](RunConfig& c, const json& v, const std::string& k) {
             c.perturbation.organ = patient::parse_organ(as_string(v, k));
         },
         [](const RunConfig& c) { return json(std::string(patient::to_string(c.perturbation.organ))); }},
        NUMBER_FIELD("perturbation.dc_scale", perturbation.dc_scale),

        {"sweep.factors",
         [](RunConfig& c, const json& v, const std::string& k) {
             if (!v.is_array() || v.empty()) {
                 throw RunConfigError("'" + k + "' must be a nonempty number array");
             }
             c.sweep_factors.clear();
             for (const auto& x : v) {
                 c.sweep_factors.push_back(as_number(x, k));
             }
         },
         [](const RunConfig& c) { return json(c.sweep_factors); }},
        {"bode.points_per_decade",
         [](RunConfig& c, const json& v, const std::string& k) {
             c.bode_points_per_decade = static_cast<int>(as_count(v, k));
         },
         [](const RunConfig& c) { return json(c.bode_points_per_decade); }},
    };
    return table;
}

#undef NUMBER_FIELD

constexpr const char* kModelFileKey = "patient.model_file";

} // namespace

patient::PatientModel RunConfig::effective_patient() const {
    return patient::apply_dc_perturbation(patient, perturbation);
}

tuning::TuningProblem RunConfig::tuning_problem(frac::FopidClass cls) const {
    tuning::TuningProblem p;
    p.cls = cls;
    p.gain_bounds = gain_bounds;
    p.order_margin = order_margin;
    p.sim = sim;
    p.ora = ora;
    p.swarm = swarm;
    p.patient = effective_patient();
    p.max_simulations = max_simulations;
    return p;
}

void RunConfig::validate() const {
    try {
        sim.validate();
        ora.validate();
        patient.validate();
        effective_patient();
        pso::SwarmConfig probe = swarm;
        probe.bounds = {gain_bounds};
        probe.validate();
        tuning_problem(tuning_class).validate();
    } catch (const std::invalid_argument& e) {
        throw RunConfigError(e.what());
    }
    if (!(gain_bounds.lo >= 0.0)) {
        throw RunConfigError("tuning.gain_lo must be nonnegative");
    }
    for (double f : sweep_factors) {
        if (!(f > 0.0)) {
            throw RunConfigError("sweep.factors entries must be positive");
        }
    }
    if (bode_points_per_decade < 1) {
        throw RunConfigError("bode.points_per_decade must be >= 1");
    }
}

RunConfig parse_run_config(const json& doc, const std::filesystem::path& base_dir) {
    if (!doc.is_object()) {
        throw RunConfigError("configuration must be a JSON object");
    }
    RunConfig cfg;
    const auto& table = fields();
    for (const auto& [key, value] : doc.items()) {
        if (key == kModelFileKey) {
            continue;
        }
        const bool known = std::any_of(table.begin(), table.end(),
                                       [&](const Field& f) { return f.key == key; });
        if (!known) {
            throw RunConfigError("unknown configuration key '" + key + "'");
        }
    }
    try {
        if (const auto it = doc.find(kModelFileKey); it != doc.end()) {
            std::filesystem::path p = as_string(*it, kModelFileKey);
            if (p.is_relative() && !base_dir.empty()) {
                p = base_dir / p;
            }
            std::ifstream in(p);
            if (!in) {
                throw RunConfigError("cannot open patient model file '" + p.string() + "'");
            }
            cfg.patient = patient::patient_from_json(json::parse(in));
            cfg.patient_model_file = it->get<std::string>();
        }
        for (const auto& f : table) {
            if (const auto it = doc.find(f.key); it != doc.end()) {
                f.set(cfg, *it, f.key);
            }
        }
    } catch (const RunConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw RunConfigError(e.what());
    }
    cfg.validate();
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw RunConfigError("cannot open configuration '" + path.string() + "'");
    }
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw RunConfigError("malformed configuration '" + path.string() + "': " + e.what());
    }
    return parse_run_config(doc, path.parent_path());
}

json to_json(const RunConfig& cfg) {
    json doc = json::object();
    for (const auto& f : fields()) {
        doc[f.key] = f.get(cfg);
    }
    if (!cfg.patient_model_file.empty()) {
        doc[kModelFileKey] = cfg.patient_model_file;
    }
    return doc;
}

std::vector<std::string> known_keys() {
    std::vector<std::string> keys;
    for (const auto& f : fields()) {
        keys.push_back(f.key);
    }
    keys.emplace_back(kModelFileKey);
    return keys;
}

} // namespace infusion::config
