#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "infusion/frac.hpp"
#include "infusion/patient.hpp"
#include "infusion/pso.hpp"
#include "infusion/sim.hpp"
#include "infusion/tuning.hpp"

// Flat run configuration document. Every key is "<section>.<field>"; unknown
// keys are rejected and omitted keys take their defaults.
namespace infusion::config {

class RunConfigError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

struct RunConfig {
    sim::SimConfig sim;
    frac::OraConfig ora;
    pso::SwarmConfig swarm;
    frac::FopidClass tuning_class = frac::FopidClass::pid;
    pso::Bound gain_bounds{0.001, 10.0};
    double order_margin = 1e-3;
    std::size_t max_simulations = 1'000'000;
    patient::PatientModel patient = patient::nominal_patient();
    /// Path the organ coefficients were loaded from; informational once resolved.
    std::string patient_model_file;
    patient::PerturbationSpec perturbation;
    std::vector<double> sweep_factors{0.5, 1.0, 1.5};
    int bode_points_per_decade = 10;

    /// Patient with the configured perturbation applied.
    patient::PatientModel effective_patient() const;
    tuning::TuningProblem tuning_problem(frac::FopidClass cls) const;
    void validate() const;
};

/// Parses a flat document. Relative "patient.model_file" paths resolve
/// against base_dir.
RunConfig parse_run_config(const nlohmann::json& doc,
                           const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

/// Every resolved field, including defaults. Organ coefficients are not part
/// of this document; see patient::patient_to_json.
nlohmann::json to_json(const RunConfig& cfg);

/// Documented keys with their default values.
std::vector<std::string> known_keys();

} // namespace infusion::config
