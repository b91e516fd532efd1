#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "infusion/lti.hpp"

// Fentanyl organ bank, Hill pharmacodynamics, and plant assembly.
namespace infusion::patient {

class PatientError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

enum class Organ {
    fat,
    lungs,
    gut_spleen,
    kidneys,
    liver,
    other_viscera,
    muscle,
    brain,
    nasal,
};

inline constexpr std::size_t kOrganCount = 9;
inline constexpr std::array<Organ, kOrganCount> kAllOrgans = {
    Organ::fat,    Organ::lungs,  Organ::gut_spleen, Organ::kidneys, Organ::liver,
    Organ::other_viscera, Organ::muscle, Organ::brain, Organ::nasal};

std::string_view to_string(Organ o);
Organ parse_organ(std::string_view name);

struct HillParams {
    double ec50 = 7.8;    // ng/ml
    double gamma_h = 4.3; // slope

    void validate() const;
};

enum class Topology { feedforward, recirculating };

std::string_view to_string(Topology t);
Topology parse_topology(std::string_view name);

/// Each organ TF maps arterial pool drug amount to outgoing concentration.
struct PatientModel {
    std::array<lti::TransferFunction, kOrganCount> organs;
    double shunt_gain = 0.0241;
    HillParams hill;
    Topology topology = Topology::feedforward;
    /// Conversion from controller output units (ug) to the organ models' drug
    /// amount units (ng).
    double infusion_scale = 1000.0;

    const lti::TransferFunction& organ(Organ o) const { return organs[static_cast<std::size_t>(o)]; }
    lti::TransferFunction& organ(Organ o) { return organs[static_cast<std::size_t>(o)]; }

    void validate() const;
};

/// 93 kg / 5.4 l/min patient.
PatientModel nominal_patient();

double hill_effect(double c_b, const HillParams& hill);
double hill_inverse(double effect, const HillParams& hill);

struct PerturbationSpec {
    Organ organ = Organ::brain;
    double dc_scale = 1.0;
};

/// Scales the named organ's numerator; poles are untouched.
PatientModel apply_dc_perturbation(const PatientModel& model, const PerturbationSpec& spec);

struct Observer {
    std::string name;
    lti::TransferFunction tf;
};

struct Plant {
    /// Organ-unit drug amount into the lungs -> brain outflow concentration.
    lti::TransferFunction control_path;
    /// Channels fed from the arterial pool (lungs output); reported only.
    std::vector<Observer> observers;
    Topology topology = Topology::feedforward;
    /// (sum of non-lung organ dc gains + shunt) * dc(lungs).
    double recirculation_loop_gain = 0.0;
    bool stable = true;
};

Plant assemble_plant(const PatientModel& model);

/// Flat key-value document: "<organ>.num"/"<organ>.den" coefficient arrays plus
/// scalar fields. Unknown keys are rejected on import.
nlohmann::json patient_to_json(const PatientModel& model);
PatientModel patient_from_json(const nlohmann::json& doc);

} // namespace infusion::patient
