#include "infusion/patient.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace infusion::patient {

using lti::Polynomial;
using lti::TransferFunction;

std::string_view to_string(Organ o) {
    switch (o) {
    case Organ::fat:
        return "fat";
    case Organ::lungs:
        return "lungs";
    case Organ::gut_spleen:
        return "gut_spleen";
    case Organ::kidneys:
        return "kidneys";
    case Organ::liver:
        return "liver";
    case Organ::other_viscera:
        return "other_viscera";
    case Organ::muscle:
        return "muscle";
    case Organ::brain:
        return "brain";
    case Organ::nasal:
        return "nasal";
    }
    return "?";
}

Organ parse_organ(std::string_view name) {
    for (Organ o : kAllOrgans) {
        if (name == to_string(o)) {
            return o;
        }
    }
    throw PatientError("unknown organ '" + std::string(name) + "'");
}

std::string_view to_string(Topology t) {
    return t == Topology::feedforward ? "feedforward" : "recirculating";
}

Topology parse_topology(std::string_view name) {
    if (name == "feedforward") {
        return Topology::feedforward;
    }
    if (name == "recirculating") {
        return Topology::recirculating;
    }
    throw PatientError("unknown topology '" + std::string(name) + "'");
}

void HillParams::validate() const {
    if (!(ec50 > 0.0) || !(gamma_h > 0.0)) {
        throw PatientError("Hill parameters must be positive");
    }
}

void PatientModel::validate() const {
    hill.validate();
    if (!(shunt_gain >= 0.0)) {
        throw PatientError("shunt gain must be nonnegative");
    }
    if (!(infusion_scale > 0.0)) {
        throw PatientError("infusion scale must be positive");
    }
    for (Organ o : kAllOrgans) {
        if (!organ(o).is_strictly_proper()) {
            throw PatientError("organ model '" + std::string(to_string(o)) +
                               "' must be strictly proper");
        }
    }
}

PatientModel nominal_patient() {
    PatientModel m;
    m.organ(Organ::fat) = {Polynomial{-1.437e-8, 1.722e-6}, Polynomial{1.0, 0.4126, 0.0003241}};
    m.organ(Organ::lungs) = {Polynomial{64.78}, Polynomial{1.0, 4.17, 6.97}};
    m.organ(Organ::gut_spleen) = {Polynomial{-1.34e-5, 0.001604}, Polynomial{1.0, 0.9059, 0.09356}};
    m.organ(Organ::kidneys) = {Polynomial{0.0132}, Polynomial{1.0, 0.7436}};
    m.organ(Organ::liver) = {Polynomial{0.006243}, Polynomial{1.0, 0.04257}};
    m.organ(Organ::other_viscera) = {Polynomial{0.001725}, Polynomial{1.0, 0.09009}};
    m.organ(Organ::muscle) = {Polynomial{-2.764e-7, 3.312e-5}, Polynomial{1.0, 0.4152, 0.001867}};
    m.organ(Organ::brain) = {Polynomial{1.614e-5}, Polynomial{1.0, 0.1533}};
    m.organ(Organ::nasal) = {Polynomial{5.459e-6}, Polynomial{1.0, 0.08507}};
    m.shunt_gain = 0.0241;
    return m;
}

double hill_effect(double c_b, const HillParams& hill) {
    if (!(c_b >= 0.0)) {
        throw PatientError("concentration must be nonnegative");
    }
    if (c_b == 0.0) {
        return 0.0;
    }
    // 1/(1 + (EC50/C)^g) is the stable form; clamp keeps the codomain [0, 1)
    const double effect = 1.0 / (1.0 + std::pow(hill.ec50 / c_b, hill.gamma_h));
    return std::min(effect, std::nextafter(1.0, 0.0));
}

double hill_inverse(double effect, const HillParams& hill) {
    if (!(effect >= 0.0)) {
        throw PatientError("effect must be nonnegative");
    }
    if (!(effect < 1.0)) {
        throw PatientError("effect >= 1 is unreachable");
    }
    return hill.ec50 * std::pow(effect / (1.0 - effect), 1.0 / hill.gamma_h);
}

PatientModel apply_dc_perturbation(const PatientModel& model, const PerturbationSpec& spec) {
    if (!(spec.dc_scale > 0.0)) {
        throw PatientError("dc scale must be positive");
    }
    PatientModel out = model;
    const TransferFunction& tf = model.organ(spec.organ);
    out.organ(spec.organ) = {tf.num().scaled(spec.dc_scale), tf.den()};
    return out;
}

Plant assemble_plant(const PatientModel& model) {
    model.validate();
    Plant plant;
    plant.topology = model.topology;

    const TransferFunction& lungs = model.organ(Organ::lungs);
    const TransferFunction& brain = model.organ(Organ::brain);
    const double lungs_dc = lti::tf_dc_gain(lungs);

    TransferFunction venous = TransferFunction::gain(model.shunt_gain);
    double venous_dc = model.shunt_gain;
    for (Organ o : kAllOrgans) {
        if (o == Organ::lungs) {
            continue;
        }
        venous = lti::tf_parallel(venous, model.organ(o));
        venous_dc += lti::tf_dc_gain(model.organ(o));
        if (o != Organ::brain) {
            plant.observers.push_back({std::string(to_string(o)), model.organ(o)});
        }
    }
    plant.observers.push_back({"shunt", TransferFunction::gain(model.shunt_gain)});
    plant.recirculation_loop_gain = venous_dc * lungs_dc;

    if (model.topology == Topology::feedforward) {
        plant.control_path = lti::tf_series(lungs, brain);
    } else {
        // venous return adds to the infusion at the lungs input
        const TransferFunction negated{venous.num().scaled(-1.0), venous.den()};
        plant.control_path = lti::tf_series(lti::tf_feedback(lungs, negated), brain);
    }
    plant.stable = lti::is_hurwitz(plant.control_path.den());
    return plant;
}

nlohmann::json patient_to_json(const PatientModel& model) {
    nlohmann::json doc = nlohmann::json::object();
    for (Organ o : kAllOrgans) {
        const std::string name(to_string(o));
        doc[name + ".num"] = model.organ(o).num().coefficients();
        doc[name + ".den"] = model.organ(o).den().coefficients();
    }
    doc["shunt_gain"] = model.shunt_gain;
    doc["hill.ec50"] = model.hill.ec50;
    doc["hill.gamma"] = model.hill.gamma_h;
    doc["topology"] = std::string(to_string(model.topology));
    doc["infusion_scale"] = model.infusion_scale;
    return doc;
}

namespace {

std::vector<double> coefficient_array(const nlohmann::json& doc, const std::string& key) {
    const auto it = doc.find(key);
    if (it == doc.end()) {
        throw PatientError("patient document is missing '" + key + "'");
    }
    if (!it->is_array() || it->empty()) {
        throw PatientError("'" + key + "' must be a nonempty number array");
    }
    std::vector<double> out;
    for (const auto& v : *it) {
        if (!v.is_number()) {
            throw PatientError("'" + key + "' must contain numbers only");
        }
        out.push_back(v.get<double>());
    }
    return out;
}

double number_field(const nlohmann::json& doc, const std::string& key, double fallback) {
    const auto it = doc.find(key);
    if (it == doc.end()) {
        return fallback;
    }
    if (!it->is_number()) {
        throw PatientError("'" + key + "' must be a number");
    }
    return it->get<double>();
}

} // namespace

PatientModel patient_from_json(const nlohmann::json& doc) {
    if (!doc.is_object()) {
        throw PatientError("patient document must be an object");
    }
    std::set<std::string> known = {"shunt_gain", "hill.ec50", "hill.gamma", "topology",
                                   "infusion_scale"};
    PatientModel m = nominal_patient();
    for (Organ o : kAllOrgans) {
        const std::string name(to_string(o));
        known.insert(name + ".num");
        known.insert(name + ".den");
        try {
            m.organ(o) = {Polynomial(coefficient_array(doc, name + ".num")),
                          Polynomial(coefficient_array(doc, name + ".den"))};
        } catch (const lti::LtiError& e) {
            throw PatientError("organ '" + name + "': " + e.what());
        }
    }
    for (const auto& [key, value] : doc.items()) {
        if (!known.contains(key)) {
            throw PatientError("unknown patient key '" + key + "'");
        }
    }
    m.shunt_gain = number_field(doc, "shunt_gain", m.shunt_gain);
    m.hill.ec50 = number_field(doc, "hill.ec50", m.hill.ec50);
    m.hill.gamma_h = number_field(doc, "hill.gamma", m.hill.gamma_h);
    m.infusion_scale = number_field(doc, "infusion_scale", m.infusion_scale);
    if (const auto it = doc.find("topology"); it != doc.end()) {
        if (!it->is_string()) {
            throw PatientError("'topology' must be a string");
        }
        m.topology = parse_topology(it->get<std::string>());
    }
    m.validate();
    return m;
}

} // namespace infusion::patient
