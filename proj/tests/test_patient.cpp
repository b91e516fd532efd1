#include "doctest.h"

#include <cmath>

#include "infusion/lti.hpp"
#include "infusion/patient.hpp"

using namespace infusion;
using patient::Organ;

TEST_CASE("nominal organ coefficients") {
    const auto m = patient::nominal_patient();
    CHECK(m.organ(Organ::brain).den().coefficients() == std::vector<double>{1.0, 0.1533});
    CHECK(m.organ(Organ::lungs).den().coefficients() == std::vector<double>{1.0, 4.17, 6.97});
    CHECK(m.shunt_gain == 0.0241);
    CHECK(lti::tf_dc_gain(m.organ(Organ::brain)) == doctest::Approx(1.0528e-4).epsilon(1e-4));
    CHECK(lti::tf_dc_gain(m.organ(Organ::lungs)) == doctest::Approx(9.2941).epsilon(1e-4));
    for (const auto& tf : m.organs) {
        CHECK(tf.is_strictly_proper());
        CHECK(lti::is_hurwitz(tf.den()));
    }
    CHECK_NOTHROW(m.validate());
}

TEST_CASE("Hill effect") {
    const patient::HillParams h;
    CHECK(patient::hill_effect(7.8, h) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(patient::hill_effect(0.0, h) == 0.0);
    CHECK(patient::hill_effect(15.6, h) == doctest::Approx(std::pow(2.0, 4.3) / (1.0 + std::pow(2.0, 4.3))));
    CHECK(patient::hill_effect(15.6, h) == doctest::Approx(0.9517).epsilon(1e-4));
    CHECK(patient::hill_effect(3.9, h) == doctest::Approx(0.0483).epsilon(1e-3));
    CHECK(patient::hill_effect(1e12, h) < 1.0);
    CHECK_THROWS_AS(patient::hill_effect(-1.0, h), patient::PatientError);

    double prev = 0.0;
    for (int i = 1; i <= 200; ++i) {
        const double e = patient::hill_effect(0.2 * i, h);
        CHECK(e > prev);
        CHECK(e < 1.0);
        prev = e;
    }
}

TEST_CASE("Hill inverse") {
    const patient::HillParams h;
    CHECK(patient::hill_inverse(0.5, h) == doctest::Approx(7.8).epsilon(1e-14));
    CHECK(patient::hill_inverse(0.0, h) == 0.0);
    CHECK(patient::hill_inverse(0.9517, h) == doctest::Approx(15.6).epsilon(1e-3));
    CHECK_THROWS_AS(patient::hill_inverse(1.0, h), patient::PatientError);
    CHECK_THROWS_AS(patient::hill_inverse(-0.1, h), patient::PatientError);
    for (int i = 1; i <= 100; ++i) {
        const double e = 0.0099 * i;
        CHECK(std::abs(patient::hill_effect(patient::hill_inverse(e, h), h) - e) < 1e-12);
    }
}

TEST_CASE("dc perturbation") {
    const auto m = patient::nominal_patient();
    const auto up = patient::apply_dc_perturbation(m, {Organ::brain, 1.5});
    CHECK(lti::tf_dc_gain(up.organ(Organ::brain)) == doctest::Approx(1.5792e-4).epsilon(1e-4));
    CHECK(up.organ(Organ::brain).den() == m.organ(Organ::brain).den());
    const auto down = patient::apply_dc_perturbation(m, {Organ::brain, 0.5});
    CHECK(lti::tf_dc_gain(down.organ(Organ::brain)) == doctest::Approx(5.264e-5).epsilon(1e-4));
    const auto same = patient::apply_dc_perturbation(m, {Organ::brain, 1.0});
    CHECK(same.organs == m.organs);
    for (Organ o : patient::kAllOrgans) {
        if (o != Organ::brain) {
            CHECK(up.organ(o) == m.organ(o));
        }
    }
    const auto twice = patient::apply_dc_perturbation(
        patient::apply_dc_perturbation(m, {Organ::liver, 2.0}), {Organ::liver, 0.25});
    CHECK(lti::tf_dc_gain(twice.organ(Organ::liver)) ==
          doctest::Approx(0.5 * lti::tf_dc_gain(m.organ(Organ::liver))).epsilon(1e-12));
    CHECK_THROWS_AS(patient::apply_dc_perturbation(m, {Organ::brain, 0.0}), patient::PatientError);
}

TEST_CASE("feedforward plant") {
    const auto plant = patient::assemble_plant(patient::nominal_patient());
    CHECK(lti::tf_dc_gain(plant.control_path) == doctest::Approx(9.2941 * 1.0528e-4).epsilon(2e-4));
    CHECK(lti::tf_dc_gain(plant.control_path) == doctest::Approx(9.785e-4).epsilon(1e-3));
    CHECK(plant.observers.size() == 8);
    CHECK(plant.observers.back().name == "shunt");
    CHECK(plant.stable);
    for (const auto& o : plant.observers) {
        CHECK(o.name != "lungs");
        CHECK(o.name != "brain");
    }
}

TEST_CASE("recirculating plant") {
    auto m = patient::nominal_patient();
    m.topology = patient::Topology::recirculating;
    const auto plant = patient::assemble_plant(m);
    double venous = m.shunt_gain;
    for (Organ o : patient::kAllOrgans) {
        if (o != Organ::lungs) {
            venous += lti::tf_dc_gain(m.organ(o));
        }
    }
    const double expected = venous * lti::tf_dc_gain(m.organ(Organ::lungs));
    CHECK(plant.recirculation_loop_gain == doctest::Approx(expected).epsilon(1e-12));
    CHECK(plant.recirculation_loop_gain == doctest::Approx(2.305).epsilon(1e-3));
    CHECK_FALSE(plant.stable);
}

TEST_CASE("patient document round trip") {
    auto m = patient::apply_dc_perturbation(patient::nominal_patient(), {Organ::brain, 1.5});
    m.topology = patient::Topology::recirculating;
    m.hill.ec50 = 6.5;
    const auto doc = patient::patient_to_json(m);
    CHECK(doc.contains("brain.num"));
    CHECK(doc.contains("gut_spleen.den"));
    const auto back = patient::patient_from_json(doc);
    CHECK(back.organs == m.organs);
    CHECK(back.shunt_gain == m.shunt_gain);
    CHECK(back.hill.ec50 == m.hill.ec50);
    CHECK(back.hill.gamma_h == m.hill.gamma_h);
    CHECK(back.topology == m.topology);
    CHECK(back.infusion_scale == m.infusion_scale);

    auto extra = doc;
    extra["spleen.num"] = {1.0};
    CHECK_THROWS_AS(patient::patient_from_json(extra), patient::PatientError);
    auto missing = doc;
    missing.erase("fat.den");
    CHECK_THROWS_AS(patient::patient_from_json(missing), patient::PatientError);
    auto biproper = doc;
    biproper["kidneys.num"] = {1.0, 0.0};
    CHECK_THROWS_AS(patient::patient_from_json(biproper), patient::PatientError);
}

TEST_CASE("organ and topology names") {
    for (Organ o : patient::kAllOrgans) {
        CHECK(patient::parse_organ(patient::to_string(o)) == o);
    }
    CHECK_THROWS_AS(patient::parse_organ("heart"), patient::PatientError);
    CHECK(patient::parse_topology("recirculating") == patient::Topology::recirculating);
}
