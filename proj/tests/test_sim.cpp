#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "infusion/frac.hpp"
#include "infusion/patient.hpp"
#include "infusion/sim.hpp"

using namespace infusion;
using lti::TransferFunction;

namespace {

const frac::FopidParams ref_pid{3.8243, 8.6647, 0.001};
const frac::FopidParams ref_fopid1{0.0212, 2.3014, 0.0783, 0.8301, 0.1013};

sim::SimulationTrace grid_trace(double t_end, double h) {
    sim::SimulationTrace tr;
    tr.step_h = h;
    const auto n = static_cast<std::size_t>(std::llround(t_end / h)) + 1;
    for (std::size_t k = 0; k < n; ++k) {
        tr.t.push_back(static_cast<double>(k) * h);
    }
    tr.r.assign(n, 0.0);
    tr.e.assign(n, 0.0);
    tr.u.assign(n, 0.0);
    tr.delta_u.assign(n, 0.0);
    tr.c_b.assign(n, 0.0);
    tr.y.assign(n, 0.0);
    return tr;
}

void fill_delta(sim::SimulationTrace& tr) {
    for (std::size_t k = 1; k < tr.size(); ++k) {
        tr.delta_u[k] = (tr.u[k] - tr.u[k - 1]) / tr.step_h;
    }
}

sim::SimulationTrace run(const frac::FopidParams& p, const sim::SimConfig& cfg = {},
                         const patient::PatientModel& m = patient::nominal_patient()) {
    return sim::simulate_closed_loop(frac::build_fopid(p, {}, cfg.deriv_filter_nf), m, cfg);
}

} // namespace

TEST_CASE("configuration validation") {
    sim::SimConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    CHECK(cfg.steps() == 10000);
    cfg.t_end = 1.0;
    CHECK_THROWS_AS(cfg.validate(), sim::ConfigError);
    cfg = {};
    cfg.step_h = 0.0;
    CHECK_THROWS_AS(cfg.validate(), sim::ConfigError);
    cfg = {};
    cfg.setpoint_amplitude = 1.0;
    CHECK_THROWS_AS(cfg.validate(), sim::ConfigError);
    cfg = {};
    cfg.w1 = -1.0;
    CHECK_THROWS_AS(cfg.validate(), sim::ConfigError);
    CHECK(sim::parse_delta_u_mode("raw") == sim::DeltaUMode::raw);
    CHECK_THROWS_AS(sim::parse_delta_u_mode("fast"), sim::ConfigError);
}

TEST_CASE("zero controller leaves the patient untouched") {
    const auto tr = sim::simulate_closed_loop(TransferFunction::gain(0.0), patient::nominal_patient(), {});
    CHECK(tr.size() == 10001);
    for (std::size_t k = 0; k < tr.size(); ++k) {
        CHECK(tr.u[k] == 0.0);
        CHECK(tr.y[k] == 0.0);
        CHECK(tr.e[k] == tr.r[k]);
    }
    CHECK(tr.r.front() == 0.0);
    CHECK(tr.r.back() == 0.5);
}

TEST_CASE("zero reference keeps every signal at rest") {
    sim::SimConfig cfg;
    cfg.setpoint_amplitude = 0.0;
    const auto tr = run(ref_pid, cfg);
    for (const auto* sig : {&tr.r, &tr.e, &tr.u, &tr.delta_u, &tr.c_b, &tr.y}) {
        CHECK(std::all_of(sig->begin(), sig->end(), [](double v) { return v == 0.0; }));
    }
    for (const auto& obs : tr.observers) {
        CHECK(std::all_of(obs.begin(), obs.end(), [](double v) { return v == 0.0; }));
    }
}

TEST_CASE("reference step lands on the configured time") {
    const auto tr = run(ref_pid);
    const auto first = std::find(tr.r.begin(), tr.r.end(), 0.5) - tr.r.begin();
    CHECK(tr.t[static_cast<std::size_t>(first)] == doctest::Approx(1.0));
    CHECK(tr.r[static_cast<std::size_t>(first) - 1] == 0.0);
}

TEST_CASE("closed loop invariants") {
    for (const auto& p : {ref_pid, ref_fopid1}) {
        const auto tr = run(p);
        CHECK_NOTHROW(tr.validate());
        CHECK(tr.observer_names.size() == 8);
        for (std::size_t k = 0; k < tr.size(); ++k) {
            CHECK(tr.u[k] >= 0.0);
            CHECK(tr.y[k] >= 0.0);
            CHECK(tr.y[k] < 1.0);
            CHECK(tr.e[k] == tr.r[k] - tr.y[k]);
        }
    }
}

TEST_CASE("simulation is deterministic and observers are passive") {
    const auto a = run(ref_fopid1);
    const auto b = run(ref_fopid1);
    CHECK(a.u == b.u);
    CHECK(a.y == b.y);
    CHECK(a.observers == b.observers);
    const auto quiet = sim::simulate_closed_loop(frac::build_fopid(ref_fopid1, {}),
                                                 patient::nominal_patient(), {}, {.record_observers = false});
    CHECK(quiet.observers.empty());
    CHECK(quiet.u == a.u);
    CHECK(quiet.y == a.y);
    CHECK(quiet.c_b == a.c_b);
}

TEST_CASE("clamping keeps the infusion nonnegative") {
    // A negative gain asks for withdrawal as soon as the reference steps up.
    const auto negative = TransferFunction::gain(-1.0);
    sim::SimConfig cfg;
    const auto clamped = sim::simulate_closed_loop(negative, patient::nominal_patient(), cfg);
    CHECK(*std::min_element(clamped.u.begin(), clamped.u.end()) == 0.0);
    cfg.clamp_nonnegative_u = false;
    const auto raw = sim::simulate_closed_loop(negative, patient::nominal_patient(), cfg);
    CHECK(*std::min_element(raw.u.begin(), raw.u.end()) < 0.0);
    // negative drug amounts give negative concentration, which the effect map floors at zero
    CHECK(*std::min_element(raw.y.begin(), raw.y.end()) == 0.0);
}

TEST_CASE("unstable controller raises divergence") {
    const TransferFunction unstable({1.0}, {1.0, -1.0});
    try {
        sim::simulate_closed_loop(unstable, patient::nominal_patient(), {});
        FAIL("expected divergence");
    } catch (const sim::DivergenceError& e) {
        CHECK(e.time() > 1.0);
        CHECK(e.time() < 50.0);
    }
}

TEST_CASE("reference PID baseline settles near the setpoint") {
    const auto tr = run(ref_pid);
    CHECK_NOTHROW(tr.validate());
    CHECK(std::abs(tr.e.back()) < 0.02);
}

TEST_CASE("cost oracles") {
    SUBCASE("zero trace") {
        const auto tr = grid_trace(10.0, 0.01);
        CHECK(sim::evaluate_cost(tr, 1.0, 1.0).j == 0.0);
    }
    SUBCASE("constant infusion, no error") {
        auto tr = grid_trace(10.0, 0.01);
        std::fill(tr.u.begin(), tr.u.end(), 3.0);
        fill_delta(tr);
        CHECK(sim::evaluate_cost(tr, 1.0, 1.0).j == 0.0);
    }
    SUBCASE("time-weighted squared exponential error") {
        auto tr = grid_trace(20.0, 0.001);
        for (std::size_t k = 0; k < tr.size(); ++k) {
            tr.e[k] = std::exp(-tr.t[k]);
        }
        const auto c = sim::evaluate_cost(tr, 1.0, 0.0);
        CHECK(c.j == doctest::Approx(0.25).epsilon(1e-3));
        CHECK(c.isdco == 0.0);
    }
    SUBCASE("unit-rate ramp") {
        auto tr = grid_trace(10.0, 0.001);
        tr.u = tr.t;
        fill_delta(tr);
        const auto c = sim::evaluate_cost(tr, 0.0, 1.0);
        CHECK(c.j == doctest::Approx(10.0).epsilon(1e-3));
        // raw increments carry an extra factor h^2 per term
        const auto raw = sim::evaluate_cost(tr, 0.0, 1.0, sim::DeltaUMode::raw);
        CHECK(raw.j == doctest::Approx(10.0 * 0.001 * 0.001).epsilon(1e-3));
    }
    SUBCASE("weights scale linearly") {
        auto tr = grid_trace(5.0, 0.01);
        for (std::size_t k = 0; k < tr.size(); ++k) {
            tr.e[k] = std::sin(tr.t[k]);
            tr.u[k] = tr.t[k] * tr.t[k];
        }
        fill_delta(tr);
        const auto a = sim::evaluate_cost(tr, 1.0, 1.0);
        const auto b = sim::evaluate_cost(tr, 2.0, 3.0);
        CHECK(b.j == doctest::Approx(2.0 * a.itse + 3.0 * a.isdco));
    }
}

TEST_CASE("reference-step increments dominate the rate-form penalty") {
    sim::SimConfig coarse, fine;
    fine.step_h = coarse.step_h / 2.0;
    const auto a = sim::compute_metrics(run(ref_pid, coarse), coarse);
    const auto b = sim::compute_metrics(run(ref_pid, fine), fine);
    // the proportional kick at the step contributes (Kp*r)^2/h
    CHECK(b.isdco > 1.5 * a.isdco);
    CHECK(b.itse == doctest::Approx(a.itse).epsilon(1e-3));

    coarse.isdco_exclude_reference_steps = true;
    fine.isdco_exclude_reference_steps = true;
    const auto c = sim::compute_metrics(run(ref_pid, coarse), coarse);
    const auto d = sim::compute_metrics(run(ref_pid, fine), fine);
    CHECK(c.isdco < a.isdco);
    CHECK(d.j == doctest::Approx(c.j).epsilon(0.01));
}

TEST_CASE("response metrics") {
    SUBCASE("first-order rise time") {
        const double tau = 2.0;
        auto tr = grid_trace(40.0, 0.001);
        for (std::size_t k = 0; k < tr.size(); ++k) {
            if (tr.t[k] >= 1.0) {
                tr.r[k] = 1.0;
                tr.y[k] = 1.0 - std::exp(-(tr.t[k] - 1.0) / tau);
            }
            tr.e[k] = tr.r[k] - tr.y[k];
        }
        const auto m = sim::compute_metrics(tr);
        REQUIRE(m.rise_time_10_90.has_value());
        CHECK(*m.rise_time_10_90 == doctest::Approx(tau * std::log(9.0)).epsilon(1e-3));
        REQUIRE(m.settling_time_2pct.has_value());
        CHECK(*m.settling_time_2pct == doctest::Approx(tau * std::log(50.0)).epsilon(1e-3));
        CHECK(*m.overshoot_pct == 0.0);
    }
    SUBCASE("total drug") {
        auto tr = grid_trace(50.0, 0.005);
        CHECK(sim::compute_metrics(tr).total_drug == 0.0);
        std::fill(tr.u.begin(), tr.u.end(), 1.0);
        const auto m = sim::compute_metrics(tr);
        CHECK(m.total_drug == doctest::Approx(50.0).epsilon(1e-12));
        CHECK(m.peak_u == 1.0);
        CHECK(m.steady_state_u == 1.0);
    }
    SUBCASE("no step leaves time metrics absent") {
        const auto m = sim::compute_metrics(grid_trace(5.0, 0.01));
        CHECK_FALSE(m.rise_time_10_90.has_value());
        CHECK_FALSE(m.settling_time_2pct.has_value());
    }
}

TEST_CASE("trace CSV round trip reproduces the cost") {
    const sim::SimConfig cfg;
    const auto tr = run(ref_fopid1, cfg);
    std::stringstream ss;
    sim::write_trace_csv(ss, tr);
    const auto back = sim::read_trace_csv(ss);
    CHECK(back.size() == tr.size());
    CHECK(back.u == tr.u);
    CHECK(back.y == tr.y);
    CHECK(back.observer_names == tr.observer_names);
    CHECK(back.observers == tr.observers);
    const double j0 = sim::evaluate_cost(tr, cfg).j;
    const double j1 = sim::evaluate_cost(back, cfg).j;
    CHECK(std::abs(j1 - j0) <= 1e-9 * std::abs(j0));

    std::stringstream bad("t,r,e\n0,0,0\n");
    CHECK_THROWS(sim::read_trace_csv(bad));
}

TEST_CASE("metrics file lists every field") {
    sim::Metrics m;
    m.j = 1.5;
    std::ostringstream os;
    sim::write_metrics(os, m);
    const auto s = os.str();
    CHECK(s.find("J = 1.5") != std::string::npos);
    CHECK(s.find("rise_time_10_90 = absent") != std::string::npos);
    CHECK(sim::format_double(0.1) == "0.1");
}
