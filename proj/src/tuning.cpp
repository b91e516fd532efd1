#include "infusion/tuning.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace infusion::tuning {

using frac::FopidClass;
using frac::FopidParams;
using sim::format_double;

double divergence_penalty(double divergence_time, double t_end) {
    const double frac = std::clamp(divergence_time / t_end, 0.0, 1.0);
    return kPenaltyFloor * (2.0 - frac);
}

void TuningProblem::validate() const {
    sim.validate();
    ora.validate();
    patient.validate();
    if (!(gain_bounds.lo >= 0.0) || !(gain_bounds.lo < gain_bounds.hi)) {
        throw sim::ConfigError("gain bounds need 0 <= lo < hi");
    }
    if (!(order_margin > 0.0 && order_margin < 1.0)) {
        throw sim::ConfigError("order margin must lie in (0, 1)");
    }
}

std::vector<pso::Bound> search_bounds(const TuningProblem& problem) {
    std::vector<pso::Bound> b(3, problem.gain_bounds);
    if (problem.cls == FopidClass::pid) {
        return b;
    }
    const pso::Bound below{0.0, 1.0 - problem.order_margin};
    const pso::Bound above{1.0 + problem.order_margin, 2.0};
    const bool lambda_above = problem.cls == FopidClass::fopid3 || problem.cls == FopidClass::fopid4;
    const bool mu_above = problem.cls == FopidClass::fopid2 || problem.cls == FopidClass::fopid4;
    b.push_back(lambda_above ? above : below);
    b.push_back(mu_above ? above : below);
    return b;
}

FopidParams decode_position(std::span<const double> x, FopidClass cls) {
    const std::size_t expected = cls == FopidClass::pid ? 3 : 5;
    if (x.size() != expected) {
        throw TuningError("position has the wrong dimension for its class");
    }
    FopidParams p{x[0], x[1], x[2], 1.0, 1.0};
    if (cls != FopidClass::pid) {
        p.lambda = x[3];
        p.mu = x[4];
    }
    return p;
}

Evaluation evaluate_candidate(const FopidParams& params, const TuningProblem& problem) {
    const auto controller = frac::build_fopid(params, problem.ora, problem.sim.deriv_filter_nf);
    try {
        const auto trace = sim::simulate_closed_loop(controller, problem.patient, problem.sim,
                                                     sim::SimOptions{.record_observers = false});
        const auto cost =
            sim::evaluate_cost(trace, problem.sim);
        return {cost.j, false, 0.0};
    } catch (const sim::DivergenceError& e) {
        return {divergence_penalty(e.time(), problem.sim.t_end), true, e.time()};
    }
}

TuningResult tune_controller(const TuningProblem& problem) {
    problem.validate();
    pso::SwarmConfig swarm = problem.swarm;
    swarm.bounds = search_bounds(problem);
    swarm.v_max.clear();
    swarm.validate();

    const std::size_t planned = swarm.n_particles * (swarm.n_iterations + 1);
    if (planned > problem.max_simulations) {
        throw sim::ConfigError("simulation budget exceeded: " + std::to_string(planned) + " > " +
                          std::to_string(problem.max_simulations));
    }

    std::atomic<std::size_t> penalized{0};
    std::atomic<std::size_t> oversized{0};
    const auto objective = [&](std::span<const double> x) {
        const Evaluation ev = evaluate_candidate(decode_position(x, problem.cls), problem);
        if (ev.diverged) {
            ++penalized;
        } else if (ev.j >= kPenaltyFloor) {
            ++oversized;
        }
        return ev.j;
    };
    const pso::PsoResult r = pso::pso_minimize(objective, swarm);

    if (oversized > 0) {
        std::cerr << "warning: " << oversized.load()
                  << " feasible loops exceeded the divergence penalty floor\n";
    }
    if (r.best_value >= kPenaltyFloor) {
        throw InfeasibleTuningError("no feasible " + std::string(frac::to_string(problem.cls)) +
                                    " controller found: every candidate diverged");
    }
    TuningResult out;
    out.cls = problem.cls;
    out.params = decode_position(r.best_x, problem.cls);
    out.j_min = r.best_value;
    out.history = r.history;
    out.evaluations = r.evaluations;
    out.penalized = penalized.load();
    return out;
}

sim::Metrics row_metrics(const TuningRow& row, const TuningProblem& base) {
    const auto controller = frac::build_fopid(row.params, base.ora, base.sim.deriv_filter_nf);
    const auto trace = sim::simulate_closed_loop(controller, base.patient, base.sim,
                                                 sim::SimOptions{.record_observers = false});
    return sim::compute_metrics(trace, base.sim);
}

TuningReport compare_classes(const TuningProblem& base) {
    TuningReport report;
    for (FopidClass cls : frac::kAllClasses) {
        TuningProblem p = base;
        p.cls = cls;
        const TuningResult r = tune_controller(p);
        TuningRow row{cls, r.params, r.j_min, r.history, std::nullopt};
        row.metrics = row_metrics(row, p);
        report.rows.push_back(std::move(row));
    }
    return report;
}

RobustnessReport robustness_sweep(std::span<const LabelledController> controllers,
                                  const patient::PatientModel& patient,
                                  std::span<const double> factors, const sim::SimConfig& sim,
                                  const frac::OraConfig& ora) {
    if (std::find(factors.begin(), factors.end(), 1.0) == factors.end()) {
        throw sim::ConfigError("robustness factors must include 1.0");
    }
    RobustnessReport report;
    for (double factor : factors) {
        const auto perturbed =
            patient::apply_dc_perturbation(patient, {patient::Organ::brain, factor});
        for (const auto& c : controllers) {
            RobustnessRow row{factor, c.label, std::nullopt, 0.0};
            const auto tf = frac::build_fopid(c.params, ora, sim.deriv_filter_nf);
            try {
                const auto trace = sim::simulate_closed_loop(
                    tf, perturbed, sim, sim::SimOptions{.record_observers = false});
                row.metrics = sim::compute_metrics(trace, sim);
            } catch (const sim::DivergenceError& e) {
                row.divergence_time = e.time();
            }
            report.rows.push_back(std::move(row));
        }
    }
    return report;
}

namespace {

std::string opt(const std::optional<double>& v) {
    return v ? format_double(*v) : std::string();
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        cells.push_back(cell);
    }
    if (!line.empty() && line.back() == ',') {
        cells.emplace_back();
    }
    return cells;
}

double parse_number(const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        throw TuningError("malformed number '" + s + "' in report");
    }
    if (used != s.size()) {
        throw TuningError("malformed number '" + s + "' in report");
    }
    return v;
}

constexpr const char* kReportHeader =
    "class,J_min,Kp,Ki,Kd,lambda,mu,rise_time_10_90,settling_time_2pct,overshoot_pct,peak_u,"
    "total_drug,steady_state_u";

} // namespace

void write_tuning_report_csv(std::ostream& out, const TuningReport& report) {
    out << kReportHeader << '\n';
    for (const auto& row : report.rows) {
        out << frac::to_string(row.cls) << ',' << format_double(row.j_min) << ','
            << format_double(row.params.kp) << ',' << format_double(row.params.ki) << ','
            << format_double(row.params.kd) << ',' << format_double(row.params.lambda) << ','
            << format_double(row.params.mu);
        if (row.metrics) {
            const auto& m = *row.metrics;
            out << ',' << opt(m.rise_time_10_90) << ',' << opt(m.settling_time_2pct) << ','
                << opt(m.overshoot_pct) << ',' << format_double(m.peak_u) << ','
                << format_double(m.total_drug) << ',' << format_double(m.steady_state_u);
        } else {
            out << ",,,,,,";
        }
        out << '\n';
    }
}

TuningReport read_tuning_report_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != kReportHeader) {
        throw TuningError("tuning report CSV has an unexpected header");
    }
    TuningReport report;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        const auto cells = split(line);
        if (cells.size() != 13) {
            throw TuningError("tuning report row has the wrong number of cells");
        }
        TuningRow row;
        row.cls = frac::parse_class(cells[0]);
        row.j_min = parse_number(cells[1]);
        row.params = {parse_number(cells[2]), parse_number(cells[3]), parse_number(cells[4]),
                      parse_number(cells[5]), parse_number(cells[6])};
        // peak_u is always written for rows that carry metrics
        if (!cells[10].empty()) {
            sim::Metrics m;
            m.j = row.j_min;
            const auto maybe = [&](std::size_t i) -> std::optional<double> {
                return cells[i].empty() ? std::nullopt : std::optional(parse_number(cells[i]));
            };
            m.rise_time_10_90 = maybe(7);
            m.settling_time_2pct = maybe(8);
            m.overshoot_pct = maybe(9);
            m.peak_u = parse_number(cells[10]);
            m.total_drug = parse_number(cells[11]);
            m.steady_state_u = parse_number(cells[12]);
            row.metrics = m;
        }
        report.rows.push_back(std::move(row));
    }
    return report;
}

void write_tuning_report_table(std::ostream& out, const TuningReport& report) {
    out << std::left << std::setw(12) << "Controller" << std::right << std::setw(14) << "J_min"
        << std::setw(12) << "Kp" << std::setw(12) << "Ki" << std::setw(12) << "Kd"
        << std::setw(10) << "lambda" << std::setw(10) << "mu" << '\n';
    out << std::fixed;
    for (const auto& row : report.rows) {
        out << std::left << std::setw(12) << frac::to_string(row.cls) << std::right
            << std::setprecision(4) << std::setw(14) << row.j_min << std::setw(12)
            << row.params.kp << std::setw(12) << row.params.ki << std::setw(12) << row.params.kd;
        if (row.cls == FopidClass::pid) {
            out << std::setw(10) << "-" << std::setw(10) << "-";
        } else {
            out << std::setw(10) << row.params.lambda << std::setw(10) << row.params.mu;
        }
        out << '\n';
    }
    out << std::defaultfloat;
}

void write_convergence_csv(std::ostream& out, std::span<const double> history) {
    out << "iteration,gbest_value\n";
    for (std::size_t i = 0; i < history.size(); ++i) {
        out << i << ',' << format_double(history[i]) << '\n';
    }
}

void write_robustness_csv(std::ostream& out, const RobustnessReport& report) {
    out << "factor,controller,status,J,peak_u,total_drug,rise_time_10_90,settling_time_2pct,"
           "steady_state_u,divergence_time\n";
    for (const auto& row : report.rows) {
        out << format_double(row.factor) << ',' << row.label << ',';
        if (row.metrics) {
            const auto& m = *row.metrics;
            out << "ok," << format_double(m.j) << ',' << format_double(m.peak_u) << ','
                << format_double(m.total_drug) << ',' << opt(m.rise_time_10_90) << ','
                << opt(m.settling_time_2pct) << ',' << format_double(m.steady_state_u) << ",\n";
        } else {
            out << "unstable,,,,,,," << format_double(row.divergence_time) << '\n';
        }
    }
}

void write_robustness_table(std::ostream& out, const RobustnessReport& report) {
    out << std::setw(8) << "factor" << "  " << std::left << std::setw(12) << "controller"
        << std::right << std::setw(12) << "peak_u" << std::setw(14) << "total_drug"
        << std::setw(12) << "rise" << std::setw(12) << "settling" << std::setw(12) << "u_ss"
        << '\n';
    out << std::fixed << std::setprecision(4);
    for (const auto& row : report.rows) {
        out << std::setw(8) << row.factor << "  " << std::left << std::setw(12) << row.label
            << std::right;
        if (!row.metrics) {
            out << "  unstable (diverged at t = " << row.divergence_time << " min)\n";
            continue;
        }
        const auto& m = *row.metrics;
        auto cell = [&](const std::optional<double>& v) {
            if (v) {
                out << std::setw(12) << *v;
            } else {
                out << std::setw(12) << "-";
            }
        };
        out << std::setw(12) << m.peak_u << std::setw(14) << m.total_drug;
        cell(m.rise_time_10_90);
        cell(m.settling_time_2pct);
        out << std::setw(12) << m.steady_state_u << '\n';
    }
    out << std::defaultfloat;
}

} // namespace infusion::tuning
