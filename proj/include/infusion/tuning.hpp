#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "infusion/frac.hpp"
#include "infusion/patient.hpp"
#include "infusion/pso.hpp"
#include "infusion/sim.hpp"

// Controller tuning by swarm search over the closed-loop cost, class
// comparison, and brain dc-gain robustness sweeps.
namespace infusion::tuning {

class TuningError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// No particle ever produced a non-divergent loop.
class InfeasibleTuningError : public TuningError {
  public:
    using TuningError::TuningError;
};

/// Smallest penalty assigned to a divergent loop.
inline constexpr double kPenaltyFloor = 1e9;

/// 1e9 * (2 - t_div / t_end): later divergence is penalized less.
double divergence_penalty(double divergence_time, double t_end);

struct TuningProblem {
    frac::FopidClass cls = frac::FopidClass::pid;
    pso::Bound gain_bounds{0.001, 10.0};
    /// Orders stay this far from 1 so every class keeps a strict inequality.
    double order_margin = 1e-3;
    sim::SimConfig sim;
    frac::OraConfig ora;
    pso::SwarmConfig swarm; // bounds are filled from the class
    patient::PatientModel patient = patient::nominal_patient();
    std::size_t max_simulations = 1'000'000;

    void validate() const;
};

/// [Kp, Ki, Kd] for PID, [Kp, Ki, Kd, lambda, mu] otherwise.
std::vector<pso::Bound> search_bounds(const TuningProblem& problem);
frac::FopidParams decode_position(std::span<const double> x, frac::FopidClass cls);

struct Evaluation {
    double j = 0.0;
    bool diverged = false;
    double divergence_time = 0.0;
};

/// Cost of one candidate on the problem's patient, or the divergence penalty.
Evaluation evaluate_candidate(const frac::FopidParams& params, const TuningProblem& problem);

struct TuningResult {
    frac::FopidClass cls = frac::FopidClass::pid;
    frac::FopidParams params;
    double j_min = 0.0;
    std::vector<double> history;
    std::size_t evaluations = 0;
    std::size_t penalized = 0;
};

TuningResult tune_controller(const TuningProblem& problem);

struct TuningRow {
    frac::FopidClass cls = frac::FopidClass::pid;
    frac::FopidParams params;
    double j_min = 0.0;
    std::vector<double> history;
    std::optional<sim::Metrics> metrics;
};

struct TuningReport {
    std::vector<TuningRow> rows;
};

/// Best closed-loop metrics for a tuned row (observers off).
sim::Metrics row_metrics(const TuningRow& row, const TuningProblem& base);

/// Tunes every class in fixed order PID, FOPID1..FOPID4.
TuningReport compare_classes(const TuningProblem& base);

struct LabelledController {
    std::string label;
    frac::FopidParams params;
};

struct RobustnessRow {
    double factor = 1.0;
    std::string label;
    std::optional<sim::Metrics> metrics; // empty when the loop diverged
    double divergence_time = 0.0;
};

struct RobustnessReport {
    std::vector<RobustnessRow> rows;
};

/// Scales the brain numerator by each factor and re-simulates each controller.
RobustnessReport robustness_sweep(std::span<const LabelledController> controllers,
                                  const patient::PatientModel& patient,
                                  std::span<const double> factors, const sim::SimConfig& sim,
                                  const frac::OraConfig& ora);

void write_tuning_report_csv(std::ostream& out, const TuningReport& report);
TuningReport read_tuning_report_csv(std::istream& in);
void write_tuning_report_table(std::ostream& out, const TuningReport& report);
void write_convergence_csv(std::ostream& out, std::span<const double> history);
void write_robustness_csv(std::ostream& out, const RobustnessReport& report);
void write_robustness_table(std::ostream& out, const RobustnessReport& report);

} // namespace infusion::tuning
