#pragma once

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "infusion/lti.hpp"
#include "infusion/patient.hpp"

// Fixed-step closed-loop simulation, cost functional, and response metrics.
namespace infusion::sim {

class ConfigError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when the loop state leaves the representable range.
class DivergenceError : public std::runtime_error {
  public:
    DivergenceError(double time, const std::string& what)
        : std::runtime_error(what), time_(time) {}
    double time() const { return time_; }

  private:
    double time_;
};

/// How the control increment enters the cost: rate = du/dt, raw = u_k - u_{k-1}.
enum class DeltaUMode { rate, raw };

std::string_view to_string(DeltaUMode m);
DeltaUMode parse_delta_u_mode(std::string_view name);

struct SimConfig {
    double t_end = 50.0;             // min
    double step_h = 0.005;           // min
    double setpoint_amplitude = 0.5; // effect units
    double setpoint_time = 1.0;      // min
    double w1 = 1.0;
    double w2 = 1.0;
    double deriv_filter_nf = 100.0; // rad/min
    bool clamp_nonnegative_u = true;
    DeltaUMode delta_u_mode = DeltaUMode::rate;
    /// Drop the control increment at the setpoint step from ISDCO. Off by
    /// default: that increment is the pump shock the cost penalizes, but its
    /// rate-form contribution grows like 1/h.
    bool isdco_exclude_reference_steps = false;

    void validate() const;
    std::size_t steps() const;
};

struct SimulationTrace {
    double step_h = 0.0;
    std::vector<double> t;
    std::vector<double> r;
    std::vector<double> e;
    std::vector<double> u;
    std::vector<double> delta_u; // (u_k - u_{k-1}) / h, zero at k = 0
    std::vector<double> c_b;
    std::vector<double> y;
    std::vector<std::string> observer_names;
    std::vector<std::vector<double>> observers;

    std::size_t size() const { return t.size(); }
    /// Throws ConfigError on mismatched lengths or non-finite samples.
    void validate() const;
};

struct SimOptions {
    /// Feedforward observers do not influence the loop; skipping them leaves
    /// every other signal bit-identical.
    bool record_observers = true;
};

/**
 * RK4 integration of controller + patient + Hill output at fixed step.
 *
 * e = r - y, u = controller(e) (clamped at zero when configured), C_b is the
 * brain outflow, y = Effect(C_b). Negative transient C_b is clipped to zero
 * before the Hill map. Throws DivergenceError when a state exceeds 1e12.
 */
SimulationTrace simulate_closed_loop(const lti::TransferFunction& controller,
                                     const patient::PatientModel& patient, const SimConfig& cfg,
                                     const SimOptions& options = {});

struct CostBreakdown {
    double j = 0.0;
    double itse = 0.0;
    double isdco = 0.0;
};

/// J = sum h*[w1*t_k*e_k^2] (trapezoidal) + w2 * sum h*(du_k/h)^2 (rate mode).
/// With exclude_reference_steps, increments across a reference jump are
/// skipped.
CostBreakdown evaluate_cost(const SimulationTrace& trace, double w1, double w2,
                            DeltaUMode mode = DeltaUMode::rate,
                            bool exclude_reference_steps = false);

struct Metrics {
    double j = 0.0;
    double itse = 0.0;
    double isdco = 0.0;
    std::optional<double> rise_time_10_90;
    std::optional<double> settling_time_2pct; // measured from the setpoint step
    std::optional<double> overshoot_pct;
    double peak_u = 0.0;
    double total_drug = 0.0;
    double steady_state_u = 0.0;
};

Metrics compute_metrics(const SimulationTrace& trace, double w1 = 1.0, double w2 = 1.0,
                        DeltaUMode mode = DeltaUMode::rate,
                        bool exclude_reference_steps = false);

/// Cost and metrics with the weights and ISDCO options from cfg.
CostBreakdown evaluate_cost(const SimulationTrace& trace, const SimConfig& cfg);
Metrics compute_metrics(const SimulationTrace& trace, const SimConfig& cfg);

/// Full-precision CSV: t,r,e,u,delta_u,c_b,y,<observers...>
void write_trace_csv(std::ostream& out, const SimulationTrace& trace);
SimulationTrace read_trace_csv(std::istream& in);

void write_metrics(std::ostream& out, const Metrics& m);

/// Shortest round-trip decimal representation.
std::string format_double(double v);

} // namespace infusion::sim
