#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

// Global-best particle swarm with a linearly decaying inertia weight and box
// bounds.
namespace infusion::pso {

class PsoError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

struct Bound {
    double lo = 0.0;
    double hi = 0.0;
};

struct SwarmConfig {
    std::size_t n_particles = 30;
    std::size_t n_iterations = 200;
    double c1 = 0.5; // cognitive rate
    double c2 = 1.0; // social rate
    double inertia_start = 0.9;
    double inertia_end = 0.1;
    std::uint64_t seed = 42;
    std::vector<Bound> bounds;
    /// Per-dimension velocity limit; empty means v_max_fraction * (hi - lo).
    std::vector<double> v_max;
    double v_max_fraction = 0.2;
    /// Worker threads for fitness evaluation; 0 picks hardware concurrency.
    unsigned threads = 0;

    void validate() const;
    std::vector<double> velocity_limits() const;
};

/// Optional explicit start state; skips the random initialization draws.
struct SwarmInit {
    std::vector<std::vector<double>> positions;
    std::vector<std::vector<double>> velocities;
};

struct SwarmState {
    std::vector<std::vector<double>> positions;
    std::vector<std::vector<double>> velocities;
    std::vector<std::vector<double>> personal_best;
    std::vector<double> personal_best_value;
    std::vector<double> global_best;
    double global_best_value = 0.0;
    std::size_t iteration = 0;
    /// history[0] is the initial swarm; one entry per iteration after that.
    std::vector<double> history;
};

struct PsoResult {
    std::vector<double> best_x;
    double best_value = 0.0;
    std::vector<double> history;
    std::size_t evaluations = 0;
    std::size_t nan_evaluations = 0;
};

using Objective = std::function<double(std::span<const double>)>;

/// Called after each iteration with the updated state (tests inspect invariants).
using IterationObserver = std::function<void(const SwarmState&)>;

double inertia_at(std::size_t iteration, const SwarmConfig& cfg);

/**
 * Minimizes objective over the configured box.
 *
 * Random numbers come from a 64-bit Mersenne twister seeded with cfg.seed, in
 * this order: initialization draws position then velocity per dimension,
 * particle-major; each iteration draws phi1 then phi2 per dimension,
 * particle-major, before any evaluation is dispatched. The objective must be
 * reentrant; evaluations of one iteration may run concurrently. NaN objective
 * values count as +infinity.
 */
PsoResult pso_minimize(const Objective& objective, const SwarmConfig& cfg,
                       const std::optional<SwarmInit>& init = std::nullopt,
                       const IterationObserver& observer = {});

} // namespace infusion::pso
