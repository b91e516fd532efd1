#include "infusion/pso.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <random>

#include "infusion/parallel.hpp"

namespace infusion::pso {

void SwarmConfig::validate() const {
    if (n_particles == 0 || n_iterations == 0) {
        throw PsoError("swarm needs at least one particle and one iteration");
    }
    if (bounds.empty()) {
        throw PsoError("swarm needs at least one dimension");
    }
    for (const Bound& b : bounds) {
        if (!(b.lo < b.hi)) {
            throw PsoError("every bound needs lo < hi");
        }
    }
    if (!(c1 >= 0.0) || !(c2 >= 0.0)) {
        throw PsoError("learning rates must be nonnegative");
    }
    if (!(v_max_fraction > 0.0)) {
        throw PsoError("v_max_fraction must be positive");
    }
    if (!v_max.empty()) {
        if (v_max.size() != bounds.size()) {
            throw PsoError("v_max needs one entry per dimension");
        }
        for (double v : v_max) {
            if (!(v > 0.0)) {
                throw PsoError("v_max entries must be positive");
            }
        }
    }
}

std::vector<double> SwarmConfig::velocity_limits() const {
    if (!v_max.empty()) {
        return v_max;
    }
    std::vector<double> out;
    out.reserve(bounds.size());
    for (const Bound& b : bounds) {
        out.push_back(v_max_fraction * (b.hi - b.lo));
    }
    return out;
}

double inertia_at(std::size_t iteration, const SwarmConfig& cfg) {
    if (iteration >= cfg.n_iterations) {
        throw PsoError("iteration out of range");
    }
    if (cfg.n_iterations == 1) {
        return cfg.inertia_start;
    }
    return cfg.inertia_start + (cfg.inertia_end - cfg.inertia_start) *
                                   static_cast<double>(iteration) /
                                   static_cast<double>(cfg.n_iterations - 1);
}

namespace {

void check_shape(const std::vector<std::vector<double>>& rows, std::size_t n, std::size_t dim,
                 const char* what) {
    if (rows.size() != n) {
        throw PsoError(std::string(what) + " needs one row per particle");
    }
    for (const auto& r : rows) {
        if (r.size() != dim) {
            throw PsoError(std::string(what) + " rows need one entry per dimension");
        }
    }
}

} // namespace

PsoResult pso_minimize(const Objective& objective, const SwarmConfig& cfg,
                       const std::optional<SwarmInit>& init, const IterationObserver& observer) {
    cfg.validate();
    const std::size_t n = cfg.n_particles;
    const std::size_t dim = cfg.bounds.size();
    const std::vector<double> vmax = cfg.velocity_limits();

    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    SwarmState s;
    if (init) {
        check_shape(init->positions, n, dim, "initial positions");
        check_shape(init->velocities, n, dim, "initial velocities");
        s.positions = init->positions;
        s.velocities = init->velocities;
        for (const auto& x : s.positions) {
            for (std::size_t d = 0; d < dim; ++d) {
                if (x[d] < cfg.bounds[d].lo || x[d] > cfg.bounds[d].hi) {
                    throw PsoError("initial position outside bounds");
                }
            }
        }
    } else {
        s.positions.assign(n, std::vector<double>(dim));
        s.velocities.assign(n, std::vector<double>(dim));
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t d = 0; d < dim; ++d) {
                const Bound& b = cfg.bounds[d];
                s.positions[i][d] = b.lo + (b.hi - b.lo) * unit(rng);
                s.velocities[i][d] = vmax[d] * (2.0 * unit(rng) - 1.0);
            }
        }
    }

    PsoResult result;
    std::vector<double> values(n);
    bool warned = false;
    auto evaluate_all = [&] {
        parallel_for(n, cfg.threads, [&](std::size_t i) {
            values[i] = objective(std::span<const double>(s.positions[i]));
        });
        result.evaluations += n;
        for (double& v : values) {
            if (std::isnan(v)) {
                v = std::numeric_limits<double>::infinity();
                ++result.nan_evaluations;
                if (!warned) {
                    std::cerr << "warning: objective returned NaN; treated as +inf\n";
                    warned = true;
                }
            }
        }
    };

    evaluate_all();
    s.personal_best = s.positions;
    s.personal_best_value = values;
    std::size_t best = 0;
    for (std::size_t i = 1; i < n; ++i) {
        if (values[i] < values[best]) {
            best = i;
        }
    }
    s.global_best = s.positions[best];
    s.global_best_value = values[best];
    s.history.push_back(s.global_best_value);

    std::vector<double> phi1(n * dim), phi2(n * dim);
    for (std::size_t it = 0; it < cfg.n_iterations; ++it) {
        const double w = inertia_at(it, cfg);
        for (std::size_t k = 0; k < n * dim; ++k) {
            phi1[k] = unit(rng);
            phi2[k] = unit(rng);
        }
        for (std::size_t i = 0; i < n; ++i) {
            auto& x = s.positions[i];
            auto& v = s.velocities[i];
            const auto& p = s.personal_best[i];
            for (std::size_t d = 0; d < dim; ++d) {
                const std::size_t k = i * dim + d;
                double vel = w * v[d] + cfg.c1 * phi1[k] * (p[d] - x[d]) +
                             cfg.c2 * phi2[k] * (s.global_best[d] - x[d]);
                vel = std::clamp(vel, -vmax[d], vmax[d]);
                double pos = x[d] + vel;
                const Bound& b = cfg.bounds[d];
                if (pos < b.lo || pos > b.hi) {
                    pos = std::clamp(pos, b.lo, b.hi);
                    vel = 0.0;
                }
                x[d] = pos;
                v[d] = vel;
            }
        }

        evaluate_all();
        for (std::size_t i = 0; i < n; ++i) {
            if (values[i] < s.personal_best_value[i]) {
                s.personal_best_value[i] = values[i];
                s.personal_best[i] = s.positions[i];
            }
            if (values[i] < s.global_best_value) {
                s.global_best_value = values[i];
                s.global_best = s.positions[i];
            }
        }
        s.iteration = it + 1;
        s.history.push_back(s.global_best_value);
        if (observer) {
            observer(s);
        }
    }

    result.best_x = s.global_best;
    result.best_value = s.global_best_value;
    result.history = std::move(s.history);
    return result;
}

} // namespace infusion::pso
