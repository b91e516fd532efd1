#include "doctest.h"

#include <atomic>
#include <cmath>
#include <numeric>

#include "infusion/pso.hpp"

using namespace infusion;

namespace {

double sphere(std::span<const double> x) {
    return std::inner_product(x.begin(), x.end(), x.begin(), 0.0);
}

double rosenbrock(std::span<const double> x) {
    double f = 0.0;
    for (std::size_t i = 0; i + 1 < x.size(); ++i) {
        f += 100.0 * std::pow(x[i + 1] - x[i] * x[i], 2) + std::pow(1.0 - x[i], 2);
    }
    return f;
}

pso::SwarmConfig box(std::size_t dim, double lo, double hi) {
    pso::SwarmConfig cfg;
    cfg.bounds.assign(dim, {lo, hi});
    return cfg;
}

} // namespace

TEST_CASE("inertia schedule") {
    pso::SwarmConfig cfg = box(1, 0.0, 1.0);
    cfg.n_iterations = 201;
    CHECK(pso::inertia_at(0, cfg) == 0.9);
    CHECK(pso::inertia_at(200, cfg) == doctest::Approx(0.1).epsilon(1e-14));
    CHECK(pso::inertia_at(100, cfg) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK_THROWS_AS(pso::inertia_at(201, cfg), pso::PsoError);
}

TEST_CASE("configuration validation") {
    auto cfg = box(2, -1.0, 1.0);
    CHECK_NOTHROW(cfg.validate());
    cfg.n_particles = 0;
    CHECK_THROWS_AS(cfg.validate(), pso::PsoError);
    cfg = box(2, 1.0, 1.0);
    CHECK_THROWS_AS(cfg.validate(), pso::PsoError);
    cfg = box(0, 0.0, 1.0);
    CHECK_THROWS_AS(cfg.validate(), pso::PsoError);
    cfg = box(2, -1.0, 1.0);
    cfg.v_max = {0.1};
    CHECK_THROWS_AS(cfg.validate(), pso::PsoError);
    cfg.v_max = {0.1, 0.3};
    CHECK(cfg.velocity_limits() == std::vector<double>{0.1, 0.3});
    CHECK(box(1, -5.0, 5.0).velocity_limits() == std::vector<double>{2.0});
}

TEST_CASE("5-D sphere with defaults") {
    auto cfg = box(5, -5.0, 5.0);
    const auto r = pso::pso_minimize(sphere, cfg);
    CHECK(r.best_value < 1e-3);
    CHECK(r.history.size() == cfg.n_iterations + 1);
    CHECK(r.evaluations == cfg.n_particles * (cfg.n_iterations + 1));
    CHECK(r.best_value == r.history.back());
    CHECK(sphere(r.best_x) == r.best_value);
    for (std::size_t i = 1; i < r.history.size(); ++i) {
        CHECK(r.history[i] <= r.history[i - 1]);
    }
}

TEST_CASE("reruns are bit-identical regardless of thread count") {
    auto cfg = box(5, -5.0, 5.0);
    cfg.n_iterations = 60;
    cfg.threads = 1;
    const auto a = pso::pso_minimize(rosenbrock, cfg);
    const auto b = pso::pso_minimize(rosenbrock, cfg);
    cfg.threads = 4;
    const auto c = pso::pso_minimize(rosenbrock, cfg);
    CHECK(a.best_x == b.best_x);
    CHECK(a.history == b.history);
    CHECK(a.best_x == c.best_x);
    CHECK(a.history == c.history);
    cfg.seed = 43;
    CHECK(pso::pso_minimize(rosenbrock, cfg).history != a.history);
}

TEST_CASE("a particle resting on the optimum never moves") {
    auto cfg = box(3, -2.0, 2.0);
    cfg.n_particles = 1;
    cfg.n_iterations = 25;
    const pso::SwarmInit init{{{0.0, 0.0, 0.0}}, {{0.0, 0.0, 0.0}}};
    std::size_t calls = 0;
    const auto r = pso::pso_minimize(sphere, cfg, init, [&](const pso::SwarmState& s) {
        ++calls;
        CHECK(s.positions[0] == std::vector<double>{0.0, 0.0, 0.0});
        CHECK(s.velocities[0] == std::vector<double>{0.0, 0.0, 0.0});
    });
    CHECK(calls == 25);
    CHECK(r.best_value == 0.0);
}

TEST_CASE("swarm state invariants hold every iteration") {
    auto cfg = box(4, -1.0, 3.0);
    cfg.bounds[1] = {0.5, 0.75};
    cfg.n_iterations = 80;
    const auto vmax = cfg.velocity_limits();
    double last_gbest = INFINITY;
    pso::pso_minimize(rosenbrock, cfg, std::nullopt, [&](const pso::SwarmState& s) {
        for (std::size_t i = 0; i < s.positions.size(); ++i) {
            for (std::size_t d = 0; d < 4; ++d) {
                CHECK(s.positions[i][d] >= cfg.bounds[d].lo);
                CHECK(s.positions[i][d] <= cfg.bounds[d].hi);
                CHECK(std::abs(s.velocities[i][d]) <= vmax[d]);
                CHECK(s.personal_best[i][d] >= cfg.bounds[d].lo);
                CHECK(s.personal_best[i][d] <= cfg.bounds[d].hi);
            }
            CHECK(s.personal_best_value[i] == rosenbrock(s.personal_best[i]));
            CHECK(s.global_best_value <= s.personal_best_value[i]);
        }
        CHECK(s.global_best_value <= last_gbest);
        last_gbest = s.global_best_value;
    });
}

TEST_CASE("NaN objective values count as infinity") {
    auto cfg = box(2, -1.0, 1.0);
    cfg.n_iterations = 20;
    const auto r = pso::pso_minimize(
        [](std::span<const double> x) { return x[0] > 0.0 ? NAN : sphere(x); }, cfg);
    CHECK(std::isfinite(r.best_value));
    CHECK(r.best_x[0] <= 0.0);
    CHECK(r.nan_evaluations > 0);
}

TEST_CASE("objective exceptions propagate") {
    auto cfg = box(2, -1.0, 1.0);
    cfg.n_iterations = 3;
    std::atomic<int> n{0};
    CHECK_THROWS_AS(pso::pso_minimize(
                        [&](std::span<const double>) -> double {
                            if (++n == 10) {
                                throw std::runtime_error("boom");
                            }
                            return 0.0;
                        },
                        cfg),
                    std::runtime_error);
}

TEST_CASE("explicit initial swarm is checked") {
    auto cfg = box(2, -1.0, 1.0);
    cfg.n_particles = 2;
    const pso::SwarmInit outside{{{0.0, 0.0}, {2.0, 0.0}}, {{0.0, 0.0}, {0.0, 0.0}}};
    CHECK_THROWS_AS(pso::pso_minimize(sphere, cfg, outside), pso::PsoError);
    const pso::SwarmInit short_rows{{{0.0}, {0.0}}, {{0.0}, {0.0}}};
    CHECK_THROWS_AS(pso::pso_minimize(sphere, cfg, short_rows), pso::PsoError);
}

TEST_CASE("2-D Rosenbrock is solved for most seeds") {
    int solved = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        auto cfg = box(2, -2.0, 2.0);
        cfg.seed = seed;
        cfg.n_particles = 40;
        cfg.n_iterations = 300;
        const auto r = pso::pso_minimize(rosenbrock, cfg);
        solved += r.best_value < 1e-2;
    }
    CHECK(solved >= 8);
}
