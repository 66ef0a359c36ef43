#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "procimp/complete_data.hpp"
#include "procimp/error.hpp"
#include "procimp/simulate.hpp"

using namespace procimp;

TEST_CASE("zero-noise second-order path follows the deterministic recursion") {
    const auto g = build_grid(0.0, 5.0, 51);
    Sde2Params p;
    p.sigma_v = 0.8;
    p.potential = AttractorPotential(Vec2(1.0, 0.0), 0.3);
    p.mu0 = Vec2(4.0, 2.0);
    p.v0 = Vec2(-0.5, 0.25);
    p.zero_noise = true;
    const auto a = simulate_sde2(p, g, 1);
    const auto b = simulate_sde2(p, g, 999);
    CHECK(a.positions() == b.positions());

    Vec2 mu = p.mu0, v = p.v0;
    for (std::size_t j = 0; j + 1 < g.size(); ++j) {
        const double dt = g.dt(j + 1);
        const Vec2 u = unit_from_center(mu, Vec2(1.0, 0.0));
        const Vec2 nv = v - 0.3 * u * dt - 0.8 * v * dt;
        mu = mu + v * dt;
        v = nv;
        CHECK((a.position(j + 1) - mu).norm() < 1e-12);
        CHECK(((*a.velocities()).row(static_cast<Eigen::Index>(j + 1)).transpose() - v).norm() < 1e-12);
    }
}

TEST_CASE("second-order simulation is reproducible by seed") {
    const auto g = build_grid(0.0, 10.0, 200);
    Sde2Params p;
    p.potential = AttractorPotential(Vec2::Zero(), 0.5);
    const auto a = simulate_sde2(p, g, 42);
    const auto b = simulate_sde2(p, g, 42);
    const auto c = simulate_sde2(p, g, 43);
    CHECK(a.positions() == b.positions());
    CHECK(a.positions() != c.positions());
}

TEST_CASE("time-varying beta must match the grid") {
    const auto g = build_grid(0.0, 1.0, 10);
    Sde2Params p;
    p.potential = AttractorPotential(Vec2::Zero(), std::vector<double>(9, 0.1));
    CHECK_THROWS_AS(simulate_sde2(p, g, 1), ValidationError);
}

TEST_CASE("velocity increments have variance sigma_v^2 dt") {
    // beta = 0 and v = 0 throughout would be degenerate; use the residual of the Euler step
    const auto g = build_grid(0.0, 200.0, 20001);
    Sde2Params p;
    p.sigma_v = 1.3;
    p.potential = AttractorPotential(Vec2::Zero(), 0.7);
    p.mu0 = Vec2(3.0, 0.0);
    const auto path = simulate_sde2(p, g, 5);
    const auto& v = *path.velocities();
    std::vector<double> z;
    for (std::size_t j = 0; j + 1 < g.size(); ++j) {
        const auto r = static_cast<Eigen::Index>(j);
        const double dt = g.dt(j + 1);
        const Vec2 vj = v.row(r).transpose();
        const Vec2 mean = vj - 0.7 * unit_from_center(path.position(j), Vec2::Zero()) * dt - 1.3 * vj * dt;
        const Vec2 e = (v.row(r + 1).transpose() - mean) / (1.3 * std::sqrt(dt));
        z.push_back(e.x());
        z.push_back(e.y());
    }
    const auto m = oracle::moments(z);
    CHECK(std::abs(m.mean) < 3.0 * m.mean_se);
    CHECK(std::abs(m.var - 1.0) < 3.0 * m.var_se);
}

TEST_CASE("first-order simulation: beta estimate within 4 standard errors") {
    const auto g = build_grid(0.0, 2000.0, 20001);
    Sde1Params p{0.6, Vec2(2.0, -1.0), 100.0};
    const auto path = simulate_sde1(p, g, 77);
    const auto s = first_order_stats(path.positions(), g, p.center);
    const double est = s.score / s.info;
    CHECK(std::abs(est - 0.6) < 4.0 / std::sqrt(s.info));
}

TEST_CASE("first-order initial position has variance sigma0^2") {
    const auto g = build_grid(0.0, 1.0, 2);
    std::vector<double> x;
    for (std::uint64_t s = 0; s < 4000; ++s) {
        const auto path = simulate_sde1({0.0, Vec2::Zero(), 25.0}, g, s);
        x.push_back(path.position(0).x());
        x.push_back(path.position(0).y());
    }
    const auto m = oracle::moments(x);
    CHECK(std::abs(m.mean) < 3.0 * m.mean_se);
    CHECK(std::abs(m.var - 25.0) < 3.0 * m.var_se);
}

TEST_CASE("observe: zero-noise flag returns the path exactly") {
    const auto g = build_grid(0.0, 10.0, 11);
    const auto path = simulate_sde1({0.2, Vec2::Zero(), 1.0}, g, 3);
    const std::vector<double> times{0.0, 3.0, 10.0};
    const auto d = observe(path, times, {0.0, true}, 1);
    CHECK(d.location(1) == path.position(3));
    CHECK_THROWS_AS(observe(path, std::vector<double>{0.5}, {1e-2, false}, 1), ValidationError);
}

TEST_CASE("observation error variance within 5% of sigma_s^2") {
    const auto g = build_grid(0.0, 1.0, 5000);
    const auto path = simulate_sde1({0.0, Vec2::Zero(), 1.0}, g, 3);
    const auto d = observe(path, g.times(), {0.04, false}, 8);
    std::vector<double> e;
    for (std::size_t i = 0; i < d.size(); ++i) {
        const Vec2 r = d.location(i) - path.position(i);
        e.push_back(r.x());
        e.push_back(r.y());
    }
    CHECK(std::abs(oracle::moments(e).var / 0.04 - 1.0) < 0.05);
}

TEST_CASE("beta = 0: velocity variance approaches sigma_v / 2") {
    const auto g = build_grid(0.0, 5000.0, 100001);
    Sde2Params p;
    p.sigma_v = 1.4;
    p.potential = AttractorPotential(Vec2::Zero(), 0.0);
    const auto path = simulate_sde2(p, g, 21);
    const auto& v = *path.velocities();
    std::vector<double> x(v.col(0).data() + 1000, v.col(0).data() + v.rows());
    CHECK(std::abs(oracle::moments(x).var / 0.7 - 1.0) < 0.10);
}

TEST_CASE("beta = 0 first-order increments are standard normal (KS at 1%)") {
    const auto g = build_grid(0.0, 50.0, 5001);
    const auto path = simulate_sde1({0.0, Vec2::Zero(), 1.0}, g, 4);
    std::vector<double> z;
    for (std::size_t j = 1; j < g.size(); ++j)
        z.push_back((path.position(j).x() - path.position(j - 1).x()) / std::sqrt(g.dt(j)));
    std::sort(z.begin(), z.end());
    const double n = static_cast<double>(z.size());
    double ks = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double F = oracle::phi(z[i]);
        ks = std::max({ks, std::abs(F - static_cast<double>(i) / n), std::abs(F - static_cast<double>(i + 1) / n)});
    }
    CHECK(ks < 1.628 / std::sqrt(n));
}

TEST_CASE("observe leaves the path untouched") {
    const auto g = build_grid(0.0, 1.0, 11);
    const auto path = simulate_sde1({0.3, Vec2::Zero(), 1.0}, g, 1);
    const Positions before = path.positions();
    observe(path, g.times(), {0.5, false}, 2);
    CHECK(path.positions() == before);
}
