#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "procimp/complete_data.hpp"
#include "procimp/simulate.hpp"

using namespace procimp;

namespace {

struct Fixture {
    TrajectoryGrid g = merge_grid(build_grid(0.0, 20.0, 150), std::vector<double>{3.3, 11.1}).grid;
    Eigen::MatrixXd W = basis_matrix(uniform_basis(g, 4, 3, 1.0), g);
    Vec2 c{0.5, -0.5};
    LatentPath path;
    Fixture() {
        Sde2Params p;
        p.potential = AttractorPotential(c, 0.4);
        p.mu0 = Vec2(3.0, 1.0);
        path = simulate_sde2(p, g, 17);
    }
};

}  // namespace

TEST_CASE("second-order stats reproduce the direct likelihood (path with velocities)") {
    Fixture f;
    const auto s = second_order_stats(f.path, f.W, f.c);
    CHECK(s.transitions == f.g.size() - 1);
    for (double sv2 : {0.3, 1.0, 2.5}) {
        Eigen::VectorXd alpha = Eigen::VectorXd::LinSpaced(f.W.cols(), -0.5, 1.0) * sv2;
        const ProcessParams pp(alpha, f.W, sv2);
        const double direct = oracle::sde2_loglik(f.path.positions(), *f.path.velocities(), s.transitions, f.g,
                                                 pp.beta_grid(), sv2, f.c);
        CHECK(std::abs(s.loglik(alpha, sv2) - direct) < 1e-8 * std::abs(direct));
        CHECK(std::abs(complete_data_loglik(f.path, pp, f.c) - direct) < 1e-8 * std::abs(direct));
    }
}

TEST_CASE("second-order stats with derived velocities drop the last transition") {
    Fixture f;
    const LatentPath bare(f.g, f.path.positions());
    const auto s = second_order_stats(bare, f.W, f.c);
    CHECK(s.transitions == f.g.size() - 2);
    const auto v = *velocities_from_path(bare).velocities();
    Eigen::VectorXd alpha = Eigen::VectorXd::Constant(f.W.cols(), 0.2);
    const ProcessParams pp(alpha, f.W, 0.8);
    const double direct = oracle::sde2_loglik(bare.positions(), v, s.transitions, f.g, pp.beta_grid(), 0.8, f.c);
    CHECK(std::abs(s.loglik(alpha, 0.8) - direct) < 1e-8 * std::abs(direct));
}

TEST_CASE("forward-difference velocities recover the simulated Euler velocities") {
    Fixture f;
    const auto v = *velocities_from_path(LatentPath(f.g, f.path.positions())).velocities();
    const auto& truth = *f.path.velocities();
    CHECK((v.topRows(v.rows() - 1) - truth.topRows(v.rows() - 1)).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("parallel and serial batch statistics agree") {
    Fixture f;
    std::vector<Positions> draws;
    for (std::uint64_t k = 0; k < 7; ++k) {
        Sde2Params p;
        p.potential = AttractorPotential(f.c, 0.1 * static_cast<double>(k));
        draws.push_back(simulate_sde2(p, f.g, k).positions());
    }
    ImputationSet set;
    set.grid = f.g;
    set.draws = draws;
    set.mean = draws[0];
    const auto a = second_order_stats(set, f.W, f.c);
    const auto b = second_order_stats_serial(set, f.W, f.c);
    REQUIRE(a.size() == b.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
        CHECK(a[k].saa == b[k].saa);
        CHECK(a[k].sab == b[k].sab);
        CHECK(a[k].G == b[k].G);
        CHECK(a[k].ga == b[k].ga);
    }
    const auto p = first_order_stats(set, f.c);
    const auto q = first_order_stats_serial(set, f.c);
    for (std::size_t k = 0; k < p.size(); ++k) {
        CHECK(p[k].info == q[k].info);
        CHECK(p[k].score == q[k].score);
        CHECK(p[k].ssq == q[k].ssq);
    }
}

TEST_CASE("first-order stats reproduce the direct likelihood") {
    const auto g = merge_grid(build_grid(0.0, 50.0, 300), std::vector<double>{0.77}).grid;
    const Vec2 c(1.0, 2.0);
    const auto path = simulate_sde1({0.5, c, 100.0}, g, 4);
    const auto s = first_order_stats(path.positions(), g, c);
    CHECK(s.transitions == g.size() - 1);
    for (double beta : {-1.0, 0.0, 0.5, 3.0}) {
        double direct = 0.0;
        for (std::size_t j = 0; j + 1 < g.size(); ++j) {
            const double dt = g.dt(j + 1);
            const Vec2 d = path.position(j) - c;
            const Eigen::VectorXd m = path.position(j) - beta * dt * d / d.norm();
            const Eigen::VectorXd y = path.position(j + 1);
            direct += oracle::mvn_logpdf(y, m, Eigen::Matrix2d::Identity() * dt);
        }
        CHECK(std::abs(s.loglik(beta) - direct) < 1e-9 * std::abs(direct));
        CHECK(std::abs(first_order_loglik(path, beta, c) - direct) < 1e-9 * std::abs(direct));
    }
}

TEST_CASE("residual_ss sums squared distances at the observation times") {
    const auto g = build_grid(0.0, 4.0, 5);
    Positions mu(5, 2);
    mu << 0, 0, 1, 1, 2, 2, 3, 3, 4, 4;
    Positions s(2, 2);
    s << 1, 2, 4, 3;
    const Telemetry d({1.0, 3.0}, s);
    const std::vector<std::size_t> idx{1, 3};
    CHECK(residual_ss(mu, d, idx) == doctest::Approx(1.0 + 1.0));

    ImputationSet set;
    set.grid = g;
    set.draws = {mu, mu * 0.0};
    set.mean = mu;
    const auto r = residual_ss(set, d);
    CHECK(r[0] == doctest::Approx(2.0));
    CHECK(r[1] == doctest::Approx(1 + 4 + 16 + 9));
}
