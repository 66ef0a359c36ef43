#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "procimp/error.hpp"
#include "procimp/evaluate.hpp"
#include "procimp/simulate.hpp"

using namespace procimp;

namespace {

ChainOutput chain_with_alpha(const Eigen::MatrixXd& alpha) {
    ChainOutput c;
    c.alpha = alpha;
    c.sigma_v_sq.assign(static_cast<std::size_t>(alpha.rows()), 1.0);
    c.sigma_s_sq.assign(static_cast<std::size_t>(alpha.rows()), 1.0);
    return c;
}

}  // namespace

TEST_CASE("type-7 quantiles") {
    std::vector<double> x(100);
    std::iota(x.begin(), x.end(), 1.0);
    CHECK(quantile(x, 0.025) == doctest::Approx(3.475));
    CHECK(quantile(x, 0.975) == doctest::Approx(97.525));
    CHECK(quantile(x, 0.0) == 1.0);
    CHECK(quantile(x, 1.0) == 100.0);
    CHECK(quantile({4.0, 1.0, 3.0, 2.0}, 0.5) == doctest::Approx(2.5));
    CHECK_THROWS_AS(quantile({}, 0.5), ValidationError);
}

TEST_CASE("band from samples 1..100 and from identical samples") {
    Eigen::MatrixXd alpha(100, 1);
    for (int i = 0; i < 100; ++i) alpha(i, 0) = i + 1.0;
    const Eigen::MatrixXd W = Eigen::MatrixXd::Ones(2, 1);
    const std::vector<double> t{0.0, 1.0};
    const auto band = band_from_chain(chain_with_alpha(alpha), W, t);
    CHECK(band.lower[0] == doctest::Approx(3.475));
    CHECK(band.upper[1] == doctest::Approx(97.525));

    const auto flat = band_from_chain(chain_with_alpha(Eigen::MatrixXd::Constant(150, 1, 0.3)), W, t);
    CHECK(flat.lower[0] == doctest::Approx(0.3));
    CHECK(flat.upper[0] == doctest::Approx(0.3));

    CHECK_THROWS_AS(band_from_chain(chain_with_alpha(Eigen::MatrixXd::Ones(99, 1)), W, t), ValidationError);
}

TEST_CASE("band of Gaussian samples is mean +- 1.96 sd") {
    Rng rng(1);
    Eigen::MatrixXd alpha(100000, 2);
    for (Eigen::Index i = 0; i < alpha.rows(); ++i) alpha.row(i) << 1.0 + 2.0 * std_normal(rng), std_normal(rng);
    Eigen::MatrixXd W(1, 2);
    W << 1.0, 0.0;
    const auto band = band_from_chain(chain_with_alpha(alpha), W, std::vector<double>{0.0});
    CHECK(std::abs(band.lower[0] - (1.0 - 1.959964 * 2.0)) < 0.05 * std::abs(1.0 - 1.959964 * 2.0));
    CHECK(std::abs(band.upper[0] - (1.0 + 1.959964 * 2.0)) < 0.05 * (1.0 + 1.959964 * 2.0));
}

TEST_CASE("coverage and detection: worked example") {
    IntervalBand band;
    band.times = {0, 1, 2, 3};
    band.lower = {0.5, -0.5, 0.5, -1.0};
    band.upper = {1.5, 1.5, 1.5, 1.0};
    const std::vector<double> truth{1.0, 1.0, -1.0, 0.0};
    const auto cd = coverage_detection(band, truth);
    CHECK(cd.coverage == 0.75);
    CHECK(cd.detection == 0.25);

    const std::vector<double> all_in{1.0, 1.2, 0.9, 0.7};
    band.lower = {0.5, 0.5, 0.5, 0.5};
    CHECK(coverage_detection(band, all_in).coverage == 1.0);
    CHECK(coverage_detection(band, all_in).detection == 1.0);
    CHECK_THROWS_AS(coverage_detection(band, std::vector<double>{1.0}), ValidationError);
}

TEST_CASE("detection never exceeds coverage; sign flip invariance (1000 random cases)") {
    Rng rng(7);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t m = 1 + static_cast<std::size_t>(uniform01(rng) * 20);
        IntervalBand band, flipped;
        std::vector<double> truth(m), neg(m);
        for (std::size_t j = 0; j < m; ++j) {
            const double a = 2.0 * std_normal(rng), b = 2.0 * std_normal(rng);
            band.times.push_back(static_cast<double>(j));
            band.lower.push_back(std::min(a, b));
            band.upper.push_back(std::max(a, b));
            truth[j] = uniform01(rng) < 0.1 ? 0.0 : 2.0 * std_normal(rng);
            neg[j] = -truth[j];
            flipped.times.push_back(static_cast<double>(j));
            flipped.lower.push_back(-std::max(a, b));
            flipped.upper.push_back(-std::min(a, b));
        }
        const auto cd = coverage_detection(band, truth);
        const auto cf = coverage_detection(flipped, neg);
        CHECK(cd.detection <= cd.coverage);
        CHECK(cd.coverage == cf.coverage);
        CHECK(cd.detection == cf.detection);
    }
}

TEST_CASE("scalar coverage") {
    ChainOutput c;
    c.sigma_s_sq.assign(200, 0.5);
    CHECK(scalar_coverage(c, "sigma_s_sq", 0.5));
    Rng rng(2);
    c.sigma_s_sq.clear();
    for (int i = 0; i < 1000; ++i) c.sigma_s_sq.push_back(std_normal(rng));
    CHECK_FALSE(scalar_coverage(c, "sigma_s_sq", 10.0));

    int covered = 0;
    for (int r = 0; r < 400; ++r) {
        ChainOutput d;
        const double shift = std_normal(rng);  // posterior centred on a noisy estimate of 0
        for (int i = 0; i < 400; ++i) d.beta.push_back(shift + std_normal(rng));
        d.sigma_s_sq = d.beta;
        covered += scalar_coverage(d, "beta", 0.0);
    }
    CHECK(std::abs(covered / 400.0 - 0.95) < 3.0 * std::sqrt(0.95 * 0.05 / 400.0) + 0.01);
}

TEST_CASE("Gelman-Rubin: hand computation and degenerate cases") {
    const std::vector<std::vector<double>> c{{1.0, 2.0, 3.0}, {2.0, 4.0, 6.0}};
    // W = (1 + 4)/2, B = 3 * ((2-3)^2 + (4-3)^2) / 1
    CHECK(std::abs(gelman_rubin(c).rhat - std::sqrt(22.0 / 15.0)) < 1e-12);
    CHECK_FALSE(gelman_rubin(c).warning);

    const std::vector<std::vector<double>> same{{1.0, 2.0, 4.0}, {1.0, 2.0, 4.0}};
    CHECK(std::abs(gelman_rubin(same).rhat - std::sqrt(2.0 / 3.0)) < 1e-12);

    const std::vector<std::vector<double>> flat{{1.0, 1.0}, {2.0, 2.0}};
    const auto r = gelman_rubin(flat);
    CHECK(std::isinf(r.rhat));
    CHECK(r.warning);

    CHECK_THROWS_AS(gelman_rubin(std::vector<std::vector<double>>{{1.0, 2.0}}), ValidationError);
    CHECK_THROWS_AS(gelman_rubin(std::vector<std::vector<double>>{{1.0, 2.0}, {1.0}}), ValidationError);
}

TEST_CASE("Gelman-Rubin near 1 for independent draws from the same target") {
    Rng rng(3);
    std::vector<std::vector<double>> c(2);
    for (auto& ch : c)
        for (int i = 0; i < 10000; ++i) ch.push_back(std_normal(rng));
    CHECK(gelman_rubin(c).rhat < 1.1);
}

TEST_CASE("DIC with constant deviance") {
    const std::vector<double> d(50, 12.5);
    const auto r = dic(d, 12.5);
    CHECK(r.p_d == 0.0);
    CHECK(r.dic == 12.5);
}

TEST_CASE("EvalReport rejects detection above coverage") {
    EvalReport r;
    r.coverage = 0.4;
    r.detection = 0.3;
    CHECK_NOTHROW(r.check());
    r.detection = 0.5;
    CHECK_THROWS_AS(r.check(), NumericalError);
    const auto j = r.to_json();
    CHECK(j["coverage"] == 0.4);
}
