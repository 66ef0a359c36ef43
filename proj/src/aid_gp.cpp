#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>

#include "optim.hpp"
#include "procimp/aid.hpp"
#include "procimp/rng.hpp"

namespace procimp {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

Eigen::MatrixXd se_kernel(std::span<const double> a, std::span<const double> b, double range,
                          double amplitude) {
    Eigen::MatrixXd K(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(b.size()));
    const double inv = 1.0 / (2.0 * range * range);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) {
            const double d = a[i] - b[j];
            K(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = amplitude * std::exp(-d * d * inv);
        }
    return K;
}

Eigen::MatrixX2d centered(const Telemetry& data, const Vec2& mean) {
    Eigen::MatrixX2d y = data.locations();
    y.rowwise() -= mean.transpose();
    return y;
}

// Log-likelihood pieces for covariance A (shared by both columns of y).
struct GaussTerms {
    double quad = 0.0;    // sum over columns of y' A^{-1} y
    double logdet = 0.0;  // log |A|
    double jitter = 0.0;
};

GaussTerms gauss_terms(const Eigen::MatrixXd& A, const Eigen::MatrixX2d& y, double scale) {
    GaussTerms t;
    const Eigen::MatrixXd L = jittered_cholesky(A, scale, &t.jitter);
    const Eigen::MatrixX2d z = L.triangularView<Eigen::Lower>().solve(y);
    t.quad = z.squaredNorm();
    t.logdet = 2.0 * L.diagonal().array().log().sum();
    return t;
}

}  // namespace

double GpAidParams::covariance(double t1, double t2) const {
    const double d = t1 - t2;
    return amplitude * std::exp(-d * d / (2.0 * range * range));
}

nlohmann::json GpAidParams::to_json() const {
    return {{"range", range}, {"amplitude", amplitude}, {"tau_sq", tau_sq}, {"mean", {mean.x(), mean.y()}}};
}

Eigen::MatrixXd jittered_cholesky(const Eigen::MatrixXd& A, double scale, double* jitter_used) {
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    double jitter = 0.0;
    if (llt.info() != Eigen::Success) {
        const Eigen::Index n = A.rows();
        for (double rel = 1e-8; rel <= 1e-4 * (1 + 1e-9); rel *= 10.0) {
            jitter = rel * scale;
            llt.compute(A + jitter * Eigen::MatrixXd::Identity(n, n));
            if (llt.info() == Eigen::Success) break;
        }
        if (llt.info() != Eigen::Success)
            throw NumericalError("covariance is not positive definite even with 1e-4 relative jitter");
    }
    if (jitter_used) *jitter_used = jitter;
    return llt.matrixL();
}

double gp_loglik(const GpAidParams& params, const Telemetry& data, double* jitter_used) {
    Eigen::MatrixXd A = se_kernel(data.times(), data.times(), params.range, params.amplitude);
    A.diagonal().array() += params.tau_sq;
    const auto t = gauss_terms(A, centered(data, params.mean), params.amplitude);
    if (jitter_used) *jitter_used = t.jitter;
    const double n = static_cast<double>(data.size());
    return -0.5 * t.quad - t.logdet - n * kLog2Pi;
}

GpFit fit_gp_aid(const Telemetry& data, const GpFitOptions& options) {
    require(data.size() >= 4, "GP AID fit needs at least four observations");
    require(!options.fix_tau_sq || options.tau_sq >= 0.0, "fixed tau^2 must be nonnegative");
    const auto times = data.times();
    const double n = static_cast<double>(data.size());
    const Vec2 mean = data.locations().colwise().mean().transpose();
    const Eigen::MatrixX2d y = centered(data, mean);
    const double var = std::max(y.squaredNorm() / (2.0 * n), 1e-12);

    double min_dt = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < times.size(); ++i) min_dt = std::min(min_dt, times[i] - times[i - 1]);
    const double span = times.back() - times.front();

    const Eigen::MatrixXd D2 = [&] {
        Eigen::MatrixXd d(times.size(), times.size());
        for (std::size_t i = 0; i < times.size(); ++i)
            for (std::size_t j = 0; j < times.size(); ++j) {
                const double dd = times[i] - times[j];
                d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = dd * dd;
            }
        return d;
    }();
    auto correlation = [&](double range) {
        return Eigen::MatrixXd((-D2.array() / (2.0 * range * range)).exp());
    };

    // Free tau^2: x = (log range, log lambda), lambda = tau^2 / amplitude, amplitude profiled out.
    // Fixed tau^2: x = (log range, log amplitude).
    const bool free_tau = !options.fix_tau_sq;
    auto evaluate = [&](const Eigen::VectorXd& x, GpAidParams* out, double* jitter) {
        if ((x.array().abs() > 60.0).any()) return std::numeric_limits<double>::infinity();
        GpAidParams p;
        p.mean = mean;
        p.range = std::exp(x(0));
        Eigen::MatrixXd R = correlation(p.range);
        double ll;
        GaussTerms t;
        if (free_tau) {
            const double lambda = std::exp(x(1));
            R.diagonal().array() += lambda;
            t = gauss_terms(R, y, 1.0);
            p.amplitude = t.quad / (2.0 * n);
            p.tau_sq = lambda * p.amplitude;
            ll = -n * std::log(p.amplitude) - t.logdet - n - n * kLog2Pi;
        } else {
            p.amplitude = std::exp(x(1));
            p.tau_sq = options.tau_sq;
            R *= p.amplitude;
            R.diagonal().array() += p.tau_sq;
            t = gauss_terms(R, y, p.amplitude);
            ll = -0.5 * t.quad - t.logdet - n * kLog2Pi;
        }
        if (out) *out = p;
        if (jitter) *jitter = t.jitter;
        return -ll;
    };
    auto objective = [&](const Eigen::VectorXd& x) {
        try {
            return evaluate(x, nullptr, nullptr);
        } catch (const NumericalError&) {
            return std::numeric_limits<double>::infinity();
        }
    };

    const int g = std::max(2, options.grid_points);
    const double r_lo = std::log(std::max(min_dt, 1e-9)), r_hi = std::log(std::max(span / 2.0, min_dt * 2));
    const double s_lo = free_tau ? std::log(1e-8) : std::log(var * 1e-2);
    const double s_hi = free_tau ? std::log(1.0) : std::log(var * 1e2);
    Eigen::VectorXd best_x(2);
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < g; ++i)
        for (int j = 0; j < g; ++j) {
            Eigen::VectorXd x(2);
            x(0) = r_lo + (r_hi - r_lo) * i / (g - 1);
            x(1) = s_lo + (s_hi - s_lo) * j / (g - 1);
            const double v = objective(x);
            if (v < best) {
                best = v;
                best_x = x;
            }
        }
    require(std::isfinite(best), "GP AID likelihood could not be evaluated on the search grid");
    const double step = std::max((r_hi - r_lo) / (g - 1), 0.1) / 2;
    auto res = detail::nelder_mead(objective, best_x, step, options.max_iter, options.tol);
    if (res.value > best) res.x = best_x;

    GpFit fit;
    double jitter = 0.0;
    fit.loglik = -evaluate(res.x, &fit.params, &jitter);
    fit.jitter = jitter;
    if (!res.converged) fit.warnings.emplace_back("GP AID local search hit the iteration limit");
    if (jitter > 0.0) fit.warnings.emplace_back("observation covariance required diagonal jitter");
    return fit;
}

GpConditional gp_conditional(const GpAidParams& params, const Telemetry& data, const TrajectoryGrid& grid) {
    const auto tg = grid.times();
    const auto to = data.times();
    Eigen::MatrixXd Koo = se_kernel(to, to, params.range, params.amplitude);
    Koo.diagonal().array() += params.tau_sq;
    const Eigen::MatrixXd L = jittered_cholesky(Koo, params.amplitude);
    const Eigen::MatrixXd Kog = se_kernel(to, tg, params.range, params.amplitude);
    const Eigen::MatrixXd V = L.triangularView<Eigen::Lower>().solve(Kog);  // n x m
    const Eigen::MatrixX2d z = L.triangularView<Eigen::Lower>().solve(centered(data, params.mean));

    GpConditional c;
    c.mean = V.transpose() * z;
    c.mean.rowwise() += params.mean.transpose();
    c.cov = se_kernel(tg, tg, params.range, params.amplitude);
    c.cov.noalias() -= V.transpose() * V;
    c.cov = 0.5 * (c.cov + c.cov.transpose());
    return c;
}

ImputationSet draw_gp_paths(const GpAidParams& params, const Telemetry& data, const TrajectoryGrid& grid,
                            std::size_t K, std::uint64_t seed) {
    require(K >= 1, "need at least one draw");
    locate_times(grid, data.times());  // grid must contain the observation times
    const auto cond = gp_conditional(params, data, grid);
    double jitter = 0.0;
    const Eigen::MatrixXd L = jittered_cholesky(cond.cov, params.amplitude, &jitter);
    const auto m = static_cast<Eigen::Index>(grid.size());

    ImputationSet set;
    set.grid = grid;
    set.aid = "GP";
    set.params = params.to_json();
    set.params["draw_jitter"] = jitter;
    set.seed = seed;
    set.mean = cond.mean;
    set.draws.resize(K);

#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(K); ++k) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(k)));
        Eigen::MatrixX2d z(m, 2);
        for (Eigen::Index j = 0; j < m; ++j) {
            z(j, 0) = std_normal(rng);
            z(j, 1) = std_normal(rng);
        }
        Positions draw = cond.mean;
        draw.noalias() += L.triangularView<Eigen::Lower>() * z;
        set.draws[static_cast<std::size_t>(k)] = std::move(draw);
    }
    return set;
}

}  // namespace procimp
