#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Cholesky>

#include "optim.hpp"
#include "procimp/aid.hpp"
#include "procimp/rng.hpp"

namespace procimp {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

// Sample from N(mean, cov) for a possibly singular 2x2 covariance.
Eigen::Matrix2d psd_factor(const Eigen::Matrix2d& cov) {
    Eigen::Matrix2d L = Eigen::Matrix2d::Zero();
    const double a = cov(0, 0);
    if (a > 0.0) {
        L(0, 0) = std::sqrt(a);
        L(1, 0) = cov(1, 0) / L(0, 0);
        L(1, 1) = std::sqrt(std::max(0.0, cov(1, 1) - L(1, 0) * L(1, 0)));
    } else {
        L(1, 1) = std::sqrt(std::max(0.0, cov(1, 1)));
    }
    return L;
}

// Forward pass over the merged grid. State mean is 2x2: rows (position, velocity), cols (x, y).
// Covariances are shared by both coordinates.
struct ForwardPass {
    std::vector<Eigen::Matrix2d> mean;       // filtered
    std::vector<Eigen::Matrix2d> cov;        // filtered
    std::vector<Eigen::Matrix2d> pred_cov;   // predicted at j given j-1 (j >= 1)
    std::vector<Eigen::Matrix2d> F;          // transition into j (j >= 1)
    double loglik = 0.0;
};

ForwardPass forward_filter(const OuAidParams& p, const Telemetry& data, const TrajectoryGrid& grid,
                           const std::vector<std::ptrdiff_t>& obs_at) {
    const std::size_t m = grid.size();
    ForwardPass fp;
    fp.mean.resize(m);
    fp.cov.resize(m);
    fp.pred_cov.resize(m);
    fp.F.resize(m);

    Eigen::Matrix2d mean;
    mean.row(0) = data.locations().row(0);
    mean.row(1).setZero();
    Eigen::Matrix2d P = Eigen::Matrix2d::Zero();
    P(0, 0) = p.init_position_var;
    P(1, 1) = p.stationary_velocity_var();

    for (std::size_t j = 0; j < m; ++j) {
        if (j > 0) {
            const auto tr = ou_transition(p.theta, p.sigma, grid.dt(j));
            mean = tr.F * mean;
            P = tr.F * P * tr.F.transpose() + tr.Q;
            fp.F[j] = tr.F;
            fp.pred_cov[j] = P;
        }
        if (obs_at[j] >= 0) {
            const double S = P(0, 0) + p.tau_sq;
            const Eigen::RowVector2d y = data.locations().row(obs_at[j]);
            const Eigen::RowVector2d innov = y - mean.row(0);
            fp.loglik += -(kLog2Pi + std::log(S)) - 0.5 * innov.squaredNorm() / S;
            const Eigen::Vector2d gain = P.col(0) / S;
            mean += gain * innov;
            P -= gain * P.row(0);
            P = 0.5 * (P + P.transpose());
            if (p.tau_sq == 0.0) {
                // exact conditioning: position known, cross-covariance vanishes
                P(0, 0) = 0.0;
                P(0, 1) = P(1, 0) = 0.0;
                mean.row(0) = y;
            }
        }
        fp.mean[j] = mean;
        fp.cov[j] = P;
    }
    return fp;
}

std::vector<std::ptrdiff_t> obs_lookup(const TrajectoryGrid& grid, const Telemetry& data) {
    std::vector<std::ptrdiff_t> obs_at(grid.size(), -1);
    const auto idx = locate_times(grid, data.times());
    for (std::size_t i = 0; i < idx.size(); ++i) obs_at[idx[i]] = static_cast<std::ptrdiff_t>(i);
    return obs_at;
}

// Backward-recursion coefficients: x_j | x_{j+1} ~ N(m_j + J_j (x_{j+1} - F m_j), C_j).
struct BackwardCoefs {
    std::vector<Eigen::Matrix2d> J;
    std::vector<Eigen::Matrix2d> L;  // factor of C_j
};

BackwardCoefs backward_coefs(const ForwardPass& fp) {
    const std::size_t m = fp.mean.size();
    BackwardCoefs bc;
    bc.J.resize(m);
    bc.L.resize(m);
    bc.L[m - 1] = psd_factor(fp.cov[m - 1]);
    for (std::size_t j = m - 1; j-- > 0;) {
        const Eigen::Matrix2d& P = fp.cov[j];
        const Eigen::Matrix2d& Pp = fp.pred_cov[j + 1];
        const Eigen::Matrix2d& F = fp.F[j + 1];
        const Eigen::Matrix2d Jt = Pp.ldlt().solve(F * P);  // J' since P, Pp symmetric
        bc.J[j] = Jt.transpose();
        Eigen::Matrix2d C = P - bc.J[j] * F * P;
        C = 0.5 * (C + C.transpose());
        bc.L[j] = psd_factor(C);
    }
    return bc;
}

double initial_position_var(const Telemetry& data) {
    double ss = 0.0;
    for (std::size_t i = 1; i < data.size(); ++i)
        ss += (data.location(i) - data.location(i - 1)).squaredNorm();
    const double v = ss / (2.0 * static_cast<double>(data.size() - 1));
    return v > 0.0 ? v : 1.0;
}

}  // namespace

nlohmann::json OuAidParams::to_json() const {
    return {{"theta", theta}, {"sigma", sigma}, {"tau_sq", tau_sq}, {"init_position_var", init_position_var}};
}

OuTransition ou_transition(double theta, double sigma, double dt) {
    const double x = theta * dt;
    const double one_m_e = -std::expm1(-x);
    const double e = 1.0 - one_m_e;
    const double s2 = sigma * sigma;
    OuTransition tr;
    tr.F << 1.0, one_m_e / theta, 0.0, e;
    const double qvv = s2 * -std::expm1(-2.0 * x) / (2.0 * theta);
    const double qxv = s2 * one_m_e * one_m_e / (2.0 * theta * theta);
    double qxx;
    if (x < 1e-3) {
        qxx = s2 * dt * dt * dt / 3.0 * (1.0 - 0.75 * x + 0.35 * x * x - 0.125 * x * x * x);
    } else {
        qxx = s2 / (theta * theta * theta) * (x - 2.0 * one_m_e - 0.5 * std::expm1(-2.0 * x));
    }
    tr.Q << qxx, qxv, qxv, qvv;
    return tr;
}

double ou_loglik(const OuAidParams& params, const Telemetry& data) {
    const TrajectoryGrid grid(std::vector<double>(data.times().begin(), data.times().end()));
    std::vector<std::ptrdiff_t> obs_at(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) obs_at[i] = static_cast<std::ptrdiff_t>(i);
    return forward_filter(params, data, grid, obs_at).loglik;
}

OuAidParams fit_ou_aid(const Telemetry& data, const OuFitOptions& options) {
    require(data.size() >= 4, "OU AID fit needs at least four observations");
    require(!options.fix_tau_sq || options.tau_sq >= 0.0, "fixed tau^2 must be nonnegative");

    // Moment-based starting point.
    std::vector<double> dts;
    double step_rate = 0.0;
    for (std::size_t i = 1; i < data.size(); ++i) {
        const double dt = data.times()[i] - data.times()[i - 1];
        dts.push_back(dt);
        step_rate += (data.location(i) - data.location(i - 1)).squaredNorm() / (2.0 * dt);
    }
    step_rate /= static_cast<double>(dts.size());
    std::nth_element(dts.begin(), dts.begin() + static_cast<std::ptrdiff_t>(dts.size() / 2), dts.end());
    const double theta0 = 1.0 / dts[dts.size() / 2];
    const double sigma0 = theta0 * std::sqrt(std::max(step_rate, 1e-12));
    const double tau0 = 0.05 * step_rate * dts[dts.size() / 2] + 1e-12;
    const double p0 = initial_position_var(data);

    const bool free_tau = !options.fix_tau_sq;
    auto unpack = [&](const Eigen::VectorXd& x) {
        OuAidParams p;
        p.theta = std::exp(x(0));
        p.sigma = std::exp(x(1));
        p.tau_sq = free_tau ? std::exp(x(2)) : options.tau_sq;
        p.init_position_var = p0;
        return p;
    };
    auto objective = [&](const Eigen::VectorXd& x) {
        if ((x.array().abs() > 40.0).any()) return std::numeric_limits<double>::infinity();
        return -ou_loglik(unpack(x), data);
    };

    Eigen::VectorXd start(free_tau ? 3 : 2);
    start(0) = std::log(theta0);
    start(1) = std::log(sigma0);
    if (free_tau) start(2) = std::log(tau0);

    Rng rng(options.seed);
    detail::SimplexResult best;
    best.value = std::numeric_limits<double>::infinity();
    bool any_converged = false;
    for (int r = 0; r < std::max(1, options.restarts); ++r) {
        Eigen::VectorXd x0 = start;
        if (r > 0)
            for (Eigen::Index i = 0; i < x0.size(); ++i) x0(i) += std_normal(rng);
        auto res = detail::nelder_mead(objective, x0, 0.5, options.max_iter, options.tol);
        // polish from the end point
        if (res.converged) res = detail::nelder_mead(objective, res.x, 0.1, options.max_iter, options.tol);
        // converged restarts always beat unconverged ones
        const bool better = res.converged != any_converged ? res.converged : res.value < best.value;
        if (better) best = res;
        any_converged = any_converged || res.converged;
    }
    const OuAidParams fitted = unpack(best.x);
    if (!any_converged)
        throw OuFitError("OU AID likelihood maximization did not converge", fitted);
    return fitted;
}

OuSmoothed ou_smooth(const OuAidParams& params, const Telemetry& data, const TrajectoryGrid& grid) {
    const auto obs_at = obs_lookup(grid, data);
    const auto fp = forward_filter(params, data, grid, obs_at);
    const auto bc = backward_coefs(fp);
    const std::size_t m = grid.size();
    OuSmoothed out;
    out.mean.resize(static_cast<Eigen::Index>(m), 2);
    out.filtered_mean.resize(static_cast<Eigen::Index>(m), 2);
    out.position_var.resize(static_cast<Eigen::Index>(m));
    Eigen::Matrix2d ms = fp.mean[m - 1];
    Eigen::Matrix2d Ps = fp.cov[m - 1];
    for (std::size_t j = m; j-- > 0;) {
        if (j + 1 < m) {
            const Eigen::Matrix2d& F = fp.F[j + 1];
            const Eigen::Matrix2d pred_mean = F * fp.mean[j];
            ms = fp.mean[j] + bc.J[j] * (ms - pred_mean);
            Ps = fp.cov[j] + bc.J[j] * (Ps - fp.pred_cov[j + 1]) * bc.J[j].transpose();
        }
        const auto jj = static_cast<Eigen::Index>(j);
        out.mean.row(jj) = ms.row(0);
        out.position_var(jj) = std::max(0.0, Ps(0, 0));
        out.filtered_mean.row(jj) = fp.mean[j].row(0);
    }
    return out;
}

ImputationSet draw_ou_paths(const OuAidParams& params, const Telemetry& data, const TrajectoryGrid& grid,
                            std::size_t K, std::uint64_t seed) {
    require(K >= 1, "need at least one draw");
    const auto obs_at = obs_lookup(grid, data);
    const auto fp = forward_filter(params, data, grid, obs_at);
    const auto bc = backward_coefs(fp);
    const std::size_t m = grid.size();

    ImputationSet set;
    set.grid = grid;
    set.aid = "OU";
    set.params = params.to_json();
    set.seed = seed;
    set.draws.resize(K);
    set.mean = ou_smooth(params, data, grid).mean;

#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(K); ++k) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(k)));
        Positions pos(static_cast<Eigen::Index>(m), 2);
        Eigen::Matrix2d x;  // rows (position, velocity), cols (x, y)
        auto sample = [&](const Eigen::Matrix2d& mean, const Eigen::Matrix2d& L) {
            Eigen::Matrix2d z;
            z.col(0) = normal2(rng);
            z.col(1) = normal2(rng);
            return Eigen::Matrix2d(mean + L * z);
        };
        x = sample(fp.mean[m - 1], bc.L[m - 1]);
        pos.row(static_cast<Eigen::Index>(m - 1)) = x.row(0);
        for (std::size_t j = m - 1; j-- > 0;) {
            const Eigen::Matrix2d cond_mean = fp.mean[j] + bc.J[j] * (x - fp.F[j + 1] * fp.mean[j]);
            x = sample(cond_mean, bc.L[j]);
            pos.row(static_cast<Eigen::Index>(j)) = x.row(0);
        }
        set.draws[static_cast<std::size_t>(k)] = std::move(pos);
    }
    return set;
}

}  // namespace procimp
