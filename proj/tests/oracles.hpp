#pragma once

// Independent reference computations used by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <unsupported/Eigen/MatrixFunctions>

#include "procimp/core.hpp"

namespace oracle {

constexpr double kLog2Pi = 1.8378770664093453;

/// Integrated-OU transition by Van Loan's matrix-exponential construction.
/// State (position, velocity), dv = -theta v dt + sigma dW.
inline void van_loan(double theta, double sigma, double dt, Eigen::Matrix2d& F, Eigen::Matrix2d& Q) {
    Eigen::Matrix2d A;
    A << 0.0, 1.0, 0.0, -theta;
    Eigen::Matrix2d LL = Eigen::Matrix2d::Zero();
    LL(1, 1) = sigma * sigma;
    Eigen::Matrix4d M = Eigen::Matrix4d::Zero();
    M.topLeftCorner<2, 2>() = -A * dt;
    M.topRightCorner<2, 2>() = LL * dt;
    M.bottomRightCorner<2, 2>() = A.transpose() * dt;
    const Eigen::Matrix4d E = M.exp();
    F = E.bottomRightCorner<2, 2>().transpose();
    Q = F * E.topRightCorner<2, 2>();
    Q = 0.5 * (Q + Q.transpose());
}

/// Joint covariance of positions at `times` for the integrated OU started at times[0]
/// with state covariance diag(p0, sigma^2 / (2 theta)), assembled by brute-force propagation.
inline Eigen::MatrixXd ou_position_cov(double theta, double sigma, double p0, const std::vector<double>& times) {
    const std::size_t n = times.size();
    std::vector<Eigen::Matrix2d> Fs(n), Ps(n);
    Ps[0] = Eigen::Matrix2d::Zero();
    Ps[0](0, 0) = p0;
    Ps[0](1, 1) = sigma * sigma / (2.0 * theta);
    Fs[0].setIdentity();
    for (std::size_t i = 1; i < n; ++i) {
        Eigen::Matrix2d Q;
        van_loan(theta, sigma, times[i] - times[i - 1], Fs[i], Q);
        Ps[i] = Fs[i] * Ps[i - 1] * Fs[i].transpose() + Q;
    }
    Eigen::MatrixXd C(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        Eigen::Matrix2d cross = Ps[i];  // Cov(x_j, x_i) for j >= i, built forward
        C(i, i) = cross(0, 0);
        for (std::size_t j = i + 1; j < n; ++j) {
            cross = Fs[j] * cross;
            C(j, i) = C(i, j) = cross(0, 0);
        }
    }
    return C;
}

/// log N(y; mu, C) for one coordinate.
inline double mvn_logpdf(const Eigen::VectorXd& y, const Eigen::VectorXd& mu, const Eigen::MatrixXd& C) {
    const Eigen::LLT<Eigen::MatrixXd> llt(C);
    const Eigen::VectorXd r = y - mu;
    const Eigen::VectorXd z = llt.matrixL().solve(r);
    double logdet = 0.0;
    for (Eigen::Index i = 0; i < C.rows(); ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i));
    return -0.5 * (static_cast<double>(y.size()) * kLog2Pi + logdet + z.squaredNorm());
}

/// Second-order Euler transition log-likelihood summed over the first `transitions` steps,
/// written directly as bivariate normal densities of the next velocity.
inline double sde2_loglik(const Eigen::MatrixX2d& mu, const Eigen::MatrixX2d& v, std::size_t transitions,
                          const procimp::TrajectoryGrid& g, const Eigen::VectorXd& beta, double sigma_v_sq,
                          const Eigen::Vector2d& c) {
    double ll = 0.0;
    const double sv = std::sqrt(sigma_v_sq);
    for (std::size_t j = 0; j < transitions; ++j) {
        const auto r = static_cast<Eigen::Index>(j);
        const double dt = g.time(j + 1) - g.time(j);
        const Eigen::Vector2d d = mu.row(r).transpose() - c;
        const Eigen::Vector2d u = d.norm() > 0 ? Eigen::Vector2d(d / d.norm()) : Eigen::Vector2d::Zero();
        const Eigen::VectorXd m = v.row(r).transpose() * (1.0 - sv * dt) - beta(r) * dt * u;
        const Eigen::VectorXd y = v.row(r + 1).transpose();
        ll += mvn_logpdf(y, m, Eigen::MatrixXd::Identity(2, 2) * sigma_v_sq * dt);
    }
    return ll;
}

/// Empirical CDF of `samples` compared with a target CDF obtained by normalizing an
/// unnormalized log density on a fine grid. Returns the sup-norm difference.
inline double grid_cdf_supnorm(std::vector<double> samples, const std::function<double(double)>& log_density,
                               double lo, double hi, int points = 20001) {
    std::vector<double> x(points), w(points);
    double mx = -INFINITY;
    for (int i = 0; i < points; ++i) {
        x[i] = lo + (hi - lo) * i / (points - 1);
        w[i] = log_density(x[i]);
        mx = std::max(mx, w[i]);
    }
    std::vector<double> cdf(points, 0.0);
    for (int i = 1; i < points; ++i)
        cdf[i] = cdf[i - 1] + 0.5 * (std::exp(w[i - 1] - mx) + std::exp(w[i] - mx)) * (x[i] - x[i - 1]);
    for (auto& c : cdf) c /= cdf.back();
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    auto target = [&](double v) {
        if (v <= lo) return 0.0;
        if (v >= hi) return 1.0;
        const double pos = (v - lo) / (hi - lo) * (points - 1);
        const auto i = static_cast<std::size_t>(pos);
        const double f = pos - static_cast<double>(i);
        return i + 1 < static_cast<std::size_t>(points) ? cdf[i] * (1 - f) + cdf[i + 1] * f : 1.0;
    };
    double sup = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double F = target(samples[i]);
        sup = std::max({sup, std::abs(F - static_cast<double>(i) / n), std::abs(F - static_cast<double>(i + 1) / n)});
    }
    return sup;
}

struct Moments {
    double mean = 0.0;
    double var = 0.0;
    double mean_se = 0.0;  // standard error of the mean
    double var_se = 0.0;   // standard error of the variance (from the fourth central moment)
};

inline Moments moments(const std::vector<double>& x) {
    const double n = static_cast<double>(x.size());
    Moments m;
    for (double v : x) m.mean += v;
    m.mean /= n;
    double m2 = 0.0, m4 = 0.0;
    for (double v : x) {
        const double d = (v - m.mean) * (v - m.mean);
        m2 += d;
        m4 += d * d;
    }
    m2 /= n;
    m4 /= n;
    m.var = m2 * n / (n - 1.0);
    m.mean_se = std::sqrt(m.var / n);
    m.var_se = std::sqrt(std::max(0.0, m4 - m2 * m2) / n);
    return m;
}

/// Standard normal CDF.
inline double phi(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace oracle
