#pragma once

// Complete-data likelihood kernels for both movement models.
//
// Second-order model, Euler-discretized:
//   v_{j+1} = v_j - beta_j u_j dt - sigma_v v_j dt + sigma_v N(0, dt I),
//   u_j = (mu_j - c)/||mu_j - c||, dt = t_{j+1} - t_j.
// When a path carries velocities all m-1 transitions are used; when velocities are
// derived from positions by forward differences the last (replicated) one is dropped.
//
// First-order model:
//   mu_{i} = mu_{i-1} - beta u_{i-1} dt + N(0, dt I).
//
// Each path reduces to a small set of sufficient statistics so MCMC iterations cost
// O(p^2) regardless of grid size. Batch versions run over imputation draws in
// parallel (OpenMP); the *_serial variants and the direct likelihood loops are the
// reference implementations.

#include <span>
#include <vector>

#include <Eigen/Core>

#include "procimp/aid.hpp"
#include "procimp/core.hpp"

namespace procimp {

/// alpha, beta = W alpha on the grid, sigma_v^2.
class ProcessParams {
public:
    ProcessParams(Eigen::VectorXd alpha, const Eigen::MatrixXd& W, double sigma_v_sq);

    const Eigen::VectorXd& alpha() const { return alpha_; }
    const Eigen::VectorXd& beta_grid() const { return beta_; }
    double sigma_v_sq() const { return sigma_v_sq_; }

private:
    Eigen::VectorXd alpha_;
    Eigen::VectorXd beta_;
    double sigma_v_sq_;
};

/// Reference implementation: direct sum of bivariate normal log-densities.
double complete_data_loglik(const LatentPath& path, const ProcessParams& params, const Vec2& center);

struct SecondOrderStats {
    std::size_t transitions = 0;
    double sum_log_dt = 0.0;
    double saa = 0.0, sab = 0.0, sbb = 0.0;  // weighted inner products of a_j, b_j
    Eigen::VectorXd ga, gb;                 // X'a, X'b (weighted)
    Eigen::MatrixXd G;                      // X'X (weighted)

    /// sum_j ||r_j||^2 / dt_j for residuals at (alpha, sigma_v).
    double weighted_rss(const Eigen::VectorXd& alpha, double sigma_v) const;
    double loglik(const Eigen::VectorXd& alpha, double sigma_v_sq) const;
};

SecondOrderStats second_order_stats(const LatentPath& path, const Eigen::MatrixXd& W, const Vec2& center);
std::vector<SecondOrderStats> second_order_stats(const ImputationSet& set, const Eigen::MatrixXd& W,
                                                 const Vec2& center);
std::vector<SecondOrderStats> second_order_stats_serial(const ImputationSet& set, const Eigen::MatrixXd& W,
                                                        const Vec2& center);

struct FirstOrderStats {
    std::size_t transitions = 0;
    double sum_log_dt = 0.0;
    double info = 0.0;   // sum dt ||u||^2
    double score = 0.0;  // -sum u . dmu
    double ssq = 0.0;    // sum ||dmu||^2 / dt

    double loglik(double beta) const;
};

/// Reference implementation for the first-order transition likelihood.
double first_order_loglik(const LatentPath& path, double beta, const Vec2& center);

FirstOrderStats first_order_stats(const Positions& mu, const TrajectoryGrid& grid, const Vec2& center);
std::vector<FirstOrderStats> first_order_stats(const ImputationSet& set, const Vec2& center);
std::vector<FirstOrderStats> first_order_stats_serial(const ImputationSet& set, const Vec2& center);

/// sum_i ||s_i - mu(t_i)||^2 over the observation grid indices, per draw.
double residual_ss(const Positions& mu, const Telemetry& data, std::span<const std::size_t> obs_index);
std::vector<double> residual_ss(const ImputationSet& set, const Telemetry& data);

}  // namespace procimp
