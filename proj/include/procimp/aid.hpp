#pragma once

// Approximate imputation distributions: fit a tractable path model to
// telemetry, then draw latent-path realizations on a dense grid.

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "procimp/core.hpp"
#include "procimp/error.hpp"

namespace procimp {

/// K latent-path draws on one shared grid, plus the AID mean path.
struct ImputationSet {
    TrajectoryGrid grid;
    std::vector<Positions> draws;
    Positions mean;
    std::string aid;        // "OU", "GP", or a caller-chosen label
    nlohmann::json params;  // fitted AID parameters
    std::uint64_t seed = 0;

    std::size_t K() const { return draws.size(); }
    LatentPath path(std::size_t k) const { return LatentPath(grid, draws[k]); }
    LatentPath mean_path() const { return LatentPath(grid, mean); }
    /// Keeps the first k draws.
    ImputationSet prefix(std::size_t k) const;
};

/// Single-path "imputation" (posterior-mean regime or the true-path baseline).
ImputationSet single_path_set(const LatentPath& path, std::string label);

// ---------------------------------------------------------------------------
// Integrated Ornstein-Uhlenbeck AID

/// Per coordinate: velocity dv = -theta v dt + sigma dW, position integrates velocity,
/// observations are position + N(0, tau^2).
struct OuAidParams {
    double theta = 1.0;    // velocity autocorrelation rate (1/hour)
    double sigma = 1.0;    // velocity diffusion scale
    double tau_sq = 0.0;   // observation variance (km^2)
    double init_position_var = 1.0;  // initial position variance around the first fix

    double stationary_velocity_var() const { return sigma * sigma / (2.0 * theta); }
    nlohmann::json to_json() const;
};

/// Exact discrete transition over dt: x' = F x + N(0, Q) for state (position, velocity).
struct OuTransition {
    Eigen::Matrix2d F;
    Eigen::Matrix2d Q;
};
OuTransition ou_transition(double theta, double sigma, double dt);

/// Kalman-filter marginal log-likelihood of the telemetry (both coordinates).
double ou_loglik(const OuAidParams& params, const Telemetry& data);

struct OuFitOptions {
    bool fix_tau_sq = false;
    double tau_sq = 0.0;  // used when fix_tau_sq
    int restarts = 5;
    int max_iter = 3000;
    double tol = 1e-7;
    std::uint64_t seed = 20170501;
};

/// Raised when no restart converges; carries the best parameters found.
class OuFitError : public NumericalError {
public:
    OuFitError(const std::string& what, OuAidParams best) : NumericalError(what), best_(best) {}
    const OuAidParams& best() const { return best_; }

private:
    OuAidParams best_;
};

/// Maximum-likelihood fit by Nelder-Mead on log-parameters with random restarts.
OuAidParams fit_ou_aid(const Telemetry& data, const OuFitOptions& options = {});

/// Smoothing moments of the position process at every grid time.
struct OuSmoothed {
    Positions mean;               // m x 2
    Eigen::VectorXd position_var;  // m, shared by both coordinates
    Positions filtered_mean;      // forward-filter position means
};
OuSmoothed ou_smooth(const OuAidParams& params, const Telemetry& data, const TrajectoryGrid& grid);

/// K forward-filter backward-sampler draws of positions on `grid` (which must contain the obs times).
ImputationSet draw_ou_paths(const OuAidParams& params, const Telemetry& data,
                            const TrajectoryGrid& grid, std::size_t K, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Gaussian-process AID

/// Per coordinate: mu*(t) = mean + f(t), Cov f = amplitude * exp(-(t-t')^2 / (2 range^2)),
/// observations add N(0, tau^2).
struct GpAidParams {
    double range = 1.0;      // phi (hours)
    double amplitude = 1.0;  // sigma_gp^2 (km^2)
    double tau_sq = 0.0;
    Vec2 mean = Vec2::Zero();

    double covariance(double t1, double t2) const;
    nlohmann::json to_json() const;
};

struct GpFitOptions {
    bool fix_tau_sq = false;
    double tau_sq = 0.0;
    int grid_points = 7;  // per log-parameter axis
    int max_iter = 400;
    double tol = 1e-6;
};

/// Fit result; `jitter` > 0 when the observation covariance needed stabilizing.
struct GpFit {
    GpAidParams params;
    double loglik = 0.0;
    double jitter = 0.0;
    std::vector<std::string> warnings;
};

/// Marginal log-likelihood of the centered telemetry (both coordinates). Returns the jitter used.
double gp_loglik(const GpAidParams& params, const Telemetry& data, double* jitter_used = nullptr);

/// Mean = per-coordinate sample mean; (range, amplitude, tau^2) by log-grid search + Nelder-Mead.
GpFit fit_gp_aid(const Telemetry& data, const GpFitOptions& options = {});

struct GpConditional {
    Positions mean;         // m x 2
    Eigen::MatrixXd cov;    // m x m, shared by both coordinates
};
GpConditional gp_conditional(const GpAidParams& params, const Telemetry& data,
                             const TrajectoryGrid& grid);

/// K draws from the GP conditional distribution on `grid`. Jitter escalates from 1e-8 to 1e-4
/// times the amplitude when the conditional covariance is not numerically positive definite.
ImputationSet draw_gp_paths(const GpAidParams& params, const Telemetry& data,
                            const TrajectoryGrid& grid, std::size_t K, std::uint64_t seed);

/// Cholesky with diagonal jitter escalation (scale * 1e-8 ... scale * 1e-4).
/// Returns the lower factor; `jitter_used` receives the added diagonal (0 if none).
Eigen::MatrixXd jittered_cholesky(const Eigen::MatrixXd& A, double scale, double* jitter_used = nullptr);

}  // namespace procimp
