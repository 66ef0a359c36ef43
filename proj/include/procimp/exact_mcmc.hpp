#pragma once

// Metropolis-within-Gibbs for the first-order attraction model, sampling the latent
// path site by site on a dense grid alongside beta and sigma_s^2.

#include <cstdint>
#include <optional>
#include <vector>

#include "procimp/core.hpp"
#include "procimp/impute_mcmc.hpp"
#include "procimp/rng.hpp"

namespace procimp {

struct ExactConfig {
    Vec2 center = Vec2::Zero();
    double sigma_beta_sq = 1e5;
    double a_s = 1e-3;
    double b_s = 1e-4;
    double sigma0_sq = 100.0;
    std::size_t grid_points = 500;  // latent points added to the observation times
    std::size_t iterations = 20000;
    std::optional<std::size_t> burn_in;  // default: half
    double target_acceptance = 0.44;
    double initial_proposal_scale = 0.1;

    void validate() const;
};

struct ExactChainState {
    TrajectoryGrid grid;
    Positions path;
    std::vector<std::ptrdiff_t> obs_at;  // observation index at each site, -1 if none
    double beta = 0.0;
    double sigma_s_sq = 1e-2;
    double sigma0_sq = 100.0;
    double sigma_beta_sq = 1e5;
    double a_s = 1e-3;
    double b_s = 1e-4;
    Vec2 center = Vec2::Zero();
    std::vector<double> scale;  // per-site random-walk standard deviation
    std::vector<std::size_t> proposed, accepted;

    /// State on `grid` (which must contain the observation times), path initialized by
    /// linear interpolation of the data.
    static ExactChainState initialize(const TrajectoryGrid& grid, const Telemetry& data, const ExactConfig& config);
};

/// Unnormalized log full conditional of mu(t_i) at candidate value x.
double site_log_target(const ExactChainState& state, std::size_t i, const Vec2& x, const Telemetry& data);

/// One random-walk MH step for site i. Returns true if accepted.
bool update_path_site(ExactChainState& state, std::size_t i, const Telemetry& data, Rng& rng);

/// Conjugate Gaussian draw of beta given the path.
double update_beta_exact(ExactChainState& state, Rng& rng);

/// Conjugate inverse-gamma draw of sigma_s^2 given path and data.
double update_sigma_s_exact(ExactChainState& state, const Telemetry& data, Rng& rng);

/// Full sampler on the grid of `grid_points` equally spaced times merged with the observation times.
/// Per-site scales adapt (Robbins-Monro on log scale) during burn-in only.
ChainOutput run_exact(const Telemetry& data, const ExactConfig& config, std::uint64_t seed);

/// Same, on a caller-supplied grid containing the observation times.
ChainOutput run_exact(const Telemetry& data, const TrajectoryGrid& grid, const ExactConfig& config,
                      std::uint64_t seed);

}  // namespace procimp
