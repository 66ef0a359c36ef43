#pragma once

#include <cstdint>
#include <span>

#include "procimp/core.hpp"
#include "procimp/potential.hpp"

namespace procimp {

/// Second-order model: d mu = v dt, d v = -grad H dt - sigma_v v dt + sigma_v db.
struct Sde2Params {
    double sigma_v = 1.0;
    AttractorPotential potential{Vec2::Zero(), 0.0};
    Vec2 mu0 = Vec2::Zero();
    Vec2 v0 = Vec2::Zero();
    bool zero_noise = false;  // deterministic limit, drops sigma_v db
};

/// First-order model: d mu = -grad H dt + db, mu(0) ~ N(0, sigma0^2 I).
struct Sde1Params {
    double beta = 0.0;
    Vec2 center = Vec2::Zero();
    double sigma0_sq = 100.0;
};

struct ObsParams {
    double sigma_s_sq = 1e-2;
    bool zero_noise = false;
};

/// Euler-Maruyama on the grid; position advances with the previous velocity.
/// A time-varying potential must carry one beta per grid point.
LatentPath simulate_sde2(const Sde2Params& params, const TrajectoryGrid& grid, std::uint64_t seed);

/// Exact sampling of the Euler transition density of the first-order model.
LatentPath simulate_sde1(const Sde1Params& params, const TrajectoryGrid& grid, std::uint64_t seed);

/// s(t_i) = mu(t_i) + N(0, sigma_s^2 I). Every obs time must be a grid point of the path.
Telemetry observe(const LatentPath& path, std::span<const double> obs_times, const ObsParams& obs,
                  std::uint64_t seed);

}  // namespace procimp
