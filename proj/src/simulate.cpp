#include "procimp/simulate.hpp"

#include <cmath>

#include "procimp/error.hpp"
#include "procimp/rng.hpp"

namespace procimp {

LatentPath simulate_sde2(const Sde2Params& params, const TrajectoryGrid& grid, std::uint64_t seed) {
    require(params.sigma_v > 0.0 || params.zero_noise, "sigma_v must be positive");
    const auto& pot = params.potential;
    require(pot.constant_beta() || pot.beta_size() == grid.size(),
            "time-varying beta must have one value per grid point");
    const auto m = static_cast<Eigen::Index>(grid.size());
    Positions mu(m, 2), v(m, 2);
    mu.row(0) = params.mu0.transpose();
    v.row(0) = params.v0.transpose();
    Rng rng(seed);
    const double sv = params.sigma_v;
    for (Eigen::Index j = 0; j + 1 < m; ++j) {
        const auto jj = static_cast<std::size_t>(j);
        const double dt = grid.dt(jj + 1);
        const Vec2 muj = mu.row(j).transpose();
        const Vec2 vj = v.row(j).transpose();
        Vec2 next_v = vj - pot.gradient(muj, jj) * dt - sv * vj * dt;
        if (!params.zero_noise) next_v += sv * std::sqrt(dt) * normal2(rng);
        mu.row(j + 1) = (muj + vj * dt).transpose();
        v.row(j + 1) = next_v.transpose();
    }
    return LatentPath(grid, std::move(mu), std::move(v));
}

LatentPath simulate_sde1(const Sde1Params& params, const TrajectoryGrid& grid, std::uint64_t seed) {
    require(params.sigma0_sq > 0.0, "sigma0^2 must be positive");
    const auto m = static_cast<Eigen::Index>(grid.size());
    Positions mu(m, 2);
    Rng rng(seed);
    mu.row(0) = (std::sqrt(params.sigma0_sq) * normal2(rng)).transpose();
    for (Eigen::Index j = 1; j < m; ++j) {
        const double dt = grid.dt(static_cast<std::size_t>(j));
        const Vec2 prev = mu.row(j - 1).transpose();
        // drift beta (c - mu)/||c - mu|| = -beta * unit_from_center(mu, c)
        const Vec2 mean = prev - params.beta * unit_from_center(prev, params.center) * dt;
        mu.row(j) = (mean + std::sqrt(dt) * normal2(rng)).transpose();
    }
    return LatentPath(grid, std::move(mu));
}

Telemetry observe(const LatentPath& path, std::span<const double> obs_times, const ObsParams& obs,
                  std::uint64_t seed) {
    require(obs.sigma_s_sq > 0.0 || obs.zero_noise, "sigma_s^2 must be positive");
    const auto idx = locate_times(path.grid(), obs_times);
    Positions s(static_cast<Eigen::Index>(idx.size()), 2);
    Rng rng(seed);
    const double sd = std::sqrt(obs.sigma_s_sq);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        Vec2 loc = path.position(idx[i]);
        if (!obs.zero_noise) loc += sd * normal2(rng);
        s.row(static_cast<Eigen::Index>(i)) = loc.transpose();
    }
    return Telemetry(std::vector<double>(obs_times.begin(), obs_times.end()), std::move(s));
}

}  // namespace procimp
