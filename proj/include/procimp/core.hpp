#pragma once

// Domain types shared by every module: time grids, latent paths, telemetry,
// basis and prior specifications. Times are hours, distances km.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace procimp {

using Vec2 = Eigen::Vector2d;
using Positions = Eigen::MatrixX2d;  // one row per time point

/// Strictly increasing time stamps t_0..t_{m-1}, m >= 2.
class TrajectoryGrid {
public:
    TrajectoryGrid() = default;
    explicit TrajectoryGrid(std::vector<double> times);

    std::size_t size() const { return times_.size(); }
    double time(std::size_t j) const { return times_[j]; }
    /// dt_j = t_j - t_{j-1}; defined for j >= 1.
    double dt(std::size_t j) const { return times_[j] - times_[j - 1]; }
    double start() const { return times_.front(); }
    double end() const { return times_.back(); }
    std::span<const double> times() const { return times_; }

    /// Index of the grid point within `tol` of t, if any.
    std::optional<std::size_t> find(double t, double tol = 1e-12) const;

    bool operator==(const TrajectoryGrid&) const = default;

private:
    std::vector<double> times_;
};

/// Equally spaced grid on [start, end] with m points.
TrajectoryGrid build_grid(double start, double end, std::size_t m);

struct MergedGrid {
    TrajectoryGrid grid;
    std::vector<std::size_t> obs_index;  // obs_times[i] == grid.time(obs_index[i])
};

/// Union of grid times and observation times (duplicates within 1e-12 removed).
MergedGrid merge_grid(const TrajectoryGrid& grid, std::span<const double> obs_times);

/// Map each observation time onto an existing grid point; throws if one is missing.
std::vector<std::size_t> locate_times(const TrajectoryGrid& grid, std::span<const double> times);

class LatentPath {
public:
    LatentPath() = default;
    LatentPath(TrajectoryGrid grid, Positions positions,
               std::optional<Positions> velocities = std::nullopt);

    const TrajectoryGrid& grid() const { return grid_; }
    const Positions& positions() const { return positions_; }
    const std::optional<Positions>& velocities() const { return velocities_; }
    std::size_t size() const { return grid_.size(); }
    Vec2 position(std::size_t j) const { return positions_.row(j).transpose(); }

private:
    TrajectoryGrid grid_;
    Positions positions_;
    std::optional<Positions> velocities_;
};

class Telemetry {
public:
    Telemetry() = default;
    Telemetry(std::vector<double> obs_times, Positions locations);

    std::size_t size() const { return times_.size(); }
    std::span<const double> times() const { return times_; }
    const Positions& locations() const { return locations_; }
    Vec2 location(std::size_t i) const { return locations_.row(i).transpose(); }

private:
    std::vector<double> times_;
    Positions locations_;
};

/// Forward differences v_j = (mu_{j+1} - mu_j) / dt_{j+1}; last velocity repeats the previous one.
LatentPath velocities_from_path(const LatentPath& path);

/// B-spline basis on clamped knots. `breakpoints` includes both boundary knots.
struct BasisSpec {
    std::vector<double> breakpoints;
    int degree = 3;
    double prior_variance = 1.0;  // sigma_alpha^2

    std::size_t num_functions() const;
};

/// Cubic (or `degree`) B-spline spec with equally spaced interior knots spanning the grid.
BasisSpec uniform_basis(const TrajectoryGrid& grid, std::size_t interior_knots, int degree,
                        double prior_variance);

/// W (m x p): row j holds every basis function evaluated at t_j.
Eigen::MatrixXd basis_matrix(const BasisSpec& spec, const TrajectoryGrid& grid);

/// Inverse-gamma shape/rate hyperparameters for sigma_s^2 and sigma_v^2.
struct PriorSpec {
    double a_s = 1e-3;
    double b_s = 1e-4;
    double a_v = 1e-3;
    double b_v = 1e-4;

    void validate() const;
};

}  // namespace procimp
