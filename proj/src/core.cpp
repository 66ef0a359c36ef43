#include "procimp/core.hpp"

#include <algorithm>
#include <cmath>

#include "procimp/error.hpp"

namespace procimp {

namespace {
constexpr double kTimeTol = 1e-12;
}

TrajectoryGrid::TrajectoryGrid(std::vector<double> times) : times_(std::move(times)) {
    require(times_.size() >= 2, "grid needs at least two time points");
    for (std::size_t j = 0; j < times_.size(); ++j) {
        require(std::isfinite(times_[j]), "grid times must be finite");
        if (j > 0) require(times_[j] > times_[j - 1], "grid times must be strictly increasing");
    }
}

std::optional<std::size_t> TrajectoryGrid::find(double t, double tol) const {
    auto it = std::lower_bound(times_.begin(), times_.end(), t - tol);
    if (it != times_.end() && std::abs(*it - t) <= tol)
        return static_cast<std::size_t>(it - times_.begin());
    return std::nullopt;
}

TrajectoryGrid build_grid(double start, double end, std::size_t m) {
    require(std::isfinite(start) && std::isfinite(end), "grid bounds must be finite");
    require(end > start, "grid end must exceed start");
    require(m >= 2, "grid needs at least two points");
    std::vector<double> t(m);
    const double h = (end - start) / static_cast<double>(m - 1);
    for (std::size_t j = 0; j < m; ++j) t[j] = start + h * static_cast<double>(j);
    t.back() = end;
    return TrajectoryGrid(std::move(t));
}

MergedGrid merge_grid(const TrajectoryGrid& grid, std::span<const double> obs_times) {
    for (double t : obs_times) {
        require(std::isfinite(t), "observation time must be finite");
        require(t >= grid.start() - kTimeTol && t <= grid.end() + kTimeTol,
                "observation time outside grid span");
    }
    std::vector<double> all(grid.times().begin(), grid.times().end());
    all.insert(all.end(), obs_times.begin(), obs_times.end());
    std::sort(all.begin(), all.end());
    std::vector<double> merged;
    merged.reserve(all.size());
    for (double t : all) {
        if (merged.empty() || t - merged.back() > kTimeTol) merged.push_back(t);
    }
    MergedGrid out{TrajectoryGrid(std::move(merged)), {}};
    out.obs_index = locate_times(out.grid, obs_times);
    return out;
}

std::vector<std::size_t> locate_times(const TrajectoryGrid& grid, std::span<const double> times) {
    std::vector<std::size_t> idx;
    idx.reserve(times.size());
    for (double t : times) {
        auto j = grid.find(t, kTimeTol);
        require(j.has_value(), "time " + std::to_string(t) + " is not a grid point");
        idx.push_back(*j);
    }
    return idx;
}

LatentPath::LatentPath(TrajectoryGrid grid, Positions positions, std::optional<Positions> velocities)
    : grid_(std::move(grid)), positions_(std::move(positions)), velocities_(std::move(velocities)) {
    require(static_cast<std::size_t>(positions_.rows()) == grid_.size(),
            "path positions must match grid length");
    require(positions_.allFinite(), "path positions must be finite");
    if (velocities_) {
        require(static_cast<std::size_t>(velocities_->rows()) == grid_.size(),
                "path velocities must match grid length");
        require(velocities_->allFinite(), "path velocities must be finite");
    }
}

Telemetry::Telemetry(std::vector<double> obs_times, Positions locations)
    : times_(std::move(obs_times)), locations_(std::move(locations)) {
    require(times_.size() >= 2, "telemetry needs at least two observations");
    require(static_cast<std::size_t>(locations_.rows()) == times_.size(),
            "telemetry locations must match observation times");
    require(locations_.allFinite(), "telemetry coordinates must be finite");
    for (std::size_t i = 0; i < times_.size(); ++i) {
        require(std::isfinite(times_[i]), "observation times must be finite");
        if (i > 0) require(times_[i] > times_[i - 1], "observation times must be strictly increasing");
    }
}

LatentPath velocities_from_path(const LatentPath& path) {
    const auto& g = path.grid();
    const auto m = static_cast<Eigen::Index>(g.size());
    Positions v(m, 2);
    const auto& mu = path.positions();
    for (Eigen::Index j = 0; j + 1 < m; ++j) {
        v.row(j) = (mu.row(j + 1) - mu.row(j)) / g.dt(static_cast<std::size_t>(j + 1));
    }
    v.row(m - 1) = v.row(m - 2);
    return LatentPath(g, mu, std::move(v));
}

std::size_t BasisSpec::num_functions() const {
    if (breakpoints.size() < 2 || degree < 0) return 0;
    return breakpoints.size() + static_cast<std::size_t>(degree) - 1;
}

BasisSpec uniform_basis(const TrajectoryGrid& grid, std::size_t interior_knots, int degree,
                        double prior_variance) {
    BasisSpec spec;
    spec.degree = degree;
    spec.prior_variance = prior_variance;
    const std::size_t nb = interior_knots + 2;
    spec.breakpoints.resize(nb);
    const double h = (grid.end() - grid.start()) / static_cast<double>(nb - 1);
    for (std::size_t i = 0; i < nb; ++i) spec.breakpoints[i] = grid.start() + h * static_cast<double>(i);
    spec.breakpoints.back() = grid.end();
    return spec;
}

Eigen::MatrixXd basis_matrix(const BasisSpec& spec, const TrajectoryGrid& grid) {
    require(spec.degree >= 0, "basis degree must be nonnegative");
    require(spec.prior_variance > 0.0, "basis prior variance must be positive");
    require(spec.breakpoints.size() >= 2, "basis needs at least two breakpoints");
    for (std::size_t i = 1; i < spec.breakpoints.size(); ++i)
        require(spec.breakpoints[i] > spec.breakpoints[i - 1], "breakpoints must be strictly increasing");
    require(spec.breakpoints.front() >= grid.start() - kTimeTol &&
                spec.breakpoints.back() <= grid.end() + kTimeTol,
            "basis knots must lie within the grid span");
    const std::size_t p = spec.num_functions();
    require(p >= 1, "basis must have at least one function");

    // Clamped knot vector: boundary breakpoints repeated degree+1 times.
    const int d = spec.degree;
    std::vector<double> U;
    U.insert(U.end(), static_cast<std::size_t>(d), spec.breakpoints.front());
    U.insert(U.end(), spec.breakpoints.begin(), spec.breakpoints.end());
    U.insert(U.end(), static_cast<std::size_t>(d), spec.breakpoints.back());

    const double lo = spec.breakpoints.front();
    const double hi = spec.breakpoints.back();
    Eigen::MatrixXd W = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(grid.size()),
                                              static_cast<Eigen::Index>(p));
    std::vector<double> N(static_cast<std::size_t>(d) + 1), left(N.size()), right(N.size());
    for (std::size_t j = 0; j < grid.size(); ++j) {
        double x = grid.time(j);
        if (x < lo - kTimeTol || x > hi + kTimeTol) continue;
        x = std::clamp(x, lo, hi);
        // span s with U[s] <= x < U[s+1]; the right boundary uses the last nonempty span
        std::size_t s;
        if (x >= hi) {
            s = static_cast<std::size_t>(d) + spec.breakpoints.size() - 2;
        } else {
            s = static_cast<std::size_t>(std::upper_bound(U.begin(), U.end(), x) - U.begin()) - 1;
        }
        N[0] = 1.0;
        for (int k = 1; k <= d; ++k) {
            left[k] = x - U[s + 1 - k];
            right[k] = U[s + k] - x;
            double saved = 0.0;
            for (int r = 0; r < k; ++r) {
                const double tmp = N[r] / (right[r + 1] + left[k - r]);
                N[r] = saved + right[r + 1] * tmp;
                saved = left[k - r] * tmp;
            }
            N[k] = saved;
        }
        for (int r = 0; r <= d; ++r) {
            W(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(s - d + r)) = N[r];
        }
    }
    return W;
}

void PriorSpec::validate() const {
    require(a_s > 0 && b_s > 0 && a_v > 0 && b_v > 0, "inverse-gamma hyperparameters must be positive");
}

}  // namespace procimp
