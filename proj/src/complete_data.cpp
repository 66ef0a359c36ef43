#include "procimp/complete_data.hpp"

#include <cmath>

#include "procimp/error.hpp"
#include "procimp/potential.hpp"

namespace procimp {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

std::size_t transitions_for(const LatentPath& path) {
    return path.velocities() ? path.size() - 1 : path.size() - 2;
}

Positions velocities_of(const LatentPath& path) {
    return path.velocities() ? *path.velocities() : *velocities_from_path(path).velocities();
}

}  // namespace

ProcessParams::ProcessParams(Eigen::VectorXd alpha, const Eigen::MatrixXd& W, double sigma_v_sq)
    : alpha_(std::move(alpha)), sigma_v_sq_(sigma_v_sq) {
    require(W.cols() == alpha_.size(), "alpha length must match basis size");
    require(sigma_v_sq > 0.0, "sigma_v^2 must be positive");
    beta_ = W * alpha_;
}

double complete_data_loglik(const LatentPath& path, const ProcessParams& params, const Vec2& center) {
    require(static_cast<std::size_t>(params.beta_grid().size()) == path.size(),
            "beta grid must match path length");
    require(path.size() >= 3 || path.velocities(), "path too short for a velocity transition");
    const Positions v = velocities_of(path);
    const auto& g = path.grid();
    const double s2 = params.sigma_v_sq();
    const double sv = std::sqrt(s2);
    const std::size_t n = transitions_for(path);
    double ll = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const auto r = static_cast<Eigen::Index>(j);
        const double dt = g.dt(j + 1);
        const Vec2 vj = v.row(r).transpose();
        const Vec2 u = unit_from_center(path.position(j), center);
        const Vec2 mean = vj - params.beta_grid()(r) * u * dt - sv * vj * dt;
        const Vec2 resid = v.row(r + 1).transpose() - mean;
        const double var = s2 * dt;
        ll += -kLog2Pi - std::log(var) - 0.5 * resid.squaredNorm() / var;
    }
    return ll;
}

double SecondOrderStats::weighted_rss(const Eigen::VectorXd& alpha, double sigma_v) const {
    return saa + 2.0 * sigma_v * sab + sigma_v * sigma_v * sbb - 2.0 * alpha.dot(ga + sigma_v * gb) +
           alpha.dot(G * alpha);
}

double SecondOrderStats::loglik(const Eigen::VectorXd& alpha, double sigma_v_sq) const {
    const double N = static_cast<double>(transitions);
    return -N * kLog2Pi - N * std::log(sigma_v_sq) - sum_log_dt -
           0.5 * weighted_rss(alpha, std::sqrt(sigma_v_sq)) / sigma_v_sq;
}

SecondOrderStats second_order_stats(const LatentPath& path, const Eigen::MatrixXd& W, const Vec2& center) {
    require(static_cast<std::size_t>(W.rows()) == path.size(), "basis matrix rows must match path length");
    require(path.size() >= 3 || path.velocities(), "path too short for a velocity transition");
    const Positions v = velocities_of(path);
    const auto& g = path.grid();
    const Eigen::Index p = W.cols();
    SecondOrderStats s;
    s.transitions = transitions_for(path);
    s.ga = Eigen::VectorXd::Zero(p);
    s.gb = Eigen::VectorXd::Zero(p);
    s.G = Eigen::MatrixXd::Zero(p, p);
    std::vector<Eigen::Index> nz;
    nz.reserve(static_cast<std::size_t>(p));
    for (std::size_t j = 0; j < s.transitions; ++j) {
        const auto r = static_cast<Eigen::Index>(j);
        const double dt = g.dt(j + 1);
        const Vec2 a = (v.row(r + 1) - v.row(r)).transpose();
        const Vec2 b = v.row(r).transpose() * dt;
        const Vec2 u = unit_from_center(path.position(j), center);
        s.sum_log_dt += std::log(dt);
        s.saa += a.squaredNorm() / dt;
        s.sab += a.dot(b) / dt;
        s.sbb += b.squaredNorm() / dt;
        const double ua = u.dot(a), ub = u.dot(b), uu = u.squaredNorm() * dt;
        nz.clear();
        for (Eigen::Index c = 0; c < p; ++c)
            if (W(r, c) != 0.0) nz.push_back(c);
        for (auto c : nz) {
            const double w = W(r, c);
            s.ga(c) -= w * ua;
            s.gb(c) -= w * ub;
            for (auto d : nz) s.G(c, d) += uu * w * W(r, d);
        }
    }
    return s;
}

std::vector<SecondOrderStats> second_order_stats(const ImputationSet& set, const Eigen::MatrixXd& W,
                                                 const Vec2& center) {
    std::vector<SecondOrderStats> out(set.K());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(set.K()); ++k)
        out[static_cast<std::size_t>(k)] = second_order_stats(set.path(static_cast<std::size_t>(k)), W, center);
    return out;
}

std::vector<SecondOrderStats> second_order_stats_serial(const ImputationSet& set, const Eigen::MatrixXd& W,
                                                        const Vec2& center) {
    std::vector<SecondOrderStats> out;
    out.reserve(set.K());
    for (std::size_t k = 0; k < set.K(); ++k) out.push_back(second_order_stats(set.path(k), W, center));
    return out;
}

double FirstOrderStats::loglik(double beta) const {
    const double N = static_cast<double>(transitions);
    return -N * kLog2Pi - sum_log_dt - 0.5 * (ssq - 2.0 * beta * score + beta * beta * info);
}

double first_order_loglik(const LatentPath& path, double beta, const Vec2& center) {
    const auto& g = path.grid();
    double ll = 0.0;
    for (std::size_t i = 1; i < path.size(); ++i) {
        const double dt = g.dt(i);
        const Vec2 prev = path.position(i - 1);
        const Vec2 mean = prev - beta * unit_from_center(prev, center) * dt;
        ll += -kLog2Pi - std::log(dt) - 0.5 * (path.position(i) - mean).squaredNorm() / dt;
    }
    return ll;
}

FirstOrderStats first_order_stats(const Positions& mu, const TrajectoryGrid& grid, const Vec2& center) {
    require(static_cast<std::size_t>(mu.rows()) == grid.size(), "path must match grid length");
    FirstOrderStats s;
    s.transitions = grid.size() - 1;
    for (std::size_t i = 1; i < grid.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        const double dt = grid.dt(i);
        const Vec2 prev = mu.row(r - 1).transpose();
        const Vec2 d = (mu.row(r) - mu.row(r - 1)).transpose();
        const Vec2 u = unit_from_center(prev, center);
        s.sum_log_dt += std::log(dt);
        s.info += dt * u.squaredNorm();
        s.score -= u.dot(d);
        s.ssq += d.squaredNorm() / dt;
    }
    return s;
}

std::vector<FirstOrderStats> first_order_stats(const ImputationSet& set, const Vec2& center) {
    std::vector<FirstOrderStats> out(set.K());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(set.K()); ++k)
        out[static_cast<std::size_t>(k)] = first_order_stats(set.draws[static_cast<std::size_t>(k)], set.grid, center);
    return out;
}

std::vector<FirstOrderStats> first_order_stats_serial(const ImputationSet& set, const Vec2& center) {
    std::vector<FirstOrderStats> out;
    out.reserve(set.K());
    for (const auto& d : set.draws) out.push_back(first_order_stats(d, set.grid, center));
    return out;
}

double residual_ss(const Positions& mu, const Telemetry& data, std::span<const std::size_t> obs_index) {
    double ss = 0.0;
    for (std::size_t i = 0; i < obs_index.size(); ++i)
        ss += (data.locations().row(static_cast<Eigen::Index>(i)) -
               mu.row(static_cast<Eigen::Index>(obs_index[i])))
                  .squaredNorm();
    return ss;
}

std::vector<double> residual_ss(const ImputationSet& set, const Telemetry& data) {
    const auto idx = locate_times(set.grid, data.times());
    std::vector<double> out(set.K());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(set.K()); ++k)
        out[static_cast<std::size_t>(k)] = residual_ss(set.draws[static_cast<std::size_t>(k)], data, idx);
    return out;
}

}  // namespace procimp
