#pragma once

#include <cstddef>
#include <vector>

#include "procimp/core.hpp"

namespace procimp {

/// Unit vector (mu - c)/||mu - c||, or zero at the center where the norm is not differentiable.
inline Vec2 unit_from_center(const Vec2& mu, const Vec2& center) {
    const Vec2 d = mu - center;
    const double r = d.norm();
    return r > 0.0 ? Vec2(d / r) : Vec2::Zero();
}

/// Potential surface H(mu, t_j) evaluated at a grid index.
class Potential {
public:
    virtual ~Potential() = default;
    virtual double value(const Vec2& mu, std::size_t j) const = 0;
    virtual Vec2 gradient(const Vec2& mu, std::size_t j) const = 0;
};

/// H(mu, t) = beta(t) * ||mu - c||. beta is either per grid point or a single scalar.
class AttractorPotential final : public Potential {
public:
    AttractorPotential(Vec2 center, double beta);
    AttractorPotential(Vec2 center, std::vector<double> beta_grid);

    double value(const Vec2& mu, std::size_t j) const override;
    /// beta(t_j) (mu - c)/||mu - c||; zero vector at mu == c.
    Vec2 gradient(const Vec2& mu, std::size_t j) const override;

    double beta(std::size_t j) const { return constant_ ? beta_[0] : beta_[j]; }
    bool constant_beta() const { return constant_; }
    std::size_t beta_size() const { return beta_.size(); }
    const Vec2& center() const { return center_; }

private:
    Vec2 center_;
    std::vector<double> beta_;
    bool constant_;
};

inline double potential_value(const Potential& p, const Vec2& mu, std::size_t j) {
    return p.value(mu, j);
}

inline Vec2 potential_gradient(const Potential& p, const Vec2& mu, std::size_t j) {
    return p.gradient(mu, j);
}

}  // namespace procimp
