#include "procimp/potential.hpp"

#include <cmath>

#include "procimp/error.hpp"

namespace procimp {

AttractorPotential::AttractorPotential(Vec2 center, double beta)
    : center_(std::move(center)), beta_{beta}, constant_(true) {
    require(center_.allFinite(), "potential center must be finite");
    require(std::isfinite(beta), "beta must be finite");
}

AttractorPotential::AttractorPotential(Vec2 center, std::vector<double> beta_grid)
    : center_(std::move(center)), beta_(std::move(beta_grid)), constant_(false) {
    require(center_.allFinite(), "potential center must be finite");
    require(!beta_.empty(), "beta grid must not be empty");
    for (double b : beta_) require(std::isfinite(b), "beta values must be finite");
}

double AttractorPotential::value(const Vec2& mu, std::size_t j) const {
    return beta(j) * (mu - center_).norm();
}

Vec2 AttractorPotential::gradient(const Vec2& mu, std::size_t j) const {
    return beta(j) * unit_from_center(mu, center_);
}

}  // namespace procimp
