#pragma once

// Complete-data updates and the process-imputation sampler: at every iteration one
// of the K imputed paths is picked uniformly and the process parameters are updated
// conditional on it.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "procimp/aid.hpp"
#include "procimp/complete_data.hpp"
#include "procimp/core.hpp"
#include "procimp/rng.hpp"

namespace procimp {

/// Retained MCMC samples (post burn-in) with bookkeeping.
struct ChainOutput {
    std::string method = "process_imputation";  // or "exact"
    std::string model = "second_order";         // or "first_order"
    std::size_t iterations = 0;
    std::size_t burn_in = 0;
    Eigen::MatrixXd alpha;             // retained x p (second order)
    std::vector<double> beta;          // first order
    std::vector<double> sigma_v_sq;    // second order
    std::vector<double> sigma_s_sq;
    std::vector<std::size_t> selected; // imputed path used at each retained iteration
    std::vector<double> deviance;      // -2 log L(path_k | theta) at each retained iteration
    std::map<std::string, double> acceptance;
    nlohmann::json metadata = nlohmann::json::object();

    std::size_t retained() const { return sigma_s_sq.size(); }
    /// Named scalar trace: "beta", "sigma_v_sq", "sigma_s_sq", "deviance" or "alpha[i]".
    std::vector<double> samples(std::string_view name) const;
};

enum class ModelKind { second_order, first_order };

struct ImputationModel {
    ModelKind kind = ModelKind::second_order;
    Vec2 center = Vec2::Zero();
    PriorSpec prior;
    BasisSpec basis;              // second order: beta(t) = W alpha
    double sigma_beta_sq = 1e5;   // first order: beta ~ N(0, sigma_beta^2)
    double proposal_scale = 0.2;  // random-walk scale for log sigma_v^2
    std::optional<double> init_sigma_v_sq;  // default: maximizer of the first path's likelihood at alpha = 0
    double init_sigma_s_sq = 1e-2;
    std::optional<std::size_t> burn_in;     // default: half the iterations

    void validate() const;
};

// ---------------------------------------------------------------------------
// Single-parameter updates

struct GaussianConditional {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
};

/// Full conditional of alpha: N(P^{-1} (ga + sigma_v gb)/sigma_v^2, P^{-1}),
/// P = G/sigma_v^2 + I/sigma_alpha^2.
GaussianConditional alpha_conditional(const SecondOrderStats& stats, double sigma_v_sq, double prior_variance);
Eigen::VectorXd update_alpha(const SecondOrderStats& stats, double sigma_v_sq, double prior_variance, Rng& rng);
Eigen::VectorXd update_alpha(const LatentPath& path, double sigma_v_sq, const BasisSpec& basis,
                             const Vec2& center, Rng& rng);

struct MhResult {
    double value;
    bool accepted;
};

/// Log of the sigma_v^2 target on eta = log sigma_v^2 (includes the Jacobian).
double sigma_v_log_target(const SecondOrderStats& stats, const Eigen::VectorXd& alpha, double sigma_v_sq,
                          const PriorSpec& prior);

/// Gaussian random-walk Metropolis-Hastings on log sigma_v^2 with IG(a_v, b_v) prior.
MhResult update_sigma_v_sq(const SecondOrderStats& stats, const Eigen::VectorXd& alpha, double current,
                           double proposal_scale, const PriorSpec& prior, Rng& rng);

/// Conjugate draw from IG(a_s + n, b_s + rss/2); n counts 2-D residuals.
double update_sigma_s_sq(double rss, std::size_t n, const PriorSpec& prior, Rng& rng);
double update_sigma_s_sq(const LatentPath& path, const Telemetry& data, const PriorSpec& prior, Rng& rng);

/// Scalar beta full conditional for the first-order model: N(score/P, 1/P), P = info + 1/sigma_beta^2.
struct ScalarNormal {
    double mean;
    double var;
};
ScalarNormal beta_conditional(const FirstOrderStats& stats, double sigma_beta_sq);

// ---------------------------------------------------------------------------
// Samplers

ChainOutput run_process_imputation(const ImputationSet& imputations, const Telemetry& data,
                                   const ImputationModel& model, std::size_t iterations, std::uint64_t seed);

/// Average of per-draw means; average of per-draw variances plus the (K-1 divisor)
/// sample variance of the means.
struct CombinedMoments {
    Eigen::VectorXd mean;
    Eigen::VectorXd variance;
};
CombinedMoments combine_moments(std::span<const Eigen::VectorXd> means, std::span<const Eigen::VectorXd> variances);

/// D(theta-bar) averaged over the K imputed paths, theta-bar = posterior mean of the chain.
double deviance_at_posterior_mean(const ChainOutput& chain, std::span<const SecondOrderStats> stats);
double deviance_at_posterior_mean(const ChainOutput& chain, std::span<const FirstOrderStats> stats);

}  // namespace procimp
