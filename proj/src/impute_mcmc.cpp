#include "procimp/impute_mcmc.hpp"

#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Cholesky>

#include "procimp/error.hpp"

namespace procimp {

std::vector<double> ChainOutput::samples(std::string_view name) const {
    if (name == "beta") return beta;
    if (name == "sigma_v_sq") return sigma_v_sq;
    if (name == "sigma_s_sq") return sigma_s_sq;
    if (name == "deviance") return deviance;
    if (name.starts_with("alpha[") && name.ends_with("]")) {
        const auto idx = std::stol(std::string(name.substr(6, name.size() - 7)));
        require(idx >= 0 && idx < alpha.cols(), "alpha index out of range");
        const Eigen::VectorXd col = alpha.col(idx);
        return {col.data(), col.data() + col.size()};
    }
    throw ValidationError("unknown chain parameter '" + std::string(name) + "'");
}

void ImputationModel::validate() const {
    prior.validate();
    require(center.allFinite(), "attraction center must be finite");
    require(proposal_scale >= 0.0, "proposal scale must be nonnegative");
    require(init_sigma_s_sq > 0.0, "initial sigma_s^2 must be positive");
    require(!init_sigma_v_sq || *init_sigma_v_sq > 0.0, "initial sigma_v^2 must be positive");
    if (kind == ModelKind::second_order) {
        require(basis.prior_variance > 0.0, "sigma_alpha^2 must be positive");
        require(basis.num_functions() >= 1, "basis must have at least one function");
    } else {
        require(sigma_beta_sq > 0.0, "sigma_beta^2 must be positive");
    }
}

GaussianConditional alpha_conditional(const SecondOrderStats& stats, double sigma_v_sq, double prior_variance) {
    require(sigma_v_sq > 0.0 && prior_variance > 0.0, "variances must be positive");
    const Eigen::Index p = stats.G.rows();
    Eigen::MatrixXd P = stats.G / sigma_v_sq;
    P.diagonal().array() += 1.0 / prior_variance;
    const Eigen::LLT<Eigen::MatrixXd> llt(P);
    if (llt.info() != Eigen::Success) throw NumericalError("alpha posterior precision is singular");
    GaussianConditional c;
    c.mean = llt.solve((stats.ga + std::sqrt(sigma_v_sq) * stats.gb) / sigma_v_sq);
    c.cov = llt.solve(Eigen::MatrixXd::Identity(p, p));
    return c;
}

Eigen::VectorXd update_alpha(const SecondOrderStats& stats, double sigma_v_sq, double prior_variance, Rng& rng) {
    require(sigma_v_sq > 0.0 && prior_variance > 0.0, "variances must be positive");
    const Eigen::Index p = stats.G.rows();
    Eigen::MatrixXd P = stats.G / sigma_v_sq;
    P.diagonal().array() += 1.0 / prior_variance;
    const Eigen::LLT<Eigen::MatrixXd> llt(P);
    if (llt.info() != Eigen::Success) throw NumericalError("alpha posterior precision is singular");
    const Eigen::VectorXd mean = llt.solve((stats.ga + std::sqrt(sigma_v_sq) * stats.gb) / sigma_v_sq);
    Eigen::VectorXd z(p);
    for (Eigen::Index i = 0; i < p; ++i) z(i) = std_normal(rng);
    // P = L L' => L'^{-1} z ~ N(0, P^{-1})
    return mean + llt.matrixU().solve(z);
}

Eigen::VectorXd update_alpha(const LatentPath& path, double sigma_v_sq, const BasisSpec& basis,
                             const Vec2& center, Rng& rng) {
    const auto W = basis_matrix(basis, path.grid());
    return update_alpha(second_order_stats(path, W, center), sigma_v_sq, basis.prior_variance, rng);
}

double sigma_v_log_target(const SecondOrderStats& stats, const Eigen::VectorXd& alpha, double sigma_v_sq,
                          const PriorSpec& prior) {
    // IG prior density in sigma^2 times the Jacobian d sigma^2 / d log sigma^2
    return stats.loglik(alpha, sigma_v_sq) - prior.a_v * std::log(sigma_v_sq) - prior.b_v / sigma_v_sq;
}

MhResult update_sigma_v_sq(const SecondOrderStats& stats, const Eigen::VectorXd& alpha, double current,
                           double proposal_scale, const PriorSpec& prior, Rng& rng) {
    require(current > 0.0, "current sigma_v^2 must be positive");
    const double eta = std::log(current) + proposal_scale * std_normal(rng);
    const double proposal = std::exp(eta);
    const double log_ratio =
        sigma_v_log_target(stats, alpha, proposal, prior) - sigma_v_log_target(stats, alpha, current, prior);
    if (std::log(uniform01(rng)) < log_ratio) return {proposal, true};
    return {current, false};
}

double update_sigma_s_sq(double rss, std::size_t n, const PriorSpec& prior, Rng& rng) {
    return inverse_gamma(prior.a_s + static_cast<double>(n), prior.b_s + 0.5 * rss, rng);
}

double update_sigma_s_sq(const LatentPath& path, const Telemetry& data, const PriorSpec& prior, Rng& rng) {
    const auto idx = locate_times(path.grid(), data.times());
    return update_sigma_s_sq(residual_ss(path.positions(), data, idx), data.size(), prior, rng);
}

ScalarNormal beta_conditional(const FirstOrderStats& stats, double sigma_beta_sq) {
    require(sigma_beta_sq > 0.0, "sigma_beta^2 must be positive");
    const double precision = stats.info + 1.0 / sigma_beta_sq;
    return {stats.score / precision, 1.0 / precision};
}

namespace {

// argmax over sigma_v^2 of the alpha = 0 likelihood (coarse log-scale scan + golden section).
double sigma_v_start(const SecondOrderStats& stats) {
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(stats.G.rows());
    auto f = [&](double eta) { return stats.loglik(zero, std::exp(eta)); };
    double best_eta = 0.0, best = -std::numeric_limits<double>::infinity();
    for (double eta = -25.0; eta <= 15.0; eta += 0.25) {
        const double v = f(eta);
        if (v > best) {
            best = v;
            best_eta = eta;
        }
    }
    double a = best_eta - 0.25, b = best_eta + 0.25;
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    for (int i = 0; i < 60; ++i) {
        const double c = b - g * (b - a), d = a + g * (b - a);
        if (f(c) > f(d)) b = d;
        else a = c;
    }
    return std::exp(0.5 * (a + b));
}

}  // namespace

ChainOutput run_process_imputation(const ImputationSet& imputations, const Telemetry& data,
                                   const ImputationModel& model, std::size_t iterations, std::uint64_t seed) {
    model.validate();
    require(imputations.K() >= 1, "need at least one imputed path");
    require(iterations >= 2, "need at least two iterations");
    const std::size_t burn = model.burn_in.value_or(iterations / 2);
    require(burn < iterations, "burn-in must be shorter than the chain");

    const std::size_t K = imputations.K();
    const auto rss = residual_ss(imputations, data);
    const std::size_t n = data.size();
    const std::size_t keep = iterations - burn;

    ChainOutput out;
    out.method = "process_imputation";
    out.iterations = iterations;
    out.burn_in = burn;
    out.sigma_s_sq.reserve(keep);
    out.selected.reserve(keep);
    out.deviance.reserve(keep);

    Rng rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, K - 1);
    double ss2 = model.init_sigma_s_sq;

    if (model.kind == ModelKind::second_order) {
        out.model = "second_order";
        const auto W = basis_matrix(model.basis, imputations.grid);
        const auto stats = second_order_stats(imputations, W, model.center);
        const Eigen::Index p = W.cols();
        Eigen::VectorXd alpha = Eigen::VectorXd::Zero(p);
        double sv2 = model.init_sigma_v_sq ? *model.init_sigma_v_sq : sigma_v_start(stats[0]);
        out.alpha.resize(static_cast<Eigen::Index>(keep), p);
        out.sigma_v_sq.reserve(keep);
        std::size_t accepted = 0;
        for (std::size_t it = 0; it < iterations; ++it) {
            const std::size_t k = pick(rng);
            alpha = update_alpha(stats[k], sv2, model.basis.prior_variance, rng);
            const auto mh = update_sigma_v_sq(stats[k], alpha, sv2, model.proposal_scale, model.prior, rng);
            sv2 = mh.value;
            accepted += mh.accepted ? 1 : 0;
            ss2 = update_sigma_s_sq(rss[k], n, model.prior, rng);
            if (it >= burn) {
                out.alpha.row(static_cast<Eigen::Index>(it - burn)) = alpha.transpose();
                out.sigma_v_sq.push_back(sv2);
                out.sigma_s_sq.push_back(ss2);
                out.selected.push_back(k);
                out.deviance.push_back(-2.0 * stats[k].loglik(alpha, sv2));
            }
        }
        out.acceptance["sigma_v_sq"] = static_cast<double>(accepted) / static_cast<double>(iterations);
        out.metadata["sigma_alpha_sq"] = model.basis.prior_variance;
        out.metadata["basis_breakpoints"] = model.basis.breakpoints;
        out.metadata["basis_degree"] = model.basis.degree;
        out.metadata["proposal_scale"] = model.proposal_scale;
    } else {
        out.model = "first_order";
        const auto stats = first_order_stats(imputations, model.center);
        out.beta.reserve(keep);
        double beta = 0.0;
        for (std::size_t it = 0; it < iterations; ++it) {
            const std::size_t k = pick(rng);
            const auto c = beta_conditional(stats[k], model.sigma_beta_sq);
            beta = c.mean + std::sqrt(c.var) * std_normal(rng);
            ss2 = update_sigma_s_sq(rss[k], n, model.prior, rng);
            if (it >= burn) {
                out.beta.push_back(beta);
                out.sigma_s_sq.push_back(ss2);
                out.selected.push_back(k);
                out.deviance.push_back(-2.0 * stats[k].loglik(beta));
            }
        }
        out.metadata["sigma_beta_sq"] = model.sigma_beta_sq;
    }
    out.metadata["K"] = K;
    out.metadata["aid"] = imputations.aid;
    out.metadata["aid_params"] = imputations.params;
    out.metadata["seed"] = seed;
    out.metadata["center"] = {model.center.x(), model.center.y()};
    out.metadata["prior"] = {{"a_s", model.prior.a_s}, {"b_s", model.prior.b_s},
                             {"a_v", model.prior.a_v}, {"b_v", model.prior.b_v}};
    return out;
}

CombinedMoments combine_moments(std::span<const Eigen::VectorXd> means, std::span<const Eigen::VectorXd> variances) {
    require(!means.empty(), "need at least one set of moments");
    require(means.size() == variances.size(), "means and variances must pair up");
    const auto K = static_cast<double>(means.size());
    const Eigen::Index d = means[0].size();
    CombinedMoments c{Eigen::VectorXd::Zero(d), Eigen::VectorXd::Zero(d)};
    for (std::size_t k = 0; k < means.size(); ++k) {
        require(means[k].size() == d && variances[k].size() == d, "moment vectors must share a dimension");
        c.mean += means[k];
        c.variance += variances[k];
    }
    c.mean /= K;
    c.variance /= K;
    if (means.size() > 1) {
        Eigen::VectorXd between = Eigen::VectorXd::Zero(d);
        for (const auto& m : means) between += (m - c.mean).cwiseAbs2();
        c.variance += between / (K - 1.0);
    }
    return c;
}

double deviance_at_posterior_mean(const ChainOutput& chain, std::span<const SecondOrderStats> stats) {
    require(chain.retained() > 0 && !stats.empty(), "empty chain or imputation set");
    const Eigen::VectorXd alpha_bar = chain.alpha.colwise().mean().transpose();
    double s2 = 0.0;
    for (double v : chain.sigma_v_sq) s2 += v;
    s2 /= static_cast<double>(chain.sigma_v_sq.size());
    double d = 0.0;
    for (const auto& s : stats) d += -2.0 * s.loglik(alpha_bar, s2);
    return d / static_cast<double>(stats.size());
}

double deviance_at_posterior_mean(const ChainOutput& chain, std::span<const FirstOrderStats> stats) {
    require(chain.retained() > 0 && !stats.empty(), "empty chain or imputation set");
    double b = 0.0;
    for (double v : chain.beta) b += v;
    b /= static_cast<double>(chain.beta.size());
    double d = 0.0;
    for (const auto& s : stats) d += -2.0 * s.loglik(b);
    return d / static_cast<double>(stats.size());
}

}  // namespace procimp
