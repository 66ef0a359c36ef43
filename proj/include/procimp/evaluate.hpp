#pragma once

// Evaluation metrics: credible bands for beta(t), coverage/detection regions,
// interval coverage for scalars, Gelman-Rubin PSRF, and DIC.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "procimp/impute_mcmc.hpp"

namespace procimp {

/// Type-7 empirical quantile (linear interpolation between order statistics).
/// `sorted` must be ascending.
double quantile_sorted(std::span<const double> sorted, double p);
double quantile(std::vector<double> values, double p);

struct Interval {
    double lower;
    double upper;

    bool contains(double x) const { return lower <= x && x <= upper; }
    bool excludes_zero() const { return lower > 0.0 || upper < 0.0; }
};

/// Equal-tailed interval at `level` from samples.
Interval equal_tailed(std::vector<double> samples, double level = 0.95);

struct IntervalBand {
    std::vector<double> times;
    std::vector<double> lower;
    std::vector<double> upper;
    double level = 0.95;
};

/// Pointwise equal-tailed band for beta(t_j) = W_j alpha over the retained samples (>= 100).
IntervalBand band_from_chain(const ChainOutput& chain, const Eigen::MatrixXd& W,
                             std::span<const double> times, double level = 0.95);

struct CoverageDetection {
    double coverage;
    double detection;
};

/// Fraction of grid times with the truth inside the band, and inside while the band excludes 0.
CoverageDetection coverage_detection(const IntervalBand& band, std::span<const double> truth);

/// Equal-tailed interval for a named scalar contains `truth`.
bool scalar_coverage(const ChainOutput& chain, std::string_view parameter, double truth, double level = 0.95);

struct PsrfResult {
    double rhat;
    std::optional<std::string> warning;
};

/// Gelman-Rubin potential scale reduction over >= 2 equal-length chains.
PsrfResult gelman_rubin(std::span<const std::vector<double>> chains);
PsrfResult gelman_rubin(std::span<const ChainOutput> chains, std::string_view parameter);

struct DicResult {
    double mean_deviance;  // D-bar
    double p_d;
    double dic;
};

DicResult dic(std::span<const double> deviances, double deviance_at_mean);
/// DIC from the chain's stored deviances; D(theta-bar) averages over the imputed paths.
DicResult dic(const ChainOutput& chain, std::span<const SecondOrderStats> stats);
DicResult dic(const ChainOutput& chain, std::span<const FirstOrderStats> stats);

struct EvalReport {
    std::optional<double> coverage;
    std::optional<double> detection;
    std::vector<std::pair<std::string, bool>> covered;
    std::vector<std::pair<std::string, double>> psrf;
    std::optional<DicResult> dic;
    std::vector<std::string> warnings;

    /// Throws if detection exceeds coverage.
    void check() const;
    nlohmann::json to_json() const;
};

}  // namespace procimp
