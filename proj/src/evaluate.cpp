#include "procimp/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "procimp/error.hpp"

namespace procimp {

double quantile_sorted(std::span<const double> sorted, double p) {
    require(!sorted.empty(), "quantile of an empty sample");
    require(p >= 0.0 && p <= 1.0, "quantile level must be in [0, 1]");
    const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double quantile(std::vector<double> values, double p) {
    std::sort(values.begin(), values.end());
    return quantile_sorted(values, p);
}

Interval equal_tailed(std::vector<double> samples, double level) {
    require(level > 0.0 && level < 1.0, "credible level must be in (0, 1)");
    std::sort(samples.begin(), samples.end());
    const double tail = 0.5 * (1.0 - level);
    return {quantile_sorted(samples, tail), quantile_sorted(samples, 1.0 - tail)};
}

IntervalBand band_from_chain(const ChainOutput& chain, const Eigen::MatrixXd& W, std::span<const double> times,
                             double level) {
    require(chain.alpha.rows() >= 100, "band needs at least 100 retained samples");
    require(W.cols() == chain.alpha.cols(), "basis matrix does not match alpha dimension");
    require(static_cast<std::size_t>(W.rows()) == times.size(), "basis matrix rows must match times");
    const Eigen::MatrixXd beta = chain.alpha * W.transpose();  // samples x m
    IntervalBand band;
    band.level = level;
    band.times.assign(times.begin(), times.end());
    band.lower.resize(times.size());
    band.upper.resize(times.size());
    std::vector<double> col(static_cast<std::size_t>(beta.rows()));
    for (Eigen::Index j = 0; j < beta.cols(); ++j) {
        for (Eigen::Index r = 0; r < beta.rows(); ++r) col[static_cast<std::size_t>(r)] = beta(r, j);
        const auto iv = equal_tailed(col, level);
        band.lower[static_cast<std::size_t>(j)] = iv.lower;
        band.upper[static_cast<std::size_t>(j)] = iv.upper;
    }
    return band;
}

CoverageDetection coverage_detection(const IntervalBand& band, std::span<const double> truth) {
    require(truth.size() == band.times.size() && band.lower.size() == truth.size() &&
                band.upper.size() == truth.size(),
            "band and truth grids do not match");
    require(!truth.empty(), "empty band");
    std::size_t covered = 0, detected = 0;
    for (std::size_t j = 0; j < truth.size(); ++j) {
        const Interval iv{band.lower[j], band.upper[j]};
        if (iv.contains(truth[j])) {
            ++covered;
            if (iv.excludes_zero()) ++detected;
        }
    }
    const auto n = static_cast<double>(truth.size());
    return {static_cast<double>(covered) / n, static_cast<double>(detected) / n};
}

bool scalar_coverage(const ChainOutput& chain, std::string_view parameter, double truth, double level) {
    auto s = chain.samples(parameter);
    require(!s.empty(), "no samples for " + std::string(parameter));
    return equal_tailed(std::move(s), level).contains(truth);
}

PsrfResult gelman_rubin(std::span<const std::vector<double>> chains) {
    require(chains.size() >= 2, "PSRF needs at least two chains");
    const std::size_t n = chains[0].size();
    require(n >= 2, "PSRF needs at least two samples per chain");
    for (const auto& c : chains) require(c.size() == n, "PSRF chains must have equal length");
    const auto c = static_cast<double>(chains.size());
    const auto nd = static_cast<double>(n);
    std::vector<double> means;
    double W = 0.0;
    for (const auto& ch : chains) {
        double m = 0.0;
        for (double x : ch) m += x;
        m /= nd;
        double v = 0.0;
        for (double x : ch) v += (x - m) * (x - m);
        W += v / (nd - 1.0);
        means.push_back(m);
    }
    W /= c;
    double grand = 0.0;
    for (double m : means) grand += m;
    grand /= c;
    double B = 0.0;
    for (double m : means) B += (m - grand) * (m - grand);
    B = nd * B / (c - 1.0);
    if (W <= 0.0) {
        if (B <= 0.0) return {std::sqrt((nd - 1.0) / nd), std::string("all chains constant and equal")};
        return {std::numeric_limits<double>::infinity(), std::string("zero within-chain variance")};
    }
    return {std::sqrt(((nd - 1.0) / nd * W + B / nd) / W), std::nullopt};
}

PsrfResult gelman_rubin(std::span<const ChainOutput> chains, std::string_view parameter) {
    std::vector<std::vector<double>> traces;
    for (const auto& c : chains) traces.push_back(c.samples(parameter));
    return gelman_rubin(traces);
}

DicResult dic(std::span<const double> deviances, double deviance_at_mean) {
    require(!deviances.empty(), "DIC needs stored deviances");
    double dbar = 0.0;
    for (double d : deviances) dbar += d;
    dbar /= static_cast<double>(deviances.size());
    const double pd = dbar - deviance_at_mean;
    return {dbar, pd, dbar + pd};
}

DicResult dic(const ChainOutput& chain, std::span<const SecondOrderStats> stats) {
    return dic(chain.deviance, deviance_at_posterior_mean(chain, stats));
}

DicResult dic(const ChainOutput& chain, std::span<const FirstOrderStats> stats) {
    return dic(chain.deviance, deviance_at_posterior_mean(chain, stats));
}

void EvalReport::check() const {
    if (coverage && detection && *detection > *coverage)
        throw NumericalError("detection region exceeds coverage region");
}

nlohmann::json EvalReport::to_json() const {
    nlohmann::json j = nlohmann::json::object();
    if (coverage) j["coverage"] = *coverage;
    if (detection) j["detection"] = *detection;
    for (const auto& [name, flag] : covered) j["covered"][name] = flag;
    for (const auto& [name, v] : psrf) j["psrf"][name] = std::isfinite(v) ? nlohmann::json(v) : nlohmann::json("inf");
    if (dic) j["dic"] = {{"mean_deviance", dic->mean_deviance}, {"p_d", dic->p_d}, {"dic", dic->dic}};
    j["warnings"] = warnings;
    return j;
}

}  // namespace procimp
