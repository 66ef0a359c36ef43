#pragma once

// Replicated simulation studies.
//
// Study 1: second-order model with time-varying beta(t); OU and GP AIDs; coverage and
// detection regions for beta(t) plus interval coverage for sigma_v^2 and sigma_s^2.
// Study 2: first-order model with scalar beta; OU AID versus exact path-sampling MCMC.
//
// Each (regime, replicate) unit is independent, seeded from the master seed and its
// labels, and writes its own directory. summary.csv is assembled from the unit results
// in a fixed order, so it is byte-identical across reruns and resumptions.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "procimp/core.hpp"

namespace procimp {

struct Regime {
    std::string name;
    double sigma_s_sq;
    std::size_t n_obs;
};

/// One entry of the K list: either the AID mean path alone or K random draws.
struct KSpec {
    bool mean_only = false;
    std::size_t k = 1;

    std::string label() const { return mean_only ? "mean" : std::to_string(k); }
};

struct Study1Settings {
    double duration = 100.0;         // hours
    std::size_t grid_points = 2000;  // full-scale grid size
    double sigma_v = 1.0;
    Vec2 center = Vec2::Zero();
    Vec2 mu0{5.0, 0.0};
    Vec2 v0 = Vec2::Zero();
    // beta(t) = intercept + trend * t / duration + amplitude * sin(2 pi t / period)
    double beta_intercept = -0.25;
    double beta_trend = 0.5;
    double beta_amplitude = 1.0;
    double beta_period = 100.0;
    std::size_t interior_knots = 8;
    int degree = 3;
    double sigma_alpha_sq = 1.0;

    double beta_at(double t) const;
};

struct Study2Settings {
    double duration = 100.0;
    std::size_t sim_grid_points = 1000;  // truth resolution, not scaled
    std::size_t grid_points = 500;       // latent grid for inference, scaled
    double beta = 0.5;
    Vec2 center = Vec2::Zero();
    double sigma0_sq = 100.0;
    double sigma_beta_sq = 1e5;
    std::size_t exact_iterations = 20000;  // full scale
};

struct StudyConfig {
    int study_id = 1;
    double scale = 1.0;
    std::vector<Regime> regimes;
    std::size_t base_replicates = 24;          // scaled by `scale`
    std::optional<std::size_t> replicates;     // explicit count, not scaled
    std::vector<KSpec> k_list;
    bool truth_baseline = true;
    std::vector<std::string> aids;
    std::size_t iterations = 10000;  // process-imputation chain length, full scale
    double proposal_scale = 0.2;
    PriorSpec prior;
    std::uint64_t master_seed = 20170501;
    bool record_runtime = false;  // runtime_s is "NA" unless set (keeps summary.csv reproducible)
    double level = 0.95;
    Study1Settings study1;
    Study2Settings study2;

    static StudyConfig defaults(int study_id);
    /// Values in `j` override the defaults of the study named by j["study_id"] (or `study_id`).
    static StudyConfig from_json(const nlohmann::json& j, int study_id = 1);
    nlohmann::json to_json() const;
    void validate() const;

    std::size_t replicate_count() const;
    std::size_t scaled(std::size_t full, std::size_t minimum) const;
};

struct StudyRunOptions {
    int threads = 0;                       // 0: OpenMP default
    std::optional<std::size_t> max_units;  // stop after this many newly completed units
};

struct StudyReport {
    std::filesystem::path out_dir;
    std::size_t units_total = 0;
    std::size_t units_completed = 0;
    std::size_t units_run = 0;
    std::size_t failures = 0;
    bool complete = false;
    std::size_t rows = 0;
};

/// Header of summary.csv.
inline constexpr const char* kSummaryHeader =
    "regime,AID,K,replicate,coverage_beta,detection_beta,covered_sigma_v_sq,covered_sigma_s_sq,"
    "covered_beta_scalar,runtime_s";

/// Fresh run: writes a new checkpoint manifest and computes every unit.
StudyReport run_study(const StudyConfig& config, const std::filesystem::path& out_dir,
                      const StudyRunOptions& options = {});

/// Continue from the manifest in `out_dir`; completed units are skipped.
StudyReport resume_study(const StudyConfig& config, const std::filesystem::path& out_dir,
                         const StudyRunOptions& options = {});

/// One parsed summary.csv row.
struct SummaryRow {
    std::string regime, aid, k;
    std::size_t replicate = 0;
    std::optional<double> coverage_beta, detection_beta;
    std::optional<double> covered_sigma_v_sq, covered_sigma_s_sq, covered_beta_scalar;
};
std::vector<SummaryRow> read_summary(const std::filesystem::path& summary_csv);

}  // namespace procimp
