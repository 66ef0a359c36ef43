#include "procimp/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>

#include <omp.h>

#include "procimp/aid.hpp"
#include "procimp/error.hpp"
#include "procimp/evaluate.hpp"
#include "procimp/exact_mcmc.hpp"
#include "procimp/impute_mcmc.hpp"
#include "procimp/io.hpp"
#include "procimp/rng.hpp"
#include "procimp/simulate.hpp"

namespace procimp {

namespace fs = std::filesystem;
using nlohmann::json;

double Study1Settings::beta_at(double t) const {
    return beta_intercept + beta_trend * t / duration +
           beta_amplitude * std::sin(2.0 * std::numbers::pi * t / beta_period);
}

namespace {

std::vector<Regime> default_regimes() {
    return {{"large-sparse", 1e-2, 100}, {"large-dense", 1e-2, 500},
            {"small-sparse", 1e-4, 100}, {"small-dense", 1e-4, 500}};
}

json vec_json(const Vec2& v) { return json::array({v.x(), v.y()}); }

Vec2 vec_from(const json& j, const char* name) {
    require(j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number(),
            std::string(name) + " must be a two-element numeric array");
    return {j[0].get<double>(), j[1].get<double>()};
}

template <class T>
void take(const json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ValidationError(std::string("config field '") + key + "': " + e.what());
    }
}

void check_keys(const json& j, std::initializer_list<const char*> known, const std::string& where) {
    require(j.is_object(), where + " must be a JSON object");
    for (const auto& [key, _] : j.items()) {
        bool ok = false;
        for (const char* k : known) ok = ok || key == k;
        require(ok, "unknown config field '" + key + "' in " + where);
    }
}

std::string na_or(const std::optional<double>& v) { return v ? io::fmt(*v) : "NA"; }

std::string unit_id(const Regime& r, std::size_t rep) { return r.name + "/" + std::to_string(rep); }

fs::path unit_dir(const fs::path& out, const Regime& r, std::size_t rep) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%03zu", rep);
    return out / "replicates" / r.name / buf;
}

struct Row {
    std::string aid, k;
    std::optional<double> coverage, detection, cov_sv, cov_ss, cov_beta;
    double runtime = 0.0;
};

struct UnitResult {
    std::vector<Row> rows;
    json reports = json::array();
    std::vector<std::string> warnings;
    double seconds = 0.0;
};

class Stopwatch {
public:
    Stopwatch() : t0_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
    }

private:
    std::chrono::steady_clock::time_point t0_;
};

json interval_json(const ChainOutput& chain, std::string_view name, double level) {
    auto s = chain.samples(name);
    const auto iv = equal_tailed(s, level);
    return {{"lower", iv.lower}, {"median", quantile(s, 0.5)}, {"upper", iv.upper}};
}

OuAidParams fit_ou_or_best(const Telemetry& data, std::uint64_t seed, std::vector<std::string>& warnings) {
    OuFitOptions opt;
    opt.seed = seed;
    try {
        return fit_ou_aid(data, opt);
    } catch (const OuFitError& e) {
        warnings.push_back(std::string("OU fit: ") + e.what() + "; using best parameters found");
        return e.best();
    }
}

std::size_t max_k(const std::vector<KSpec>& ks) {
    std::size_t k = 1;
    for (const auto& s : ks)
        if (!s.mean_only) k = std::max(k, s.k);
    return k;
}

ImputationSet imputations_for(const ImputationSet& draws, const KSpec& ks) {
    if (ks.mean_only) {
        auto s = single_path_set(draws.mean_path(), draws.aid + "-mean");
        s.params = draws.params;
        return s;
    }
    return draws.prefix(ks.k);
}

UnitResult run_study1_unit(const StudyConfig& cfg, const Regime& regime, std::size_t rep) {
    const auto& s1 = cfg.study1;
    const std::string rs = std::to_string(rep);
    auto seed = [&](std::string_view stage, std::string_view a = "", std::string_view b = "") {
        return derive_seed(cfg.master_seed, {"study1", regime.name, rs, stage, a, b});
    };
    UnitResult res;
    const std::size_t m = cfg.scaled(s1.grid_points, 2 * regime.n_obs);
    const auto grid = build_grid(0.0, s1.duration, m);
    std::vector<double> beta_truth(m);
    for (std::size_t j = 0; j < m; ++j) beta_truth[j] = s1.beta_at(grid.time(j));

    Sde2Params sp;
    sp.sigma_v = s1.sigma_v;
    sp.potential = AttractorPotential(s1.center, beta_truth);
    sp.mu0 = s1.mu0;
    sp.v0 = s1.v0;
    const auto truth = simulate_sde2(sp, grid, seed("truth"));

    // observation times: both endpoints plus a random subset of interior grid points
    require(regime.n_obs >= 2 && regime.n_obs <= m, "regime " + regime.name + " has more observations than grid points");
    std::vector<std::size_t> interior(m - 2);
    std::iota(interior.begin(), interior.end(), std::size_t{1});
    Rng obs_rng(seed("obs"));
    std::shuffle(interior.begin(), interior.end(), obs_rng);
    std::vector<std::size_t> picked(interior.begin(), interior.begin() + static_cast<std::ptrdiff_t>(regime.n_obs - 2));
    picked.push_back(0);
    picked.push_back(m - 1);
    std::sort(picked.begin(), picked.end());
    std::vector<double> obs_times;
    for (auto j : picked) obs_times.push_back(grid.time(j));
    const auto data = observe(truth, obs_times, {regime.sigma_s_sq, false}, seed("noise"));

    ImputationModel model;
    model.kind = ModelKind::second_order;
    model.center = s1.center;
    model.prior = cfg.prior;
    model.basis = uniform_basis(grid, s1.interior_knots, s1.degree, s1.sigma_alpha_sq);
    model.proposal_scale = cfg.proposal_scale;
    const auto W = basis_matrix(model.basis, grid);
    const std::size_t iters = cfg.scaled(cfg.iterations, 200);
    const double sv_sq = s1.sigma_v * s1.sigma_v;

    auto evaluate = [&](const ImputationSet& imps, const std::string& aid, const std::string& k,
                        std::string_view chain_label) {
        Stopwatch sw;
        const auto chain = run_process_imputation(imps, data, model, iters, seed("chain", aid, chain_label));
        const double secs = sw.seconds();
        const auto band = band_from_chain(chain, W, grid.times(), cfg.level);
        const auto cd = coverage_detection(band, beta_truth);
        EvalReport rep_;
        rep_.coverage = cd.coverage;
        rep_.detection = cd.detection;
        const bool csv = scalar_coverage(chain, "sigma_v_sq", sv_sq, cfg.level);
        const bool css = scalar_coverage(chain, "sigma_s_sq", regime.sigma_s_sq, cfg.level);
        rep_.covered = {{"sigma_v_sq", csv}, {"sigma_s_sq", css}};
        rep_.check();
        Row row{aid, k, cd.coverage, cd.detection, csv ? 1.0 : 0.0, css ? 1.0 : 0.0, std::nullopt, secs};
        res.rows.push_back(row);
        json rj = rep_.to_json();
        rj["aid"] = aid;
        rj["K"] = k;
        rj["sigma_v_sq"] = interval_json(chain, "sigma_v_sq", cfg.level);
        rj["sigma_s_sq"] = interval_json(chain, "sigma_s_sq", cfg.level);
        rj["acceptance_sigma_v_sq"] = chain.acceptance.at("sigma_v_sq");
        res.reports.push_back(std::move(rj));
    };

    const std::size_t kmax = max_k(cfg.k_list);
    for (const auto& aid : cfg.aids) {
        ImputationSet draws;
        if (aid == "OU") {
            const auto params = fit_ou_or_best(data, seed("fit", aid), res.warnings);
            draws = draw_ou_paths(params, data, grid, kmax, seed("draw", aid));
        } else {
            const auto fit = fit_gp_aid(data);
            for (const auto& w : fit.warnings) res.warnings.push_back("GP fit: " + w);
            draws = draw_gp_paths(fit.params, data, grid, kmax, seed("draw", aid));
        }
        for (const auto& ks : cfg.k_list) evaluate(imputations_for(draws, ks), aid, ks.label(), ks.label());
    }
    if (cfg.truth_baseline) evaluate(single_path_set(truth, "truth"), "truth", "1", "truth");
    return res;
}

UnitResult run_study2_unit(const StudyConfig& cfg, const Regime& regime, std::size_t rep) {
    const auto& s2 = cfg.study2;
    const std::string rs = std::to_string(rep);
    auto seed = [&](std::string_view stage, std::string_view a = "", std::string_view b = "") {
        return derive_seed(cfg.master_seed, {"study2", regime.name, rs, stage, a, b});
    };
    UnitResult res;
    require(regime.n_obs >= 4, "regime " + regime.name + " needs at least four observations");

    // observation times: both endpoints plus sorted uniforms
    Rng obs_rng(seed("obs"));
    std::vector<double> obs_times{0.0, s2.duration};
    while (obs_times.size() < regime.n_obs) obs_times.push_back(s2.duration * uniform01(obs_rng));
    std::sort(obs_times.begin(), obs_times.end());
    obs_times.erase(std::unique(obs_times.begin(), obs_times.end()), obs_times.end());
    require(obs_times.size() == regime.n_obs, "duplicate observation times drawn");

    const auto sim_grid = merge_grid(build_grid(0.0, s2.duration, s2.sim_grid_points), obs_times).grid;
    const auto truth = simulate_sde1({s2.beta, s2.center, s2.sigma0_sq}, sim_grid, seed("truth"));
    const auto data = observe(truth, obs_times, {regime.sigma_s_sq, false}, seed("noise"));
    const auto grid = merge_grid(build_grid(0.0, s2.duration, cfg.scaled(s2.grid_points, 20)), obs_times).grid;

    auto record = [&](const ChainOutput& chain, const std::string& aid, const std::string& k, double secs) {
        auto bs = chain.samples("beta");
        const auto iv = equal_tailed(bs, cfg.level);
        const bool cb = iv.contains(s2.beta);
        const bool det = cb && iv.excludes_zero();
        const bool css = scalar_coverage(chain, "sigma_s_sq", regime.sigma_s_sq, cfg.level);
        EvalReport r;
        r.coverage = cb ? 1.0 : 0.0;
        r.detection = det ? 1.0 : 0.0;
        r.covered = {{"beta", cb}, {"sigma_s_sq", css}};
        r.check();
        res.rows.push_back({aid, k, *r.coverage, *r.detection, std::nullopt, css ? 1.0 : 0.0, cb ? 1.0 : 0.0, secs});
        json rj = r.to_json();
        rj["aid"] = aid;
        rj["K"] = k;
        rj["beta"] = interval_json(chain, "beta", cfg.level);
        rj["sigma_s_sq"] = interval_json(chain, "sigma_s_sq", cfg.level);
        for (const auto& [name, a] : chain.acceptance) rj["acceptance"][name] = a;
        res.reports.push_back(std::move(rj));
    };

    ImputationModel model;
    model.kind = ModelKind::first_order;
    model.center = s2.center;
    model.prior = cfg.prior;
    model.sigma_beta_sq = s2.sigma_beta_sq;
    const std::size_t iters = cfg.scaled(cfg.iterations, 200);

    {
        ExactConfig ec;
        ec.center = s2.center;
        ec.sigma_beta_sq = s2.sigma_beta_sq;
        ec.a_s = cfg.prior.a_s;
        ec.b_s = cfg.prior.b_s;
        ec.sigma0_sq = s2.sigma0_sq;
        ec.iterations = cfg.scaled(s2.exact_iterations, 200);
        Stopwatch sw;
        const auto chain = run_exact(data, grid, ec, seed("exact"));
        record(chain, "exact", "NA", sw.seconds());
    }

    const std::size_t kmax = max_k(cfg.k_list);
    for (const auto& aid : cfg.aids) {
        ImputationSet draws;
        if (aid == "OU") {
            const auto params = fit_ou_or_best(data, seed("fit", aid), res.warnings);
            draws = draw_ou_paths(params, data, grid, kmax, seed("draw", aid));
        } else {
            const auto fit = fit_gp_aid(data);
            for (const auto& w : fit.warnings) res.warnings.push_back("GP fit: " + w);
            draws = draw_gp_paths(fit.params, data, grid, kmax, seed("draw", aid));
        }
        for (const auto& ks : cfg.k_list) {
            Stopwatch sw;
            const auto chain = run_process_imputation(imputations_for(draws, ks), data, model, iters,
                                                      seed("chain", aid, ks.label()));
            record(chain, aid, ks.label(), sw.seconds());
        }
    }
    if (cfg.truth_baseline) {
        Stopwatch sw;
        const auto chain =
            run_process_imputation(single_path_set(truth, "truth"), data, model, iters, seed("chain", "truth"));
        record(chain, "truth", "1", sw.seconds());
    }
    return res;
}

std::string rows_csv(const StudyConfig& cfg, const Regime& regime, std::size_t rep, const std::vector<Row>& rows) {
    std::ostringstream os;
    for (const auto& r : rows) {
        os << regime.name << ',' << r.aid << ',' << r.k << ',' << rep << ',' << na_or(r.coverage) << ','
           << na_or(r.detection) << ',' << na_or(r.cov_sv) << ',' << na_or(r.cov_ss) << ',' << na_or(r.cov_beta)
           << ',' << (cfg.record_runtime ? io::fmt(r.runtime) : std::string("NA")) << '\n';
    }
    return os.str();
}

std::string config_digest(const StudyConfig& cfg) {
    const auto text = cfg.to_json().dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

struct Manifest {
    std::string digest;
    std::set<std::string> completed;
};

json manifest_json(const StudyConfig& cfg, const Manifest& m) {
    return {{"format", "procimp-study-checkpoint"},
            {"version", 1},
            {"config_digest", m.digest},
            {"config", cfg.to_json()},
            {"completed", std::vector<std::string>(m.completed.begin(), m.completed.end())}};
}

Manifest read_manifest(const fs::path& file, const StudyConfig& cfg) {
    require(fs::exists(file), "no checkpoint manifest at " + file.string());
    const auto j = io::read_json(file);
    const bool shape = j.is_object() && j.value("format", "") == "procimp-study-checkpoint" &&
                       j.contains("config_digest") && j["config_digest"].is_string() && j.contains("completed") &&
                       j["completed"].is_array();
    require(shape, "corrupted checkpoint manifest " + file.string());
    Manifest m;
    m.digest = j["config_digest"].get<std::string>();
    require(m.digest == config_digest(cfg), "checkpoint was written for a different configuration");
    for (const auto& u : j["completed"]) {
        require(u.is_string(), "corrupted checkpoint manifest " + file.string());
        m.completed.insert(u.get<std::string>());
    }
    return m;
}

std::string aggregate_csv(const std::vector<SummaryRow>& rows) {
    using Key = std::tuple<std::string, std::string, std::string>;
    std::vector<Key> order;
    std::map<Key, std::vector<const SummaryRow*>> groups;
    for (const auto& r : rows) {
        Key k{r.regime, r.aid, r.k};
        if (!groups.count(k)) order.push_back(k);
        groups[k].push_back(&r);
    }
    std::ostringstream os;
    os << "regime,AID,K,replicates,coverage_beta_mean,coverage_beta_q125,coverage_beta_q875,"
          "detection_beta_mean,detection_beta_q125,detection_beta_q875,covered_sigma_v_sq_rate,"
          "covered_sigma_s_sq_rate,covered_beta_scalar_rate\n";
    auto mean_q = [](std::vector<double> v) -> std::string {
        if (v.empty()) return "NA,NA,NA";
        const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
        return io::fmt(mean) + "," + io::fmt(quantile(v, 0.125)) + "," + io::fmt(quantile(v, 0.875));
    };
    auto rate = [](const std::vector<double>& v) -> std::string {
        if (v.empty()) return "NA";
        return io::fmt(std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()));
    };
    for (const auto& k : order) {
        std::vector<double> cov, det, sv, ss, sb;
        for (const auto* r : groups[k]) {
            if (r->coverage_beta) cov.push_back(*r->coverage_beta);
            if (r->detection_beta) det.push_back(*r->detection_beta);
            if (r->covered_sigma_v_sq) sv.push_back(*r->covered_sigma_v_sq);
            if (r->covered_sigma_s_sq) ss.push_back(*r->covered_sigma_s_sq);
            if (r->covered_beta_scalar) sb.push_back(*r->covered_beta_scalar);
        }
        os << std::get<0>(k) << ',' << std::get<1>(k) << ',' << std::get<2>(k) << ',' << groups[k].size() << ','
           << mean_q(cov) << ',' << mean_q(det) << ',' << rate(sv) << ',' << rate(ss) << ',' << rate(sb) << '\n';
    }
    return os.str();
}

StudyReport execute(const StudyConfig& cfg, const fs::path& out, Manifest manifest, const StudyRunOptions& opt) {
    if (opt.threads > 0) omp_set_num_threads(opt.threads);
    const fs::path manifest_file = out / "checkpoint.json";

    struct Unit {
        const Regime* regime;
        std::size_t rep;
    };
    std::vector<Unit> units, pending;
    for (const auto& r : cfg.regimes)
        for (std::size_t i = 0; i < cfg.replicate_count(); ++i) units.push_back({&r, i});
    for (const auto& u : units) {
        const bool done = manifest.completed.count(unit_id(*u.regime, u.rep)) &&
                          fs::exists(unit_dir(out, *u.regime, u.rep) / "rows.csv");
        if (!done) pending.push_back(u);
    }

    StudyReport report;
    report.out_dir = out;
    report.units_total = units.size();
    std::atomic<std::size_t> started{0};
    std::size_t failures = 0, ran = 0;
    json failure_log = json::array();
    const std::size_t budget = opt.max_units.value_or(pending.size());

#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t ui = 0; ui < static_cast<std::ptrdiff_t>(pending.size()); ++ui) {
        if (started.fetch_add(1) >= budget) continue;
        const auto& u = pending[static_cast<std::size_t>(ui)];
        const auto dir = unit_dir(out, *u.regime, u.rep);
        const auto id = unit_id(*u.regime, u.rep);
        try {
            Stopwatch sw;
            auto res = cfg.study_id == 1 ? run_study1_unit(cfg, *u.regime, u.rep)
                                         : run_study2_unit(cfg, *u.regime, u.rep);
            res.seconds = sw.seconds();
            fs::create_directories(dir);
            io::write_json(dir / "reports.json", {{"unit", id}, {"reports", res.reports}, {"warnings", res.warnings}});
            json timing = json::array();
            for (const auto& r : res.rows) timing.push_back({{"AID", r.aid}, {"K", r.k}, {"seconds", r.runtime}});
            io::write_json(dir / "timing.json", {{"unit_seconds", res.seconds}, {"chains", timing}});
            io::write_atomic(dir / "rows.csv", rows_csv(cfg, *u.regime, u.rep, res.rows));
#pragma omp critical(procimp_manifest)
            {
                manifest.completed.insert(id);
                io::write_json(manifest_file, manifest_json(cfg, manifest));
                ++ran;
            }
        } catch (const std::exception& e) {
#pragma omp critical(procimp_manifest)
            {
                ++failures;
                failure_log.push_back({{"unit", id}, {"error", e.what()}});
            }
        }
    }

    report.units_run = ran;
    report.failures = failures;
    for (const auto& u : units)
        if (manifest.completed.count(unit_id(*u.regime, u.rep))) ++report.units_completed;
    if (failures > 0) io::write_json(out / "failures.json", failure_log);

    const bool interrupted = opt.max_units && pending.size() > *opt.max_units;
    report.complete = report.units_completed == report.units_total;
    if (interrupted) return report;

    const fs::path summary = out / "summary.csv";
    if (ran > 0 || failures > 0 || !fs::exists(summary) || !fs::exists(out / "aggregate.csv")) {
        std::string text = std::string(kSummaryHeader) + "\n";
        std::string timings = "regime,replicate,AID,K,seconds\n";
        for (const auto& u : units) {
            const auto dir = unit_dir(out, *u.regime, u.rep);
            if (!manifest.completed.count(unit_id(*u.regime, u.rep)) || !fs::exists(dir / "rows.csv")) continue;
            text += io::read_text(dir / "rows.csv");
            if (fs::exists(dir / "timing.json")) {
                const auto t = io::read_json(dir / "timing.json");
                for (const auto& c : t["chains"])
                    timings += u.regime->name + "," + std::to_string(u.rep) + "," + c["AID"].get<std::string>() +
                               "," + c["K"].get<std::string>() + "," + io::fmt(c["seconds"].get<double>()) + "\n";
            }
        }
        io::write_atomic(summary, text);
        io::write_atomic(out / "timings.csv", timings);
        io::write_atomic(out / "aggregate.csv", aggregate_csv(read_summary(summary)));
    }
    report.rows = read_summary(summary).size();
    return report;
}

}  // namespace

StudyConfig StudyConfig::defaults(int id) {
    require(id == 1 || id == 2, "study id must be 1 or 2");
    StudyConfig c;
    c.study_id = id;
    c.regimes = default_regimes();
    c.k_list = {{true, 1}, {false, 8}, {false, 32}, {false, 128}};
    c.aids = id == 1 ? std::vector<std::string>{"OU", "GP"} : std::vector<std::string>{"OU"};
    return c;
}

std::size_t StudyConfig::replicate_count() const {
    if (replicates) return *replicates;
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(static_cast<double>(base_replicates) * scale)));
}

std::size_t StudyConfig::scaled(std::size_t full, std::size_t minimum) const {
    return std::max(minimum, static_cast<std::size_t>(std::lround(static_cast<double>(full) * scale)));
}

void StudyConfig::validate() const {
    require(study_id == 1 || study_id == 2, "study id must be 1 or 2");
    require(scale > 0.0 && std::isfinite(scale), "scale must be positive");
    require(!regimes.empty(), "at least one regime is required");
    std::set<std::string> names;
    for (const auto& r : regimes) {
        require(!r.name.empty() && r.name.find_first_of(",/\\ ") == std::string::npos,
                "regime names must be non-empty without commas, slashes or spaces");
        require(names.insert(r.name).second, "duplicate regime name " + r.name);
        require(r.sigma_s_sq > 0.0 && r.n_obs > 0, "regime values must be positive");
    }
    require(base_replicates >= 1 && (!replicates || *replicates >= 1), "replicate count must be at least 1");
    require(!k_list.empty(), "K list must not be empty");
    for (const auto& k : k_list) require(k.mean_only || k.k >= 1, "K values must be positive");
    require(!aids.empty(), "AID list must not be empty");
    for (const auto& a : aids) require(a == "OU" || a == "GP", "unknown AID '" + a + "' (expected OU or GP)");
    require(iterations >= 2, "iterations must be at least 2");
    require(proposal_scale >= 0.0, "proposal scale must be nonnegative");
    require(level > 0.0 && level < 1.0, "credible level must be in (0, 1)");
    prior.validate();
    require(study1.duration > 0.0 && study1.sigma_v > 0.0 && study1.grid_points >= 2 && study1.degree >= 0 &&
                study1.sigma_alpha_sq > 0.0 && study1.beta_period > 0.0,
            "invalid study-1 settings");
    require(study2.duration > 0.0 && study2.sim_grid_points >= 2 && study2.grid_points >= 2 &&
                study2.sigma0_sq > 0.0 && study2.sigma_beta_sq > 0.0 && study2.exact_iterations >= 2,
            "invalid study-2 settings");
}

json StudyConfig::to_json() const {
    json regs = json::array();
    for (const auto& r : regimes) regs.push_back({{"name", r.name}, {"sigma_s_sq", r.sigma_s_sq}, {"n_obs", r.n_obs}});
    json ks = json::array();
    for (const auto& k : k_list) ks.push_back(k.mean_only ? json("mean") : json(k.k));
    json j = {
        {"study_id", study_id},
        {"scale", scale},
        {"regimes", regs},
        {"base_replicates", base_replicates},
        {"replicates", replicates ? json(*replicates) : json(nullptr)},
        {"K", ks},
        {"truth_baseline", truth_baseline},
        {"aids", aids},
        {"iterations", iterations},
        {"proposal_scale", proposal_scale},
        {"prior", {{"a_s", prior.a_s}, {"b_s", prior.b_s}, {"a_v", prior.a_v}, {"b_v", prior.b_v}}},
        {"master_seed", master_seed},
        {"record_runtime", record_runtime},
        {"level", level},
    };
    if (study_id == 1) {
        const auto& s = study1;
        j["study1"] = {{"duration", s.duration},
                       {"grid_points", s.grid_points},
                       {"sigma_v", s.sigma_v},
                       {"center", vec_json(s.center)},
                       {"mu0", vec_json(s.mu0)},
                       {"v0", vec_json(s.v0)},
                       {"beta_intercept", s.beta_intercept},
                       {"beta_trend", s.beta_trend},
                       {"beta_amplitude", s.beta_amplitude},
                       {"beta_period", s.beta_period},
                       {"interior_knots", s.interior_knots},
                       {"degree", s.degree},
                       {"sigma_alpha_sq", s.sigma_alpha_sq}};
    } else {
        const auto& s = study2;
        j["study2"] = {{"duration", s.duration},
                       {"sim_grid_points", s.sim_grid_points},
                       {"grid_points", s.grid_points},
                       {"beta", s.beta},
                       {"center", vec_json(s.center)},
                       {"sigma0_sq", s.sigma0_sq},
                       {"sigma_beta_sq", s.sigma_beta_sq},
                       {"exact_iterations", s.exact_iterations}};
    }
    return j;
}

StudyConfig StudyConfig::from_json(const json& j, int study_id) {
    check_keys(j,
               {"study_id", "scale", "regimes", "base_replicates", "replicates", "K", "truth_baseline", "aids",
                "iterations", "proposal_scale", "prior", "master_seed", "record_runtime", "level", "study1",
                "study2"},
               "study config");
    int id = study_id;
    take(j, "study_id", id);
    auto c = defaults(id);
    take(j, "scale", c.scale);
    take(j, "base_replicates", c.base_replicates);
    if (j.contains("replicates") && !j["replicates"].is_null()) {
        std::size_t r = 0;
        take(j, "replicates", r);
        c.replicates = r;
    }
    take(j, "truth_baseline", c.truth_baseline);
    take(j, "aids", c.aids);
    take(j, "iterations", c.iterations);
    take(j, "proposal_scale", c.proposal_scale);
    take(j, "master_seed", c.master_seed);
    take(j, "record_runtime", c.record_runtime);
    take(j, "level", c.level);
    if (j.contains("regimes")) {
        require(j["regimes"].is_array(), "regimes must be an array");
        c.regimes.clear();
        for (const auto& r : j["regimes"]) {
            check_keys(r, {"name", "sigma_s_sq", "n_obs"}, "regime");
            Regime g{"", 0.0, 0};
            take(r, "name", g.name);
            take(r, "sigma_s_sq", g.sigma_s_sq);
            take(r, "n_obs", g.n_obs);
            c.regimes.push_back(g);
        }
    }
    if (j.contains("K")) {
        require(j["K"].is_array(), "K must be an array");
        c.k_list.clear();
        for (const auto& k : j["K"]) {
            if (k.is_string()) {
                require(k.get<std::string>() == "mean", "K entries must be positive integers or \"mean\"");
                c.k_list.push_back({true, 1});
            } else {
                require(k.is_number_integer() && k.get<long long>() >= 1,
                        "K entries must be positive integers or \"mean\"");
                c.k_list.push_back({false, k.get<std::size_t>()});
            }
        }
    }
    if (j.contains("prior")) {
        const auto& p = j["prior"];
        check_keys(p, {"a_s", "b_s", "a_v", "b_v"}, "prior");
        take(p, "a_s", c.prior.a_s);
        take(p, "b_s", c.prior.b_s);
        take(p, "a_v", c.prior.a_v);
        take(p, "b_v", c.prior.b_v);
    }
    if (j.contains("study1")) {
        const auto& s = j["study1"];
        check_keys(s,
                   {"duration", "grid_points", "sigma_v", "center", "mu0", "v0", "beta_intercept", "beta_trend",
                    "beta_amplitude", "beta_period", "interior_knots", "degree", "sigma_alpha_sq"},
                   "study1");
        auto& d = c.study1;
        take(s, "duration", d.duration);
        take(s, "grid_points", d.grid_points);
        take(s, "sigma_v", d.sigma_v);
        if (s.contains("center")) d.center = vec_from(s["center"], "center");
        if (s.contains("mu0")) d.mu0 = vec_from(s["mu0"], "mu0");
        if (s.contains("v0")) d.v0 = vec_from(s["v0"], "v0");
        take(s, "beta_intercept", d.beta_intercept);
        take(s, "beta_trend", d.beta_trend);
        take(s, "beta_amplitude", d.beta_amplitude);
        take(s, "beta_period", d.beta_period);
        take(s, "interior_knots", d.interior_knots);
        take(s, "degree", d.degree);
        take(s, "sigma_alpha_sq", d.sigma_alpha_sq);
    }
    if (j.contains("study2")) {
        const auto& s = j["study2"];
        check_keys(s,
                   {"duration", "sim_grid_points", "grid_points", "beta", "center", "sigma0_sq", "sigma_beta_sq",
                    "exact_iterations"},
                   "study2");
        auto& d = c.study2;
        take(s, "duration", d.duration);
        take(s, "sim_grid_points", d.sim_grid_points);
        take(s, "grid_points", d.grid_points);
        take(s, "beta", d.beta);
        if (s.contains("center")) d.center = vec_from(s["center"], "center");
        take(s, "sigma0_sq", d.sigma0_sq);
        take(s, "sigma_beta_sq", d.sigma_beta_sq);
        take(s, "exact_iterations", d.exact_iterations);
    }
    c.validate();
    return c;
}

StudyReport run_study(const StudyConfig& config, const fs::path& out_dir, const StudyRunOptions& options) {
    config.validate();
    fs::create_directories(out_dir);
    Manifest m;
    m.digest = config_digest(config);
    io::write_json(out_dir / "config.json", config.to_json());
    io::write_json(out_dir / "checkpoint.json", manifest_json(config, m));
    return execute(config, out_dir, std::move(m), options);
}

StudyReport resume_study(const StudyConfig& config, const fs::path& out_dir, const StudyRunOptions& options) {
    config.validate();
    auto m = read_manifest(out_dir / "checkpoint.json", config);
    return execute(config, out_dir, std::move(m), options);
}

std::vector<SummaryRow> read_summary(const fs::path& summary_csv) {
    std::istringstream in(io::read_text(summary_csv));
    std::string line;
    require(static_cast<bool>(std::getline(in, line)) && line == kSummaryHeader,
            "unexpected summary header in " + summary_csv.string());
    std::vector<SummaryRow> rows;
    auto opt = [](const std::string& s) -> std::optional<double> {
        if (s == "NA") return std::nullopt;
        return std::stod(s);
    };
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) f.push_back(cell);
        require(f.size() == 10, "malformed summary row: " + line);
        SummaryRow r;
        r.regime = f[0];
        r.aid = f[1];
        r.k = f[2];
        r.replicate = std::stoul(f[3]);
        r.coverage_beta = opt(f[4]);
        r.detection_beta = opt(f[5]);
        r.covered_sigma_v_sq = opt(f[6]);
        r.covered_sigma_s_sq = opt(f[7]);
        r.covered_beta_scalar = opt(f[8]);
        rows.push_back(r);
    }
    return rows;
}

}  // namespace procimp
