// procimp command-line driver: simulate, fit, study, select-tuning.
//
// Exit codes: 0 success, 2 usage, 3 validation, 4 numerical failure.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <omp.h>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "procimp/aid.hpp"
#include "procimp/complete_data.hpp"
#include "procimp/error.hpp"
#include "procimp/evaluate.hpp"
#include "procimp/experiments.hpp"
#include "procimp/impute_mcmc.hpp"
#include "procimp/io.hpp"
#include "procimp/rng.hpp"
#include "procimp/simulate.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace procimp;

namespace {

constexpr int kUsage = 2;
constexpr int kValidation = 3;
constexpr int kNumerical = 4;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

json load_config(const std::string& file) {
    if (file.empty()) return json::object();
    auto j = io::read_json(file);
    require(j.is_object(), file + ": config must be a JSON object");
    return j;
}

/// defaults <- config file; unknown keys rejected.
json merge_config(const json& defaults, const json& user, const std::string& where) {
    json out = defaults;
    for (const auto& [k, v] : user.items()) {
        require(defaults.contains(k), "unknown config field '" + k + "' in " + where);
        out[k] = v;
    }
    return out;
}

Vec2 vec2(const json& j, const std::string& name) {
    require(j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number(),
            name + " must be a two-element numeric array");
    return {j[0].get<double>(), j[1].get<double>()};
}

template <class T>
T get(const json& j, const std::string& key) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ValidationError("config field '" + key + "': " + e.what());
    }
}

std::optional<std::uint64_t> env_seed() {
    const char* s = std::getenv("MI_SEED");
    if (!s || !*s) return std::nullopt;
    try {
        std::size_t pos = 0;
        const auto v = std::stoull(s, &pos);
        require(pos == std::string(s).size(), "MI_SEED must be an unsigned integer");
        return v;
    } catch (const std::logic_error&) {
        throw ValidationError("MI_SEED must be an unsigned integer");
    }
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag, const json& cfg) {
    if (flag) return *flag;
    if (auto e = env_seed()) return *e;
    return get<std::uint64_t>(cfg, "seed");
}

void set_threads(int threads) {
    if (threads > 0) omp_set_num_threads(threads);
}

// ---------------------------------------------------------------------------
// simulate

json simulate_defaults(const std::string& model) {
    json j = {{"duration", 100.0}, {"center", {0.0, 0.0}}, {"sigma_s_sq", 1e-2},
              {"n_obs", 100},      {"seed", 20170501}};
    if (model == "sde2") {
        j["grid_points"] = 2000;
        j["sigma_v"] = 1.0;
        j["mu0"] = {5.0, 0.0};
        j["v0"] = {0.0, 0.0};
        j["beta"] = {{"intercept", -0.25}, {"trend", 0.5}, {"amplitude", 1.0}, {"period", 100.0}};
    } else {
        j["grid_points"] = 1000;
        j["beta"] = 0.5;
        j["sigma0_sq"] = 100.0;
    }
    return j;
}

int cmd_simulate(const std::string& model, const json& cfg, const fs::path& out, std::uint64_t seed) {
    const double T = get<double>(cfg, "duration");
    const auto m = get<std::size_t>(cfg, "grid_points");
    const auto n = get<std::size_t>(cfg, "n_obs");
    require(T > 0.0, "duration must be positive");
    require(n >= 2 && n <= m, "n_obs must be in [2, grid_points]");
    const auto grid = build_grid(0.0, T, m);
    const Vec2 c = vec2(cfg.at("center"), "center");

    LatentPath truth;
    json params = cfg;
    params["model"] = model;
    params["seed"] = seed;
    if (model == "sde2") {
        Sde2Params p;
        p.sigma_v = get<double>(cfg, "sigma_v");
        p.mu0 = vec2(cfg.at("mu0"), "mu0");
        p.v0 = vec2(cfg.at("v0"), "v0");
        const auto& b = cfg.at("beta");
        if (b.is_number()) {
            p.potential = AttractorPotential(c, b.get<double>());
        } else {
            const json bd = merge_config(simulate_defaults("sde2")["beta"], b, "beta");
            Study1Settings s;
            s.duration = T;
            s.beta_intercept = get<double>(bd, "intercept");
            s.beta_trend = get<double>(bd, "trend");
            s.beta_amplitude = get<double>(bd, "amplitude");
            s.beta_period = get<double>(bd, "period");
            std::vector<double> beta(m);
            for (std::size_t j = 0; j < m; ++j) beta[j] = s.beta_at(grid.time(j));
            p.potential = AttractorPotential(c, beta);
        }
        truth = simulate_sde2(p, grid, derive_seed(seed, {"truth"}));
    } else {
        Sde1Params p{get<double>(cfg, "beta"), c, get<double>(cfg, "sigma0_sq")};
        truth = simulate_sde1(p, grid, derive_seed(seed, {"truth"}));
    }

    std::vector<std::size_t> interior(m - 2);
    std::iota(interior.begin(), interior.end(), std::size_t{1});
    Rng rng(derive_seed(seed, {"obs"}));
    std::shuffle(interior.begin(), interior.end(), rng);
    std::vector<std::size_t> idx(interior.begin(), interior.begin() + static_cast<std::ptrdiff_t>(n - 2));
    idx.push_back(0);
    idx.push_back(m - 1);
    std::sort(idx.begin(), idx.end());
    std::vector<double> times;
    for (auto j : idx) times.push_back(grid.time(j));
    const auto data = observe(truth, times, {get<double>(cfg, "sigma_s_sq"), false}, derive_seed(seed, {"noise"}));

    fs::create_directories(out);
    io::write_atomic(out / "truth.csv", io::path_csv(truth));
    io::write_atomic(out / "telemetry.csv", io::telemetry_csv(data));
    io::write_json(out / "params.json", params);
    return 0;
}

// ---------------------------------------------------------------------------
// fit / select-tuning

json fit_defaults() {
    return {{"model", "second_order"},
            {"aid", "OU"},
            {"K", 128},
            {"center", nullptr},
            {"prior", {{"a_s", 1e-3}, {"b_s", 1e-4}, {"a_v", 1e-3}, {"b_v", 1e-4}}},
            {"grid_points", 1000},
            {"interior_knots", 8},
            {"degree", 3},
            {"sigma_alpha_sq", 1.0},
            {"sigma_alpha_sq_grid", nullptr},
            {"sigma_beta_sq", 1e5},
            {"iterations", 10000},
            {"burn_in", nullptr},
            {"proposal_scale", 0.2},
            {"level", 0.95},
            {"save_imputations", true},
            {"seed", 20170501}};
}

struct FitSetup {
    Telemetry data;
    TrajectoryGrid grid;
    ImputationModel model;
    ImputationSet imputations;
    std::size_t iterations = 0;
    double level = 0.95;
    std::vector<std::string> warnings;
};

FitSetup prepare_fit(const Telemetry& data, const json& cfg, std::uint64_t seed) {
    require(data.size() >= 4, "fit needs at least 4 observations");
    FitSetup s;
    s.data = data;
    const auto kind = get<std::string>(cfg, "model");
    require(kind == "second_order" || kind == "first_order", "model must be second_order or first_order");
    require(!cfg.at("center").is_null(), "config must give the attraction center as [x, y]");
    const auto aid = get<std::string>(cfg, "aid");
    require(aid == "OU" || aid == "GP", "aid must be OU or GP");
    const auto K = get<std::size_t>(cfg, "K");
    require(K >= 1, "K must be at least 1");

    s.grid = merge_grid(build_grid(data.times().front(), data.times().back(), get<std::size_t>(cfg, "grid_points")),
                        data.times())
                 .grid;
    auto& m = s.model;
    m.kind = kind == "second_order" ? ModelKind::second_order : ModelKind::first_order;
    m.center = vec2(cfg.at("center"), "center");
    const auto& pr = merge_config(fit_defaults()["prior"], cfg.at("prior"), "prior");
    m.prior = {get<double>(pr, "a_s"), get<double>(pr, "b_s"), get<double>(pr, "a_v"), get<double>(pr, "b_v")};
    m.basis = uniform_basis(s.grid, get<std::size_t>(cfg, "interior_knots"), get<int>(cfg, "degree"),
                            get<double>(cfg, "sigma_alpha_sq"));
    m.sigma_beta_sq = get<double>(cfg, "sigma_beta_sq");
    m.proposal_scale = get<double>(cfg, "proposal_scale");
    if (!cfg.at("burn_in").is_null()) m.burn_in = get<std::size_t>(cfg, "burn_in");
    m.validate();
    s.iterations = get<std::size_t>(cfg, "iterations");
    s.level = get<double>(cfg, "level");

    if (aid == "OU") {
        OuFitOptions opt;
        opt.seed = derive_seed(seed, {"fit"});
        OuAidParams p;
        try {
            p = fit_ou_aid(data, opt);
        } catch (const OuFitError& e) {
            s.warnings.push_back(std::string(e.what()) + "; using best parameters found");
            p = e.best();
        }
        s.imputations = draw_ou_paths(p, data, s.grid, K, derive_seed(seed, {"draw"}));
    } else {
        const auto fit = fit_gp_aid(data);
        s.warnings.insert(s.warnings.end(), fit.warnings.begin(), fit.warnings.end());
        s.imputations = draw_gp_paths(fit.params, data, s.grid, K, derive_seed(seed, {"draw"}));
    }
    return s;
}

json scalar_summary(const std::vector<double>& x, double level) {
    const auto iv = equal_tailed(x, level);
    return {{"median", quantile(x, 0.5)}, {"lower", iv.lower}, {"upper", iv.upper}};
}

std::vector<double> sqrt_all(std::vector<double> v) {
    for (auto& x : v) x = std::sqrt(x);
    return v;
}

int cmd_fit(const fs::path& data_file, const json& cfg, const fs::path& out, std::uint64_t seed, int chains) {
    require(chains >= 1, "--chains must be at least 1");
    const auto data = io::read_telemetry_csv(data_file);
    auto s = prepare_fit(data, cfg, seed);
    const bool second = s.model.kind == ModelKind::second_order;
    fs::create_directories(out);
    if (get<bool>(cfg, "save_imputations")) io::save_imputations(s.imputations, out / "imputations");

    std::vector<ChainOutput> outs;
    for (int c = 0; c < chains; ++c) {
        outs.push_back(run_process_imputation(s.imputations, s.data, s.model, s.iterations,
                                              derive_seed(seed, {"chain", std::to_string(c)})));
        io::save_chain(outs.back(), out, "chain_" + std::to_string(c));
    }

    // pooled samples across chains
    ChainOutput pooled = outs[0];
    for (std::size_t c = 1; c < outs.size(); ++c) {
        const auto& o = outs[c];
        if (second) {
            Eigen::MatrixXd a(pooled.alpha.rows() + o.alpha.rows(), pooled.alpha.cols());
            a << pooled.alpha, o.alpha;
            pooled.alpha = a;
        }
        pooled.beta.insert(pooled.beta.end(), o.beta.begin(), o.beta.end());
        pooled.sigma_v_sq.insert(pooled.sigma_v_sq.end(), o.sigma_v_sq.begin(), o.sigma_v_sq.end());
        pooled.sigma_s_sq.insert(pooled.sigma_s_sq.end(), o.sigma_s_sq.begin(), o.sigma_s_sq.end());
        pooled.deviance.insert(pooled.deviance.end(), o.deviance.begin(), o.deviance.end());
        pooled.selected.insert(pooled.selected.end(), o.selected.begin(), o.selected.end());
    }

    json summary = {{"level", s.level}, {"K", s.imputations.K()}, {"chains", chains}, {"warnings", s.warnings}};
    std::string table = "parameter,median,lower,upper\n";
    auto add = [&](const std::string& name, const std::vector<double>& x) {
        const auto j = scalar_summary(x, s.level);
        summary["posterior"][name] = j;
        table += name + "," + io::fmt(j["median"].get<double>()) + "," + io::fmt(j["lower"].get<double>()) + "," +
                 io::fmt(j["upper"].get<double>()) + "\n";
    };
    add("sigma_s", sqrt_all(pooled.sigma_s_sq));
    add("sigma_s_sq", pooled.sigma_s_sq);
    if (second) {
        add("sigma_v", sqrt_all(pooled.sigma_v_sq));
        add("sigma_v_sq", pooled.sigma_v_sq);
        const auto W = basis_matrix(s.model.basis, s.grid);
        const auto band = band_from_chain(pooled, W, s.grid.times(), s.level);
        const Eigen::VectorXd mean_beta = W * pooled.alpha.colwise().mean().transpose();
        std::string b = "time,lower,mean,upper\n";
        for (std::size_t j = 0; j < band.times.size(); ++j)
            b += io::fmt(band.times[j]) + "," + io::fmt(band.lower[j]) + "," +
                 io::fmt(mean_beta(static_cast<Eigen::Index>(j))) + "," + io::fmt(band.upper[j]) + "\n";
        io::write_atomic(out / "band.csv", b);
        const auto stats = second_order_stats(s.imputations, W, s.model.center);
        const auto d = dic(pooled, stats);
        summary["dic"] = {{"mean_deviance", d.mean_deviance}, {"p_d", d.p_d}, {"dic", d.dic}};
    } else {
        add("beta", pooled.beta);
        const auto stats = first_order_stats(s.imputations, s.model.center);
        const auto d = dic(pooled, stats);
        summary["dic"] = {{"mean_deviance", d.mean_deviance}, {"p_d", d.p_d}, {"dic", d.dic}};
    }
    summary["dic"]["definition"] =
        "D = -2 log L(selected path | theta) averaged over iterations; D(theta-bar) averaged over the K paths";

    if (chains >= 2) {
        std::vector<std::string> names{"sigma_s_sq"};
        if (second) {
            names.push_back("sigma_v_sq");
            for (Eigen::Index i = 0; i < outs[0].alpha.cols(); ++i) names.push_back("alpha[" + std::to_string(i) + "]");
        } else {
            names.push_back("beta");
        }
        json ps = json::object();
        for (const auto& n : names) {
            const auto r = gelman_rubin(outs, n);
            ps[n] = {{"rhat", std::isfinite(r.rhat) ? json(r.rhat) : json("inf")}};
            if (r.warning) ps[n]["warning"] = *r.warning;
        }
        io::write_json(out / "psrf.json", ps);
    }
    io::write_atomic(out / "posterior_summary.csv", table);
    json manifest = cfg;
    manifest["seed"] = seed;
    manifest["data"] = data_file.string();
    manifest["aid_params"] = s.imputations.params;
    summary["config"] = manifest;
    io::write_json(out / "summary.json", summary);
    std::cout << table;
    return 0;
}

int cmd_select_tuning(const fs::path& data_file, const json& cfg, const fs::path& out, std::uint64_t seed) {
    const auto data = io::read_telemetry_csv(data_file);
    auto s = prepare_fit(data, cfg, seed);
    require(s.model.kind == ModelKind::second_order, "select-tuning applies to the second-order model");
    std::vector<double> grid;
    if (cfg.at("sigma_alpha_sq_grid").is_null()) {
        for (int i = -16; i <= 12; ++i) grid.push_back(std::pow(10.0, i / 4.0));
    } else {
        grid = get<std::vector<double>>(cfg, "sigma_alpha_sq_grid");
        require(!grid.empty(), "sigma_alpha_sq_grid must not be empty");
        for (double g : grid) require(g > 0.0, "sigma_alpha_sq values must be positive");
    }
    const auto W = basis_matrix(s.model.basis, s.grid);
    const auto stats = second_order_stats(s.imputations, W, s.model.center);
    fs::create_directories(out);
    std::string table = "sigma_alpha_sq,log10_sigma_alpha_sq,mean_deviance,p_d,dic\n";
    std::size_t best = 0;
    std::vector<double> dics;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        auto model = s.model;
        model.basis.prior_variance = grid[g];
        const auto chain = run_process_imputation(s.imputations, s.data, model, s.iterations,
                                                  derive_seed(seed, {"chain", std::to_string(g)}));
        const auto d = dic(chain, stats);
        dics.push_back(d.dic);
        if (d.dic < dics[best]) best = g;
        table += io::fmt(grid[g]) + "," + io::fmt(std::log10(grid[g])) + "," + io::fmt(d.mean_deviance) + "," +
                 io::fmt(d.p_d) + "," + io::fmt(d.dic) + "\n";
    }
    io::write_atomic(out / "dic_grid.csv", table);
    io::write_json(out / "selection.json", {{"sigma_alpha_sq", grid[best]},
                                            {"log10_sigma_alpha_sq", std::log10(grid[best])},
                                            {"dic", dics[best]},
                                            {"index", best},
                                            {"seed", seed},
                                            {"warnings", s.warnings}});
    std::cout << table << "selected sigma_alpha_sq = " << io::fmt(grid[best]) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Process imputation for continuous-time movement models"};
    app.require_subcommand(1);
    int threads = 0;
    bool print_config = false;
    std::optional<std::uint64_t> seed_flag;
    std::string config_file;
    std::string out_dir;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--threads", threads, "OpenMP threads (default: all cores)")->check(CLI::NonNegativeNumber);
        sub->add_flag("--print-config", print_config, "Print the effective configuration and exit");
    };

    auto* sim = app.add_subcommand("simulate", "Simulate a true path and telemetry");
    std::string model = "sde2";
    sim->add_option("--model", model, "sde2 | sde1")->check(CLI::IsMember({"sde2", "sde1"}));
    sim->add_option("--config", config_file, "JSON config");
    sim->add_option("--out", out_dir, "Output directory");
    sim->add_option("--seed", seed_flag, "Master seed (fallback: MI_SEED, then config)");
    common(sim);

    auto* fit = app.add_subcommand("fit", "Fit AID, impute K paths, run process-imputation MCMC");
    std::string data_file;
    int chains = 1;
    fit->add_option("--data", data_file, "Telemetry CSV (time,x,y)");
    fit->add_option("--config", config_file, "JSON config");
    fit->add_option("--out", out_dir, "Output directory");
    fit->add_option("--chains", chains, "Independent chains (PSRF when >= 2)")->check(CLI::PositiveNumber);
    fit->add_option("--seed", seed_flag, "Master seed (fallback: MI_SEED, then config)");
    common(fit);

    auto* tune = app.add_subcommand("select-tuning", "DIC over the sigma_alpha^2 grid");
    tune->add_option("--data", data_file, "Telemetry CSV (time,x,y)");
    tune->add_option("--config", config_file, "JSON config");
    tune->add_option("--out", out_dir, "Output directory");
    tune->add_option("--seed", seed_flag, "Master seed (fallback: MI_SEED, then config)");
    common(tune);

    auto* study = app.add_subcommand("study", "Run a replicated simulation study");
    int study_id = 0;
    double scale = 1.0;
    std::optional<std::size_t> replicates, stop_after;
    bool resume = false;
    study->add_option("--id", study_id, "Study id (1 or 2)")->check(CLI::IsMember({1, 2}));
    study->add_option("--scale", scale, "Scale factor for replicates, grids and iterations")
        ->check(CLI::PositiveNumber);
    study->add_option("--out", out_dir, "Output directory");
    study->add_option("--config", config_file, "JSON config overriding study defaults");
    study->add_option("--replicates", replicates, "Replicates per regime (not scaled)")->check(CLI::PositiveNumber);
    study->add_option("--seed", seed_flag, "Master seed (fallback: MI_SEED, then config)");
    study->add_flag("--resume", resume, "Continue from the checkpoint in --out");
    study->add_option("--stop-after", stop_after, "Stop after this many newly completed replicates");
    common(study);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    try {
        set_threads(threads);
        auto need = [&](bool ok, const std::string& what) {
            if (!ok) throw UsageError(what);
        };
        if (sim->parsed()) {
            const json cfg = merge_config(simulate_defaults(model), load_config(config_file), "simulate config");
            if (print_config) {
                std::cout << cfg.dump(2) << "\n";
                return 0;
            }
            need(!config_file.empty(), "simulate requires --config");
            need(!out_dir.empty(), "simulate requires --out");
            return cmd_simulate(model, cfg, out_dir, resolve_seed(seed_flag, cfg));
        }
        if (fit->parsed() || tune->parsed()) {
            const json cfg = merge_config(fit_defaults(), load_config(config_file), "fit config");
            if (print_config) {
                std::cout << cfg.dump(2) << "\n";
                return 0;
            }
            const char* name = fit->parsed() ? "fit" : "select-tuning";
            need(!data_file.empty(), std::string(name) + " requires --data");
            need(!config_file.empty(), std::string(name) + " requires --config");
            need(!out_dir.empty(), std::string(name) + " requires --out");
            const auto seed = resolve_seed(seed_flag, cfg);
            return fit->parsed() ? cmd_fit(data_file, cfg, out_dir, seed, chains)
                                 : cmd_select_tuning(data_file, cfg, out_dir, seed);
        }
        if (study->parsed()) {
            need(study_id == 1 || study_id == 2, "study requires --id 1|2");
            json user = load_config(config_file);
            user["study_id"] = study_id;
            if (study->count("--scale")) user["scale"] = scale;
            if (replicates) user["replicates"] = *replicates;
            if (seed_flag) {
                user["master_seed"] = *seed_flag;
            } else if (!user.contains("master_seed")) {
                if (auto e = env_seed()) user["master_seed"] = *e;
            }
            const auto cfg = StudyConfig::from_json(user, study_id);
            if (print_config) {
                std::cout << cfg.to_json().dump(2) << "\n";
                return 0;
            }
            need(!out_dir.empty(), "study requires --out");
            StudyRunOptions opt;
            opt.threads = threads;
            opt.max_units = stop_after;
            const auto rep = resume ? resume_study(cfg, out_dir, opt) : run_study(cfg, out_dir, opt);
            std::cout << json{{"out", rep.out_dir.string()},
                              {"units_total", rep.units_total},
                              {"units_completed", rep.units_completed},
                              {"units_run", rep.units_run},
                              {"failures", rep.failures},
                              {"complete", rep.complete},
                              {"rows", rep.rows}}
                             .dump(2)
                      << "\n";
            return 0;
        }
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kUsage;
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return kValidation;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kNumerical;
    } catch (const json::exception& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return kValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return kUsage;
}
