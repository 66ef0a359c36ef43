#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "procimp/io.hpp"

namespace fs = std::filesystem;
using namespace procimp;

namespace {

const fs::path kRoot = fs::path(PROCIMP_TEST_TMP) / "cli";

int run(const std::string& args, const std::string& env = "") {
    const std::string cmd = env + (env.empty() ? "" : " ") + "\"" PROCIMP_CLI "\" " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path fresh(const std::string& name) {
    const auto p = kRoot / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

void put(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

}  // namespace

TEST_CASE("help and usage errors") {
    CHECK(run("--help") == 0);
    CHECK(run("simulate --help") == 0);
    CHECK(run("") == 2);
    CHECK(run("simulate --model sde1 --out " + q(fresh("nocfg"))) == 2);
    CHECK(run("study --id 3 --out " + q(fresh("id3"))) == 2);
    CHECK(run("fit --bogus") == 2);
}

TEST_CASE("simulate sde1: outputs and determinism") {
    const auto dir = fresh("sim1");
    put(dir / "cfg.json", R"({"grid_points": 200, "n_obs": 30, "sigma_s_sq": 0.01})");
    REQUIRE(run("simulate --model sde1 --config " + q(dir / "cfg.json") + " --out " + q(dir / "a") + " --seed 9") == 0);
    CHECK(fs::exists(dir / "a" / "truth.csv"));
    CHECK(fs::exists(dir / "a" / "telemetry.csv"));
    CHECK(fs::exists(dir / "a" / "params.json"));
    std::size_t files = 0;
    for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir / "a")) ++files;
    CHECK(files == 3);
    CHECK(io::read_telemetry_csv(dir / "a" / "telemetry.csv").size() == 30);

    REQUIRE(run("simulate --model sde1 --config " + q(dir / "cfg.json") + " --out " + q(dir / "b") + " --seed 9") == 0);
    CHECK(io::read_text(dir / "a" / "telemetry.csv") == io::read_text(dir / "b" / "telemetry.csv"));
    CHECK(io::read_text(dir / "a" / "truth.csv") == io::read_text(dir / "b" / "truth.csv"));

    REQUIRE(run("simulate --model sde1 --config " + q(dir / "cfg.json") + " --out " + q(dir / "c"), "MI_SEED=9") == 0);
    CHECK(io::read_text(dir / "a" / "telemetry.csv") == io::read_text(dir / "c" / "telemetry.csv"));
    REQUIRE(run("simulate --model sde1 --config " + q(dir / "cfg.json") + " --out " + q(dir / "d") + " --seed 10") == 0);
    CHECK(io::read_text(dir / "a" / "telemetry.csv") != io::read_text(dir / "d" / "telemetry.csv"));

    put(dir / "bad.json", R"({"n_obs": 1})");
    CHECK(run("simulate --model sde1 --config " + q(dir / "bad.json") + " --out " + q(dir / "e")) == 3);
    put(dir / "typo.json", R"({"gridpoints": 100})");
    CHECK(run("simulate --model sde1 --config " + q(dir / "typo.json") + " --out " + q(dir / "f")) == 3);
}

TEST_CASE("fit: input validation") {
    const auto dir = fresh("fitbad");
    put(dir / "cfg.json", R"({"center": [0, 0], "K": 4, "iterations": 200})");
    put(dir / "three.csv", "time,x,y\n0,1,1\n1,2,2\n2,3,3\n");
    CHECK(run("fit --data " + q(dir / "three.csv") + " --config " + q(dir / "cfg.json") + " --out " + q(dir / "o")) == 3);
    put(dir / "order.csv", "time,x,y\n0,1,1\n2,2,2\n1,3,3\n3,4,4\n");
    CHECK(run("fit --data " + q(dir / "order.csv") + " --config " + q(dir / "cfg.json") + " --out " + q(dir / "o")) == 3);
    put(dir / "nocenter.json", R"({"K": 4})");
    put(dir / "ok.csv", "time,x,y\n0,1,1\n1,2,2\n2,3,3\n3,4,4\n");
    CHECK(run("fit --data " + q(dir / "ok.csv") + " --config " + q(dir / "nocenter.json") + " --out " + q(dir / "o")) == 3);
    CHECK(run("fit --config " + q(dir / "cfg.json") + " --out " + q(dir / "o")) == 2);
}

TEST_CASE("fit: second-order run with two chains") {
    const auto dir = fresh("fit2");
    put(dir / "sim.json", R"({"grid_points": 400, "n_obs": 60, "duration": 20})");
    REQUIRE(run("simulate --model sde2 --config " + q(dir / "sim.json") + " --out " + q(dir / "sim") + " --seed 2") == 0);
    put(dir / "fit.json", R"({"center": [0, 0], "K": 8, "iterations": 400, "grid_points": 200})");
    REQUIRE(run("fit --data " + q(dir / "sim" / "telemetry.csv") + " --config " + q(dir / "fit.json") + " --out " +
                q(dir / "out") + " --chains 2 --seed 4") == 0);
    for (const char* f : {"chain_0.csv", "chain_0.json", "chain_1.csv", "band.csv", "posterior_summary.csv",
                          "summary.json", "psrf.json"})
        CHECK(fs::exists(dir / "out" / f));
    CHECK(fs::exists(dir / "out" / "imputations" / "manifest.json"));
    const auto psrf = io::read_json(dir / "out" / "psrf.json");
    CHECK(psrf.contains("sigma_s_sq"));
    const auto summary = io::read_json(dir / "out" / "summary.json");
    CHECK(summary.contains("dic"));
    const auto band = io::read_text(dir / "out" / "band.csv");
    CHECK(band.rfind("time,lower,mean,upper\n", 0) == 0);
}

TEST_CASE("fit: first-order model with the GP AID") {
    const auto dir = fresh("fit1");
    put(dir / "sim.json", R"({"grid_points": 300, "n_obs": 40, "duration": 30})");
    REQUIRE(run("simulate --model sde1 --config " + q(dir / "sim.json") + " --out " + q(dir / "sim") + " --seed 2") == 0);
    put(dir / "fit.json",
        R"({"model": "first_order", "aid": "GP", "center": [0, 0], "K": 4, "iterations": 300, "grid_points": 100,
            "save_imputations": false})");
    REQUIRE(run("fit --data " + q(dir / "sim" / "telemetry.csv") + " --config " + q(dir / "fit.json") + " --out " +
                q(dir / "out")) == 0);
    CHECK_FALSE(fs::exists(dir / "out" / "band.csv"));
    CHECK(io::read_text(dir / "out" / "posterior_summary.csv").find("beta,") != std::string::npos);
}

TEST_CASE("select-tuning: one-value grid and an interior minimum on a smooth-beta dataset") {
    const auto dir = fresh("tune");
    put(dir / "sim.json", R"({"duration": 100, "grid_points": 2000, "n_obs": 400, "sigma_s_sq": 1e-4})");
    REQUIRE(run("simulate --model sde2 --config " + q(dir / "sim.json") + " --out " + q(dir / "sim") + " --seed 3") == 0);
    put(dir / "one.json", R"({"center": [0, 0], "K": 4, "iterations": 300, "grid_points": 300,
                              "sigma_alpha_sq_grid": [0.5], "save_imputations": false})");
    REQUIRE(run("select-tuning --data " + q(dir / "sim" / "telemetry.csv") + " --config " + q(dir / "one.json") +
                " --out " + q(dir / "one")) == 0);
    CHECK(io::read_json(dir / "one" / "selection.json")["sigma_alpha_sq"] == 0.5);

    put(dir / "grid.json", R"({"center": [0, 0], "K": 8, "iterations": 20000, "grid_points": 1000,
                               "interior_knots": 24, "save_imputations": false,
                               "sigma_alpha_sq_grid": [1e-4, 1e-3, 1e-2, 1e-1, 1, 10, 100, 1e3, 1e4]})");
    REQUIRE(run("select-tuning --data " + q(dir / "sim" / "telemetry.csv") + " --config " + q(dir / "grid.json") +
                " --out " + q(dir / "grid") + " --seed 1") == 0);
    const auto idx = io::read_json(dir / "grid" / "selection.json")["index"].get<int>();
    CHECK(idx > 0);
    CHECK(idx < 8);
}

TEST_CASE("select-tuning default grid has 29 values") {
    const auto dir = fresh("tune_default");
    put(dir / "sim.json", R"({"grid_points": 200, "n_obs": 30, "duration": 10})");
    REQUIRE(run("simulate --model sde2 --config " + q(dir / "sim.json") + " --out " + q(dir / "sim") + " --seed 3") == 0);
    put(dir / "cfg.json", R"({"center": [0, 0], "K": 2, "iterations": 20, "grid_points": 60, "save_imputations": false})");
    REQUIRE(run("select-tuning --data " + q(dir / "sim" / "telemetry.csv") + " --config " + q(dir / "cfg.json") +
                " --out " + q(dir / "o")) == 0);
    const auto table = io::read_text(dir / "o" / "dic_grid.csv");
    CHECK(std::count(table.begin(), table.end(), '\n') == 30);
    CHECK(table.find("\n1e-04,") != std::string::npos);
    CHECK(table.find("\n1000,") != std::string::npos);
}

TEST_CASE("study: summary header, stop and resume") {
    const auto dir = fresh("study");
    put(dir / "cfg.json", R"({"regimes": [{"name": "large-sparse", "sigma_s_sq": 0.01, "n_obs": 15}],
                              "K": ["mean", 8]})");
    const std::string base = "study --id 2 --scale 0.02 --replicates 2 --config " + q(dir / "cfg.json") + " --out ";
    REQUIRE(run(base + q(dir / "a") + " --seed 5") == 0);
    std::ifstream in(dir / "a" / "summary.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header ==
          "regime,AID,K,replicate,coverage_beta,detection_beta,covered_sigma_v_sq,covered_sigma_s_sq,"
          "covered_beta_scalar,runtime_s");
    REQUIRE(run(base + q(dir / "b") + " --seed 5 --stop-after 1") == 0);
    CHECK_FALSE(fs::exists(dir / "b" / "summary.csv"));
    REQUIRE(run(base + q(dir / "b") + " --seed 5 --resume") == 0);
    CHECK(io::read_text(dir / "a" / "summary.csv") == io::read_text(dir / "b" / "summary.csv"));
    CHECK(run(base + q(dir / "b") + " --seed 6 --resume") == 3);
    CHECK(run(base + q(dir / "missing") + " --resume") == 3);
}
