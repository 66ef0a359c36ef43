#pragma once

// File formats: telemetry/path CSVs, imputation sets, atomic writes.

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "procimp/aid.hpp"
#include "procimp/core.hpp"
#include "procimp/impute_mcmc.hpp"

namespace procimp::io {

namespace fs = std::filesystem;

/// Writes to a temporary sibling and renames over `path`.
void write_atomic(const fs::path& path, const std::string& contents);
void write_json(const fs::path& path, const nlohmann::json& j);
nlohmann::json read_json(const fs::path& path);
std::string read_text(const fs::path& path);

/// Shortest round-trip decimal form of a double.
std::string fmt(double x);

/// `time,x,y` with header; strictly increasing times.
Telemetry read_telemetry_csv(const fs::path& path);
std::string telemetry_csv(const Telemetry& data);

/// `time,x,y` or `time,x,y,vx,vy` when velocities are present.
std::string path_csv(const LatentPath& path);
LatentPath read_path_csv(const fs::path& path);

/// One CSV per draw (draw_0000.csv, ...) plus manifest.json.
void save_imputations(const ImputationSet& set, const fs::path& dir);
ImputationSet load_imputations(const fs::path& dir);

/// One row per retained iteration: iteration,selected,[alpha_*|beta],[sigma_v_sq],sigma_s_sq,deviance.
std::string chain_csv(const ChainOutput& chain);
nlohmann::json chain_manifest(const ChainOutput& chain);
/// <stem>.csv + <stem>.json in `dir`.
void save_chain(const ChainOutput& chain, const fs::path& dir, const std::string& stem = "chain");

}  // namespace procimp::io
