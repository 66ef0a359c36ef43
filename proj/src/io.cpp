#include "procimp/io.hpp"

#include <atomic>
#include <charconv>
#include <fstream>
#include <sstream>
#include <thread>

#include "procimp/error.hpp"

namespace procimp::io {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_double(const std::string& s, const fs::path& file, std::size_t line) {
    double v = 0.0;
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || ptr != end)
        throw ValidationError(file.string() + ":" + std::to_string(line) + ": not a number: '" + s + "'");
    return v;
}

// Rows of a numeric CSV whose header must start with `expected` columns.
std::vector<std::vector<double>> read_numeric_csv(const fs::path& path, const std::vector<std::string>& expected,
                                                  std::vector<std::string>* header_out) {
    std::ifstream in(path);
    require(in.good(), "cannot open " + path.string());
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), path.string() + ": empty file");
    const auto header = split(line);
    require(header.size() >= expected.size(), path.string() + ": missing header columns");
    for (std::size_t c = 0; c < expected.size(); ++c)
        require(header[c] == expected[c], path.string() + ": expected column '" + expected[c] + "'");
    if (header_out) *header_out = header;
    std::vector<std::vector<double>> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto cells = split(line);
        require(cells.size() == header.size(),
                path.string() + ":" + std::to_string(lineno) + ": wrong number of columns");
        std::vector<double> row;
        row.reserve(cells.size());
        for (const auto& c : cells) row.push_back(parse_double(c, path, lineno));
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace

void write_atomic(const fs::path& path, const std::string& contents) {
    static std::atomic<unsigned> counter{0};
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const auto tid = std::hash<std::thread::id>{}(std::this_thread::get_id());
    fs::path tmp = path;
    tmp += ".tmp." + std::to_string(tid % 100000) + "." + std::to_string(counter++);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << contents;
        out.flush();
        if (!out) throw std::runtime_error("write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_atomic(path, j.dump(2) + "\n"); }

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

nlohmann::json read_json(const fs::path& path) {
    try {
        return nlohmann::json::parse(read_text(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(path.string() + ": invalid JSON: " + e.what());
    }
}

std::string fmt(double x) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, ptr);
}

Telemetry read_telemetry_csv(const fs::path& path) {
    const auto rows = read_numeric_csv(path, {"time", "x", "y"}, nullptr);
    std::vector<double> t;
    Positions s(static_cast<Eigen::Index>(rows.size()), 2);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        require(rows[i].size() == 3, path.string() + ": telemetry must have exactly columns time,x,y");
        t.push_back(rows[i][0]);
        s(static_cast<Eigen::Index>(i), 0) = rows[i][1];
        s(static_cast<Eigen::Index>(i), 1) = rows[i][2];
    }
    return Telemetry(std::move(t), std::move(s));
}

std::string telemetry_csv(const Telemetry& data) {
    std::string out = "time,x,y\n";
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        out += fmt(data.times()[i]) + "," + fmt(data.locations()(r, 0)) + "," + fmt(data.locations()(r, 1)) + "\n";
    }
    return out;
}

std::string path_csv(const LatentPath& path) {
    const bool vel = path.velocities().has_value();
    std::string out = vel ? "time,x,y,vx,vy\n" : "time,x,y\n";
    for (std::size_t j = 0; j < path.size(); ++j) {
        const auto r = static_cast<Eigen::Index>(j);
        out += fmt(path.grid().time(j)) + "," + fmt(path.positions()(r, 0)) + "," + fmt(path.positions()(r, 1));
        if (vel) out += "," + fmt((*path.velocities())(r, 0)) + "," + fmt((*path.velocities())(r, 1));
        out += "\n";
    }
    return out;
}

LatentPath read_path_csv(const fs::path& path) {
    std::vector<std::string> header;
    const auto rows = read_numeric_csv(path, {"time", "x", "y"}, &header);
    const bool vel = header.size() == 5 && header[3] == "vx" && header[4] == "vy";
    require(header.size() == 3 || vel, path.string() + ": expected time,x,y[,vx,vy]");
    std::vector<double> t;
    Positions mu(static_cast<Eigen::Index>(rows.size()), 2), v(static_cast<Eigen::Index>(rows.size()), 2);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        t.push_back(rows[i][0]);
        mu(r, 0) = rows[i][1];
        mu(r, 1) = rows[i][2];
        if (vel) {
            v(r, 0) = rows[i][3];
            v(r, 1) = rows[i][4];
        }
    }
    TrajectoryGrid grid(std::move(t));
    if (vel) return LatentPath(std::move(grid), std::move(mu), std::move(v));
    return LatentPath(std::move(grid), std::move(mu));
}

void save_imputations(const ImputationSet& set, const fs::path& dir) {
    fs::create_directories(dir);
    char name[32];
    for (std::size_t k = 0; k < set.K(); ++k) {
        std::snprintf(name, sizeof name, "draw_%04zu.csv", k);
        write_atomic(dir / name, path_csv(set.path(k)));
    }
    write_atomic(dir / "mean.csv", path_csv(set.mean_path()));
    nlohmann::json manifest = {{"aid", set.aid}, {"params", set.params}, {"seed", set.seed}, {"K", set.K()}};
    write_json(dir / "manifest.json", manifest);
}

ImputationSet load_imputations(const fs::path& dir) {
    const auto manifest = read_json(dir / "manifest.json");
    ImputationSet set;
    try {
        set.aid = manifest.at("aid").get<std::string>();
        set.params = manifest.at("params");
        set.seed = manifest.at("seed").get<std::uint64_t>();
        const auto K = manifest.at("K").get<std::size_t>();
        require(K >= 1, "imputation manifest must list at least one draw");
        char name[32];
        for (std::size_t k = 0; k < K; ++k) {
            std::snprintf(name, sizeof name, "draw_%04zu.csv", k);
            auto p = read_path_csv(dir / name);
            if (k == 0) set.grid = p.grid();
            require(p.grid() == set.grid, "imputation draws must share one grid");
            set.draws.push_back(p.positions());
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError((dir / "manifest.json").string() + ": " + e.what());
    }
    set.mean = read_path_csv(dir / "mean.csv").positions();
    return set;
}

std::string chain_csv(const ChainOutput& chain) {
    const bool second = chain.model == "second_order";
    const auto p = chain.alpha.cols();
    std::string out = "iteration,selected";
    if (second) {
        for (Eigen::Index i = 0; i < p; ++i) out += ",alpha_" + std::to_string(i);
        out += ",sigma_v_sq";
    } else {
        out += ",beta";
    }
    out += ",sigma_s_sq,deviance\n";
    for (std::size_t r = 0; r < chain.retained(); ++r) {
        out += std::to_string(chain.burn_in + r) + "," + std::to_string(chain.selected[r]);
        if (second) {
            for (Eigen::Index i = 0; i < p; ++i) out += "," + fmt(chain.alpha(static_cast<Eigen::Index>(r), i));
            out += "," + fmt(chain.sigma_v_sq[r]);
        } else {
            out += "," + fmt(chain.beta[r]);
        }
        out += "," + fmt(chain.sigma_s_sq[r]) + "," + fmt(chain.deviance[r]) + "\n";
    }
    return out;
}

nlohmann::json chain_manifest(const ChainOutput& chain) {
    nlohmann::json j = {{"method", chain.method},       {"model", chain.model},
                        {"iterations", chain.iterations}, {"burn_in", chain.burn_in},
                        {"retained", chain.retained()},   {"acceptance", chain.acceptance},
                        {"metadata", chain.metadata}};
    return j;
}

void save_chain(const ChainOutput& chain, const fs::path& dir, const std::string& stem) {
    fs::create_directories(dir);
    write_atomic(dir / (stem + ".csv"), chain_csv(chain));
    write_json(dir / (stem + ".json"), chain_manifest(chain));
}

}  // namespace procimp::io
