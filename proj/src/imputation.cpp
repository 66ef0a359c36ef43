#include "procimp/aid.hpp"

namespace procimp {

ImputationSet ImputationSet::prefix(std::size_t k) const {
    require(k >= 1 && k <= draws.size(), "prefix length out of range");
    ImputationSet out;
    out.grid = grid;
    out.draws.assign(draws.begin(), draws.begin() + static_cast<std::ptrdiff_t>(k));
    out.mean = mean;
    out.aid = aid;
    out.params = params;
    out.seed = seed;
    return out;
}

ImputationSet single_path_set(const LatentPath& path, std::string label) {
    ImputationSet out;
    out.grid = path.grid();
    out.draws = {path.positions()};
    out.mean = path.positions();
    out.aid = std::move(label);
    out.params = nlohmann::json::object();
    return out;
}

}  // namespace procimp
