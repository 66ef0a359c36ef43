// Parallel kernels against their serial references.

#include <benchmark/benchmark.h>
#include <omp.h>

#include "procimp/aid.hpp"
#include "procimp/complete_data.hpp"
#include "procimp/simulate.hpp"

using namespace procimp;

namespace {

struct Fixture {
    TrajectoryGrid grid = build_grid(0.0, 200.0, 2000);
    Telemetry data;
    ImputationSet set;
    Eigen::MatrixXd W;
    OuAidParams ou{0.5, 1.0, 0.01, 1.0};
    GpAidParams gp;

    Fixture() {
        Sde2Params p;
        p.potential = AttractorPotential(Vec2::Zero(), 0.3);
        p.mu0 = Vec2(3.0, -2.0);
        const auto truth = simulate_sde2(p, grid, 11);
        std::vector<double> obs;
        for (std::size_t j = 0; j < grid.size(); j += 20) obs.push_back(grid.time(j));
        ObsParams op;
        op.sigma_s_sq = 0.01;
        data = observe(truth, obs, op, 12);
        set = draw_ou_paths(ou, data, grid, 64, 13);
        W = basis_matrix(uniform_basis(grid, 16, 3, 1.0), grid);
        gp.mean = Vec2::Zero();
        gp.amplitude = 4.0;
        gp.range = 5.0;
        gp.tau_sq = 0.01;
    }
};

const Fixture& fixture() {
    static const Fixture f;
    return f;
}

void BM_second_order_stats(benchmark::State& s) {
    const auto& f = fixture();
    for (auto _ : s) benchmark::DoNotOptimize(second_order_stats(f.set, f.W, Vec2::Zero()));
}
void BM_second_order_stats_serial(benchmark::State& s) {
    const auto& f = fixture();
    for (auto _ : s) benchmark::DoNotOptimize(second_order_stats_serial(f.set, f.W, Vec2::Zero()));
}
void BM_first_order_stats(benchmark::State& s) {
    const auto& f = fixture();
    for (auto _ : s) benchmark::DoNotOptimize(first_order_stats(f.set, Vec2::Zero()));
}
void BM_first_order_stats_serial(benchmark::State& s) {
    const auto& f = fixture();
    for (auto _ : s) benchmark::DoNotOptimize(first_order_stats_serial(f.set, Vec2::Zero()));
}

// range(0) = thread count; 1 is the serial baseline
void BM_ou_draws(benchmark::State& s) {
    const auto& f = fixture();
    omp_set_num_threads(static_cast<int>(s.range(0)));
    for (auto _ : s) benchmark::DoNotOptimize(draw_ou_paths(f.ou, f.data, f.grid, 32, 5));
}
void BM_gp_draws(benchmark::State& s) {
    const auto& f = fixture();
    const auto g = merge_grid(build_grid(0.0, 200.0, 400), f.data.times()).grid;
    omp_set_num_threads(static_cast<int>(s.range(0)));
    for (auto _ : s) benchmark::DoNotOptimize(draw_gp_paths(f.gp, f.data, g, 32, 5));
}

}  // namespace

BENCHMARK(BM_second_order_stats)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_second_order_stats_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_first_order_stats)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_first_order_stats_serial)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_ou_draws)->Arg(1)->Arg(omp_get_max_threads())->Unit(benchmark::kMillisecond);
BENCHMARK(BM_gp_draws)->Arg(1)->Arg(omp_get_max_threads())->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
