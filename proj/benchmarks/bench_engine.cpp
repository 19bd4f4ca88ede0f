#include <benchmark/benchmark.h>

#include <fstream>
#include <sstream>
#include <string>

#include "gmbt/engine.hpp"
#include "gmbt/gherkin.hpp"
#include "gmbt/model.hpp"
#include "gmbt/sim.hpp"

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

gmbt::Model fixture_model(const std::string& name) {
    std::string path = std::string(GMBT_FIXTURE_DIR) + "/features/" + name;
    gmbt::Feature feature = gmbt::parse_feature(slurp(path), path);
    return gmbt::build_model(feature.scenarios, gmbt::ConventionConfig{}, feature.name).model;
}

gmbt::SimSpec fixture_spec(const std::string& name) {
    return gmbt::load_sim_spec(std::string(GMBT_FIXTURE_DIR) + "/sim/" + name);
}

// End-to-end generation against the in-process simulator, so the figures
// exclude process transport and isolate engine plus rule matching.
void BM_GenerateStack(benchmark::State& state) {
    gmbt::Model model = fixture_model("stack.feature");
    gmbt::SimSpec spec = fixture_spec("stack.json");
    gmbt::GenConfig config;
    config.seed = 1;
    config.num_tests = static_cast<int>(state.range(0));
    config.max_length = 10;
    for (auto _ : state) {
        gmbt::Simulator simulator(spec);
        gmbt::RunReport report = gmbt::generate_and_run(model, simulator, config);
        benchmark::DoNotOptimize(report);
    }
    state.SetItemsProcessed(state.iterations() * config.num_tests);
}
BENCHMARK(BM_GenerateStack)->Arg(10)->Arg(100);

void BM_GenerateGrid(benchmark::State& state) {
    gmbt::Model model = fixture_model("grid9.feature");
    gmbt::SimSpec spec = fixture_spec("grid9.json");
    gmbt::GenConfig config;
    config.seed = 1;
    config.num_tests = static_cast<int>(state.range(0));
    config.max_length = 15;
    for (auto _ : state) {
        gmbt::Simulator simulator(spec);
        gmbt::RunReport report = gmbt::generate_and_run(model, simulator, config);
        benchmark::DoNotOptimize(report);
    }
    state.SetItemsProcessed(state.iterations() * config.num_tests);
}
BENCHMARK(BM_GenerateGrid)->Arg(10)->Arg(100);

void BM_Shrink(benchmark::State& state) {
    gmbt::Model model = fixture_model("stack.feature");
    gmbt::SimSpec spec = fixture_spec("stack_fault_depth3.json");
    // A padded counterexample with elidable cycles; the minimum is length 4.
    gmbt::TestCase failing{{1, 4, 1, 4, 1, 2, 5, 2, 3, 6}};
    for (auto _ : state) {
        gmbt::Simulator simulator(spec);
        gmbt::TestCase shrunk = gmbt::shrink(model, simulator, failing, 256);
        benchmark::DoNotOptimize(shrunk);
    }
}
BENCHMARK(BM_Shrink);

void BM_EnumeratePaths(benchmark::State& state) {
    gmbt::Model model = fixture_model("stack.feature");
    for (auto _ : state) {
        auto paths = gmbt::enumerate_paths(model, static_cast<int>(state.range(0)));
        benchmark::DoNotOptimize(paths);
    }
}
BENCHMARK(BM_EnumeratePaths)->Arg(4)->Arg(6)->Arg(8);

}  // namespace
