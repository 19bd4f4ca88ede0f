#include <benchmark/benchmark.h>

#include <sstream>
#include <string>

#include "gmbt/gherkin.hpp"
#include "gmbt/model.hpp"

namespace {

// A ring of n rooms, one scenario per hop. Every third scenario carries an
// extra precondition and postcondition so extraction has something to skip.
std::string ring_feature(int n) {
    std::ostringstream out;
    out << "Feature: ring walk\n";
    for (int i = 0; i < n; ++i) {
        out << "Scenario: hop " << i << "\n";
        out << "  Given I " << (i == 0 ? "start" : "am") << " on the \"room " << i << "\"\n";
        if (i % 3 == 0) out << "  And the lights are on\n";
        out << "  When I walk through door " << i << "\n";
        out << "  Then I should go to the \"room " << (i + 1) % n << "\"\n";
        if (i % 3 == 0) out << "  And I should hear the door close\n";
    }
    return out.str();
}

void BM_ParseFeature(benchmark::State& state) {
    std::string text = ring_feature(static_cast<int>(state.range(0)));
    for (auto _ : state) {
        gmbt::Feature feature = gmbt::parse_feature(text, "ring.feature");
        benchmark::DoNotOptimize(feature);
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ParseFeature)->Arg(10)->Arg(100)->Arg(1000);

void BM_LintFeature(benchmark::State& state) {
    gmbt::Feature feature =
        gmbt::parse_feature(ring_feature(static_cast<int>(state.range(0))), "ring.feature");
    gmbt::ConventionConfig config;
    for (auto _ : state) {
        auto diagnostics = gmbt::lint_conventions(feature, config);
        benchmark::DoNotOptimize(diagnostics);
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_LintFeature)->Arg(100)->Arg(1000);

void BM_BuildModel(benchmark::State& state) {
    gmbt::Feature feature =
        gmbt::parse_feature(ring_feature(static_cast<int>(state.range(0))), "ring.feature");
    gmbt::ConventionConfig config;
    for (auto _ : state) {
        gmbt::BuildReport report = gmbt::build_model(feature.scenarios, config, feature.name);
        benchmark::DoNotOptimize(report);
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_BuildModel)->Arg(10)->Arg(100)->Arg(1000);

}  // namespace

// The stock benchmark_main library ships as stale LTO bytecode on some
// distributions, so the entry point lives here instead.
BENCHMARK_MAIN();
