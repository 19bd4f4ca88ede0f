#include <benchmark/benchmark.h>

#include <string>

#include "gmbt/export.hpp"
#include "gmbt/model.hpp"

namespace {

gmbt::Model ring_model(int n) {
    gmbt::Model model;
    for (int i = 0; i < n; ++i) {
        model.add_state(gmbt::StateName::from_raw("Room " + std::to_string(i)), i == 0);
    }
    for (int i = 0; i < n; ++i) {
        gmbt::Transition transition;
        transition.id = i + 1;
        transition.origin = "room " + std::to_string(i);
        transition.target = "room " + std::to_string((i + 1) % n);
        transition.actions = {"I walk through door " + std::to_string(i)};
        if (i % 3 == 0) {
            transition.preconditions = {"the lights are on"};
            transition.postconditions = {"I should hear the door close"};
        }
        transition.provenance = {"ring walk",
                                 "hop " + std::to_string(i),
                                 {"ring.feature", 2 + 4 * i}};
        model.add_transition(std::move(transition));
    }
    return model;
}

void BM_ModelToJson(benchmark::State& state) {
    gmbt::Model model = ring_model(static_cast<int>(state.range(0)));
    for (auto _ : state) {
        std::string text = gmbt::model_to_json(model);
        benchmark::DoNotOptimize(text);
    }
}
BENCHMARK(BM_ModelToJson)->Arg(10)->Arg(100)->Arg(1000);

void BM_ModelFromJson(benchmark::State& state) {
    std::string text = gmbt::model_to_json(ring_model(static_cast<int>(state.range(0))));
    for (auto _ : state) {
        gmbt::Model model = gmbt::model_from_json(text);
        benchmark::DoNotOptimize(model);
    }
    state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(text.size()));
}
BENCHMARK(BM_ModelFromJson)->Arg(10)->Arg(100)->Arg(1000);

void BM_ModelToDot(benchmark::State& state) {
    gmbt::Model model = ring_model(static_cast<int>(state.range(0)));
    for (auto _ : state) {
        std::string dot = gmbt::model_to_dot(model);
        benchmark::DoNotOptimize(dot);
    }
}
BENCHMARK(BM_ModelToDot)->Arg(10)->Arg(100)->Arg(1000);

}  // namespace
