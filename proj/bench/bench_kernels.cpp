// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The nsteer Authors

// Serial reference vs OpenMP kernels: batch gradients and per-node evaluation.

#include <benchmark/benchmark.h>

#include <numeric>

#include "nsteer/data.hpp"
#include "nsteer/eval.hpp"
#include "nsteer/train.hpp"

namespace {

using namespace nsteer;

struct Fixture {
  GridMeasurementSet set;
  Split split;
  NeuralSteerer model;
  BatchSpec batch;
  OffgridSample offgrid;

  explicit Fixture(FreqMode mode) {
    set = generate_synthetic(SyntheticSceneConfig{}, 24, 9, FrequencyAxis(16000.0, 65));
    split = make_split(set, SplitSpec{});
    SteererConfig sc;
    sc.freq_mode = mode;
    model = NeuralSteerer(sc, set.geometry, set.axis);
    batch = BatchIterator(split.train, 18, mode == FreqMode::Continuous ? 16 : 0, set.num_bins(), 0).epoch(0)[0];
    offgrid = sample_offgrid(model, 18, 0, 0, 0);
  }
};

const Fixture& fixture(FreqMode mode) {
  static const Fixture df(FreqMode::Discrete);
  static const Fixture cf(FreqMode::Continuous);
  return mode == FreqMode::Discrete ? df : cf;
}

void BM_BatchGradient(benchmark::State& state) {
  const auto& f = fixture(state.range(0) ? FreqMode::Continuous : FreqMode::Discrete);
  const Execution exec = state.range(1) ? Execution::Parallel : Execution::Serial;
  for (auto _ : state) {
    benchmark::DoNotOptimize(batch_gradient(f.model, f.set, f.batch, f.offgrid, LossWeights{}, exec));
  }
}
BENCHMARK(BM_BatchGradient)
    ->ArgNames({"cf", "parallel"})
    ->Args({0, 0})
    ->Args({0, 1})
    ->Args({1, 0})
    ->Args({1, 1})
    ->Unit(benchmark::kMillisecond);

void BM_EvaluateNodes(benchmark::State& state) {
  const auto& f = fixture(FreqMode::Discrete);
  const Execution exec = state.range(0) ? Execution::Parallel : Execution::Serial;
  const Estimator est = model_estimator(f.model);
  for (auto _ : state) {
    benchmark::DoNotOptimize(evaluate_nodes(est, f.set, f.split.test, "held_out", exec));
  }
}
BENCHMARK(BM_EvaluateNodes)->ArgNames({"parallel"})->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
