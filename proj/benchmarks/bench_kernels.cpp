#include "mq/eigensolve.hpp"
#include "mq/evolve.hpp"
#include "mq/quench.hpp"

#include <benchmark/benchmark.h>

namespace {

using namespace mq;

void BM_ApplyTfic(benchmark::State& state) {
  const int n = int(state.range(0));
  const auto op = build_tfic({n, 1.0});
  const auto psi = StateVector::random(op.basis(), 1);
  StateVector out(op.basis());
  for (auto _ : state) {
    op.apply(psi.amplitudes(), out.amplitudes());
    benchmark::DoNotOptimize(out[0]);
  }
  state.SetItemsProcessed(state.iterations() * std::int64_t(op.dimension()));
}
BENCHMARK(BM_ApplyTfic)->Arg(12)->Arg(16)->Arg(20)->Unit(benchmark::kMillisecond);

void BM_ApplyKondoUnion(benchmark::State& state) {
  const int n = int(state.range(0));
  const auto sector = build_sector_basis(n, {n / 2});
  const auto op = build_kondo_chain({n, 0.5}, post_measurement_sector({}, *sector));
  const auto psi = StateVector::random(op.basis(), 1);
  StateVector out(op.basis());
  for (auto _ : state) {
    op.apply(psi.amplitudes(), out.amplitudes());
    benchmark::DoNotOptimize(out[0]);
  }
  state.SetItemsProcessed(state.iterations() * std::int64_t(op.dimension()));
}
BENCHMARK(BM_ApplyKondoUnion)->Arg(12)->Arg(16)->Arg(20)->Unit(benchmark::kMillisecond);

void BM_KrylovStep(benchmark::State& state) {
  const auto op = build_tfic({int(state.range(0)), 1.0});
  const auto psi = StateVector::random(op.basis(), 2);
  for (auto _ : state) benchmark::DoNotOptimize(krylov_step(op, psi, 0.5));
}
BENCHMARK(BM_KrylovStep)->Arg(10)->Arg(14)->Unit(benchmark::kMillisecond);

void BM_GroundState(benchmark::State& state) {
  const auto op = build_long_range_ising({int(state.range(0)), 1.5, 1.0});
  for (auto _ : state) benchmark::DoNotOptimize(ground_state_with_parity(op));
}
BENCHMARK(BM_GroundState)->Arg(10)->Arg(14)->Unit(benchmark::kMillisecond);

void BM_ReturnSeries(benchmark::State& state) {
  const auto op = build_tfic({int(state.range(0)), 1.0});
  const auto g = ground_state_with_parity(op);
  PropagatorConfig cfg;
  cfg.method = PropagationMethod::quadrature;
  for (auto _ : state) benchmark::DoNotOptimize(quench_return_series(op, g.pair, {}, {20.0, 0.05}, cfg));
}
BENCHMARK(BM_ReturnSeries)->Arg(10)->Arg(14)->Unit(benchmark::kMillisecond);

void BM_FullSpectrum(benchmark::State& state) {
  const auto op = build_tfic({int(state.range(0)), 1.0});
  for (auto _ : state) benchmark::DoNotOptimize(full_spectrum(op));
}
BENCHMARK(BM_FullSpectrum)->Arg(8)->Arg(10)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
