// Serial reference kernels against their OpenMP variants.

#include <random>

#include <benchmark/benchmark.h>

#include "mvfbm/experiments.hpp"
#include "mvfbm/fbm.hpp"
#include "mvfbm/kernels.hpp"
#include "mvfbm/scheme.hpp"

using namespace mvfbm;

namespace {

const model::Problem& cubic() {
  static const model::Problem p = model::find_problem("cubic-mf").problem;
  return p;
}

Ensemble random_ensemble(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-2, 2);
  Ensemble e(n, 1);
  for (auto& x : e.data()) x = u(rng);
  return e;
}

Exec exec_of(const benchmark::State& state) {
  return state.range(1) == 0 ? Exec::serial : Exec::parallel;
}

void BM_PicardMap(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto x = random_ensemble(n, 1), lag = random_ensemble(n, 2), offset = random_ensemble(n, 3);
  const measure::MeasureHandle mu(x.data(), n, 1, cubic().q);
  const kernels::SweepArgs args{cubic(), mu, 1.0 / 64, 1.0 / 64, 0.5, true};
  Ensemble out(n, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(kernels::picard_map(exec_of(state), args, offset, lag, x, out));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}

void BM_DriftField(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto x = random_ensemble(n, 1), y = random_ensemble(n, 2);
  const measure::MeasureHandle mu(x.data(), n, 1, cubic().q);
  const kernels::DriftArgs args{cubic(), mu, 1.0 / 64, 0.5, true};
  Ensemble out(n, 1);
  for (auto _ : state) {
    kernels::drift_field(exec_of(state), args, x, y, out);
    benchmark::DoNotOptimize(out.data().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}

void BM_FbmBatch(benchmark::State& state) {
  const fbm::TimeGrid grid(1.0 / 512, 1024);
  const auto n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(fbm::sample_fbm_fast(grid, fbm::HurstParam(0.75), 1, n, exec_of(state)));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}

void BM_Simulate(benchmark::State& state) {
  scheme::SchemeConfig cfg;
  cfg.m = 64;
  cfg.n_particles = static_cast<std::size_t>(state.range(0));
  cfg.exec = exec_of(state);
  for (auto _ : state) benchmark::DoNotOptimize(scheme::simulate(cubic(), cfg));
}

void BM_StrongRate(benchmark::State& state) {
  experiments::ExperimentConfig c;
  c.scheme.n_particles = 16;
  c.m_ladder = {4, 8, 16};
  c.m_ref = 64;
  c.n_mc = static_cast<std::size_t>(state.range(0));
  c.scheme.exec = exec_of(state);
  for (auto _ : state) benchmark::DoNotOptimize(experiments::strong_rate_vs_dt(cubic(), c));
}

}  // namespace

BENCHMARK(BM_PicardMap)->ArgsProduct({{1024, 65536}, {0, 1}});
BENCHMARK(BM_DriftField)->ArgsProduct({{1024, 65536}, {0, 1}});
BENCHMARK(BM_FbmBatch)->ArgsProduct({{64}, {0, 1}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Simulate)->ArgsProduct({{256}, {0, 1}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_StrongRate)->ArgsProduct({{16}, {0, 1}})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
