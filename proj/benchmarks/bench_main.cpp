#include "jcl/coords.hpp"
#include "jcl/estimates.hpp"
#include "jcl/immersion.hpp"
#include "jcl/solver.hpp"

#include <benchmark/benchmark.h>

#include <complex>

using namespace jcl;

namespace {

ChartManifold flat4() { return ChartManifold(make_flat(4), Box::cube(4, 3.0)); }
ChartManifold perturbed4() { return ChartManifold(make_perturbed_j(4, 0.02), Box::cube(4, 3.0)); }

std::shared_ptr<const GridGeometry> disc(double h) { return std::make_shared<GridGeometry>(Shape::Disc, 0.5, h); }

BoundaryData z2_trace() { return dirichlet(polynomial_trace({0.0, 0.0, 1.0}, 4)); }

HeightFunction z2_heights() {
  return [](double s, double t) {
    std::complex<double> w = std::complex<double>(s, t) * std::complex<double>(s, t);
    Vec v(2);
    v << w.real(), w.imag();
    return v;
  };
}

Vec point4() {
  Vec x(4);
  x << 0.3, -0.2, 0.1, 0.4;
  return x;
}

}  // namespace

static void BM_LocalGeometry(benchmark::State& st) {
  auto m = perturbed4();
  Vec x = point4();
  for (auto _ : st) benchmark::DoNotOptimize(local_geometry(m, x));
}
BENCHMARK(BM_LocalGeometry);

static void BM_ExpMap(benchmark::State& st) {
  auto m = perturbed4();
  Vec p = Vec::Zero(4), X = point4();
  for (auto _ : st) benchmark::DoNotOptimize(exp_map(m, p, X));
}
BENCHMARK(BM_ExpMap);

static void BM_NormalChartInverse(benchmark::State& st) {
  auto m = perturbed4();
  auto chart = normal_chart(m, Vec::Zero(4), 1.0);
  Vec q = chart.forward(0.5 * point4());
  for (auto _ : st) benchmark::DoNotOptimize(chart.inverse(q));
}
BENCHMARK(BM_NormalChartInverse);

static void BM_DistancesFrom(benchmark::State& st) {
  auto m = perturbed4();
  auto u = graph_immersion(disc(1.0 / 32), m, z2_heights());
  Vec p = u.values().col(center_node(u.grid()));
  for (auto _ : st) benchmark::DoNotOptimize(distances_from(m, p, u.values(), 0.6));
  st.SetItemsProcessed(st.iterations() * u.grid().size());
}
BENCHMARK(BM_DistancesFrom)->Unit(benchmark::kMillisecond);

static void BM_SecondFundamental(benchmark::State& st) {
  auto u = graph_immersion(disc(1.0 / st.range(0)), perturbed4(), z2_heights());
  for (auto _ : st) benchmark::DoNotOptimize(second_fundamental(u));
  st.SetItemsProcessed(st.iterations() * u.grid().size());
}
BENCHMARK(BM_SecondFundamental)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

static void BM_SolveFlat(benchmark::State& st) {
  auto m = flat4();
  for (auto _ : st) benchmark::DoNotOptimize(solve(m, disc(1.0 / st.range(0)), z2_trace()));
}
BENCHMARK(BM_SolveFlat)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

static void BM_SolvePerturbed(benchmark::State& st) {
  auto m = perturbed4();
  for (auto _ : st) benchmark::DoNotOptimize(solve(m, disc(1.0 / 32), z2_trace()));
}
BENCHMARK(BM_SolvePerturbed)->Unit(benchmark::kMillisecond);

static void BM_SublevelFamily(benchmark::State& st) {
  auto u = graph_immersion(disc(1.0 / st.range(0)), flat4(), z2_heights());
  Vec f = Vec::Ones(u.grid().size());
  int c = center_node(u.grid());
  for (auto _ : st) benchmark::DoNotOptimize(sublevel_family(u, c, f));
}
BENCHMARK(BM_SublevelFamily)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
