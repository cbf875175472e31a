#include <benchmark/benchmark.h>

#include <Eigen/Core>
#include <random>

#include "drokit/divergence.hpp"
#include "drokit/losses.hpp"
#include "drokit/robust_risk.hpp"

namespace {

// Shared fixture data: lognormal losses so the tail actually matters.
Eigen::VectorXd make_losses(std::ptrdiff_t n) {
  std::mt19937_64 rng(12345);
  std::lognormal_distribution<double> dist(0.0, 1.0);
  Eigen::VectorXd losses(n);
  for (std::ptrdiff_t i = 0; i < n; ++i) losses(i) = dist(rng);
  return losses;
}

void bench_cressie_read(benchmark::State& state) {
  const std::ptrdiff_t n = state.range(0);
  const Eigen::VectorXd losses = make_losses(n);
  const Eigen::VectorXd weights = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  for (auto _ : state) {
    const drokit::worst_case wc = drokit::robust_risk_cr(losses, weights, 2.0, 1.0);
    benchmark::DoNotOptimize(wc.risk);
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(bench_cressie_read)->Arg(1000)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);

void bench_cvar(benchmark::State& state) {
  const std::ptrdiff_t n = state.range(0);
  const Eigen::VectorXd losses = make_losses(n);
  const Eigen::VectorXd weights = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  for (auto _ : state) {
    const drokit::worst_case wc = drokit::cvar(losses, weights, 0.1);
    benchmark::DoNotOptimize(wc.risk);
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(bench_cvar)->Arg(1000)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);

void bench_generic_dual(benchmark::State& state) {
  const std::ptrdiff_t n = state.range(0);
  const Eigen::VectorXd losses = make_losses(n);
  const Eigen::VectorXd weights = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  const auto spec = drokit::divergence_spec::cressie_read(1.5, 0.5);
  for (auto _ : state) {
    const drokit::worst_case wc = drokit::robust_risk_dual_generic(losses, weights, spec);
    benchmark::DoNotOptimize(wc.risk);
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(bench_generic_dual)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

void bench_norm_ball_projection(benchmark::State& state) {
  const std::ptrdiff_t d = state.range(0);
  std::mt19937_64 rng(777);
  std::normal_distribution<double> dist(0.0, 3.0);
  Eigen::VectorXd theta(d);
  for (std::ptrdiff_t j = 0; j < d; ++j) theta(j) = dist(rng);
  const auto ball = drokit::constraint_set::norm_ball(1.0, 1.0, 2.0);
  for (auto _ : state) {
    const Eigen::VectorXd projected = drokit::project(theta, ball);
    benchmark::DoNotOptimize(projected(0));
  }
}
BENCHMARK(bench_norm_ball_projection)->Arg(10)->Arg(100)->Unit(benchmark::kMicrosecond);

}  // namespace

int main(int argc, char** argv) {
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
