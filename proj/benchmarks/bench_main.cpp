#include "tfb/balance_metrics.hpp"
#include "tfb/effect_estimators.hpp"
#include "tfb/kernels.hpp"
#include "tfb/lasso.hpp"
#include "tfb/simulation.hpp"
#include "tfb/tfb_solver.hpp"

#include <benchmark/benchmark.h>

using namespace tfb;

namespace {

void BM_GramMatrix(benchmark::State& state) {
  const DgpDraw draw = draw_dgp1(state.range(0), 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(gram_matrix(draw.data.covariates, draw.data.n_control, KernelSpec{2.0}));
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_GramMatrix)->Arg(250)->Arg(500)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_SolveOls(benchmark::State& state) {
  const DgpDraw draw = draw_dgp2(state.range(0), 2);
  TfbConfig config;
  const OutcomeFits fits = fit_group_models(draw.data, config.model, config.estimand);
  const BalanceModels models = balance_models(fits, draw.data.covariates);
  const TfbProblem problem = make_tfb_problem(models, draw.data.n_control, config.q, config.estimand);
  for (auto _ : state) benchmark::DoNotOptimize(solve(problem));
}
BENCHMARK(BM_SolveOls)->Arg(500)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_SolveKernel(benchmark::State& state) {
  const DgpDraw draw = draw_dgp1(state.range(0), 3);
  TfbConfig config;
  config.model.backend = ModelBackend::KRLS;
  config.model.bandwidth = 2.0;
  const OutcomeFits fits = fit_group_models(draw.data, config.model, config.estimand);
  const BalanceModels models = balance_models(fits, draw.data.covariates);
  const TfbProblem problem = make_tfb_problem(models, draw.data.n_control, config.q, config.estimand);
  for (auto _ : state) benchmark::DoNotOptimize(solve(problem));
}
BENCHMARK(BM_SolveKernel)->Arg(250)->Arg(500)->Unit(benchmark::kMillisecond);

void BM_LassoPath(benchmark::State& state) {
  const DgpDraw draw = draw_dgp2(1000, 4);
  const Dataset expanded = expand_features(draw.data);
  const Matrix X = expanded.control_covariates();
  const Vector y = expanded.control_outcomes();
  for (auto _ : state) benchmark::DoNotOptimize(lasso_cv_lambda(X, y, {}, 5, 7));
}
BENCHMARK(BM_LassoPath)->Unit(benchmark::kMillisecond)->Iterations(3);

}  // namespace
BENCHMARK_MAIN();
