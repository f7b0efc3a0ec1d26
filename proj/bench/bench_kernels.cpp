// Serial vs OpenMP kernels: SDP Schur complement and batch rollouts.
#include <benchmark/benchmark.h>

#include <random>

#include "nfl/controller.hpp"
#include "nfl/fixtures.hpp"
#include "nfl/simulate.hpp"
#include "nfl/synthesis.hpp"

using namespace nfl;

namespace {

struct SchurCase {
  SdpProblem problem;
  std::vector<Mat> X, Zinv;
};

const SchurCase& schur_case() {
  static const SchurCase c = [] {
    SchurCase s;
    const BilinearNfl sys = fixtures::four_dim_system();
    s.problem = assemble_lmis(shift_lfr(sys), sys.region.shifted_to(sys.z_star)).to_sdp();
    std::mt19937_64 gen(7);
    std::normal_distribution<double> nd;
    for (const auto& blk : s.problem.blocks) {
      if (blk.diagonal) {
        Vec d(blk.dim), e(blk.dim);
        for (Index i = 0; i < blk.dim; ++i) d(i) = 0.1 + std::abs(nd(gen)), e(i) = 0.1 + std::abs(nd(gen));
        s.X.push_back(d);
        s.Zinv.push_back(e);
      } else {
        Mat g(blk.dim, blk.dim), h(blk.dim, blk.dim);
        for (Index i = 0; i < g.size(); ++i) g.data()[i] = nd(gen), h.data()[i] = nd(gen);
        s.X.push_back(g * g.transpose() + Mat::Identity(blk.dim, blk.dim));
        s.Zinv.push_back(h * h.transpose() + Mat::Identity(blk.dim, blk.dim));
      }
    }
    return s;
  }();
  return c;
}

void BM_SchurSerial(benchmark::State& st) {
  const SchurCase& c = schur_case();
  SdpOperator op(c.problem);
  for (auto _ : st) benchmark::DoNotOptimize(op.schur_serial(c.X, c.Zinv));
  st.counters["vars"] = static_cast<double>(op.num_vars());
}

void BM_SchurParallel(benchmark::State& st) {
  const SchurCase& c = schur_case();
  SdpOperator op(c.problem);
  for (auto _ : st) benchmark::DoNotOptimize(op.schur_parallel(c.X, c.Zinv));
  st.counters["vars"] = static_cast<double>(op.num_vars());
}

struct RolloutCase {
  BilinearNfl sys;
  SynthesisResult res;
  ImplicitController ctrl;
  std::vector<Vec> z0s;
};

const RolloutCase& rollout_case() {
  static const RolloutCase c = [] {
    RolloutCase r;
    for (const auto& p : fixtures::soundness_plants())
      if (p.name == "relu-both-channels") r.sys = p.sys;
    r.res = synthesize(r.sys);
    r.ctrl = ImplicitController::from(shift_lfr(r.sys), r.res);
    r.z0s = sample_ellipsoid(r.res.P, r.sys.z_star, 64, 42);
    return r;
  }();
  return c;
}

void BM_RolloutSerial(benchmark::State& st) {
  const RolloutCase& c = rollout_case();
  for (auto _ : st) benchmark::DoNotOptimize(rollout_batch(c.sys, c.ctrl, c.z0s, 200, c.res.P, false));
}

void BM_RolloutParallel(benchmark::State& st) {
  const RolloutCase& c = rollout_case();
  for (auto _ : st) benchmark::DoNotOptimize(rollout_batch(c.sys, c.ctrl, c.z0s, 200, c.res.P, true));
}

}  // namespace

BENCHMARK(BM_SchurSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SchurParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RolloutSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RolloutParallel)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
