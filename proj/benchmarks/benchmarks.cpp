#include <benchmark/benchmark.h>

#include <random>

#include "treepm/decomposition.hpp"
#include "treepm/forces.hpp"
#include "treepm/harness.hpp"
#include "treepm/ic.hpp"
#include "treepm/mesh.hpp"
#include "treepm/model.hpp"
#include "treepm/octree.hpp"
#include "treepm/presets.hpp"
#include "treepm/transport.hpp"

using namespace tpm;

namespace {

ParticleSet bench_particles(int n_side) {
  return ic::lattice(n_side, 1.0, 0.3, 7);
}

void BM_tree_build(benchmark::State& state) {
  const ParticleSet ps = bench_particles(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    OcTree tree = OcTree::build(ps, 10);
    benchmark::DoNotOptimize(tree.root().mass);
  }
  state.SetItemsProcessed(state.iterations() * ps.size());
}
BENCHMARK(BM_tree_build)->Arg(16)->Arg(24)->Arg(32);

void BM_tree_force(benchmark::State& state) {
  const ParticleSet ps = bench_particles(16);
  const OcTree tree = OcTree::build(ps, 10);
  ForceParams params;
  params.theta = state.range(0) / 10.0;
  params.softening = 0.01;
  for (auto _ : state) {
    auto res = tree_force(tree, ps, params);
    benchmark::DoNotOptimize(res.interaction_count);
  }
  state.SetItemsProcessed(state.iterations() * ps.size());
}
BENCHMARK(BM_tree_force)->Arg(3)->Arg(5);

void BM_pm_solve(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0));
  const ParticleSet ps = bench_particles(16);
  Mesh mesh(m, 1.0);
  pm_assign_density(ps, mesh);
  for (auto _ : state) {
    pm_solve(mesh);
    benchmark::DoNotOptimize(mesh.potential[0]);
  }
}
BENCHMARK(BM_pm_solve)->Arg(32)->Arg(64);

void BM_model_predict(benchmark::State& state) {
  model::RunSpec spec;
  spec.n_particles = 8589934592.0;
  spec.n_mesh = 16777216.0;
  spec.theta = 0.5;
  spec.p_total = 2048;
  spec.sites.assign(8, presets::global_grid_site());
  spec.net = presets::global_grid_network();
  spec.r_samp = 1e-4;
  for (auto _ : state) {
    auto b = model::predict_step(spec);
    benchmark::DoNotOptimize(b.t_exec);
  }
}
BENCHMARK(BM_model_predict);

void BM_let_export(benchmark::State& state) {
  const ParticleSet ps = bench_particles(24);
  const OcTree tree = OcTree::build(ps, 10);
  ForceParams params;
  params.theta = 0.5;
  SiteSlab requester{1, 0.4, 0.6, 0, 0.0};
  for (auto _ : state) {
    auto let = build_local_essential_tree(tree, requester, params, 0.1, 0.02);
    benchmark::DoNotOptimize(let.byte_size());
  }
}
BENCHMARK(BM_let_export);

void BM_sim_step(benchmark::State& state) {
  harness::ExperimentConfig cfg;
  const int s = static_cast<int>(state.range(0));
  cfg.spec.n_particles = 4096.0;
  cfg.spec.n_mesh = 32768.0;
  cfg.spec.theta = 0.5;
  cfg.spec.p_total = 8 * s;
  cfg.spec.sites.assign(s, presets::global_grid_site());
  cfg.spec.net = presets::global_grid_network();
  cfg.spec.r_samp = 1.0 / 16.0;
  cfg.steps = 2;
  cfg.lattice_side = 16;
  cfg.mesh_side = 32;
  cfg.jitter = 0.2;
  cfg.force.theta = 0.5;
  cfg.force.softening = 0.01;
  cfg.dt.fixed_dt = 2e-4;
  for (auto _ : state) {
    auto result = harness::run_experiment(cfg);
    benchmark::DoNotOptimize(result.records.size());
  }
}
BENCHMARK(BM_sim_step)->Arg(1)->Arg(3)->Unit(benchmark::kMillisecond);

void BM_stream_striping(benchmark::State& state) {
  std::vector<uint8_t> payload(16 * 1024 * 1024);
  for (std::size_t i = 0; i < payload.size(); ++i)
    payload[i] = static_cast<uint8_t>(i);
  net::ChannelConfig cc;
  cc.backend = net::Backend::simulated;
  cc.latency = 0.0;
  cc.bandwidth = 1e12;
  auto [a, b] = net::make_sim_pair(cc);
  for (auto _ : state) {
    a->send(payload);
    auto got = b->recv();
    benchmark::DoNotOptimize(got.size());
  }
  state.SetBytesProcessed(state.iterations() * payload.size());
}
BENCHMARK(BM_stream_striping);

}  // namespace

BENCHMARK_MAIN();
