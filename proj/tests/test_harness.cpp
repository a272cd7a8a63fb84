#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <thread>

#include "treepm/config.hpp"
#include "treepm/harness.hpp"
#include "treepm/presets.hpp"
#include "treepm/ring.hpp"

using namespace tpm;
using doctest::Approx;

namespace {

// Desk-scale experiment: 16^3 particles, 32^3 mesh, short fixed steps.
harness::ExperimentConfig desk_config(int s, int steps = 10) {
  harness::ExperimentConfig cfg;
  cfg.spec.n_particles = 4096.0;
  cfg.spec.n_mesh = 32768.0;
  cfg.spec.theta = 0.5;
  cfg.spec.p_total = 8 * s / std::max(1, s % 2 == 0 ? 1 : 1);  // 8s
  cfg.spec.p_total = 8 * s;
  cfg.spec.sites.assign(s, presets::global_grid_site());
  cfg.spec.net = presets::global_grid_network();
  cfg.spec.r_samp = 1.0 / 16.0;
  cfg.steps = steps;
  cfg.lattice_side = 16;
  cfg.mesh_side = 32;
  cfg.jitter = 0.2;
  cfg.seed = 42;
  cfg.force.theta = 0.5;
  cfg.force.softening = 0.01;
  cfg.force.ncrit = 64;
  cfg.dt.fixed_dt = 2e-4;
  cfg.move_limit = 0.02;
  return cfg;
}

double max_position_gap(const ParticleSet& a, const ParticleSet& b) {
  REQUIRE(a.size() == b.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    REQUIRE(a.ids[i] == b.ids[i]);
    const Vec3 d = a.box.min_image(a.positions[i], b.positions[i]);
    worst = std::max(worst, norm(d));
  }
  return worst;
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("single site runs record no wide-area exchanges") {
  const auto result = harness::run_experiment(desk_config(1, 6));
  REQUIRE(result.records.size() == 6);
  for (const auto& rec : result.records) {
    CHECK(rec.wan_exchanges == 0);
    CHECK(rec.wan_latency_seconds == 0.0);
    CHECK(rec.mesh_grid_bytes == 0);
  }
  CHECK(result.final_state.size() == 4096);
}

TEST_CASE("wide-area exchange count per step is 5s+3") {
  for (int s : {2, 3}) {
    const auto result = harness::run_experiment(desk_config(s, 4));
    for (const auto& rec : result.records)
      CHECK(rec.wan_exchanges == ring::plan_step_exchanges(s));
  }
}

TEST_CASE("mesh phase moves one float per cell per site") {
  const auto cfg = desk_config(3, 3);
  const auto result = harness::run_experiment(cfg);
  const uint64_t expect = 4ull * 3ull * 32768ull;
  for (const auto& rec : result.records) CHECK(rec.mesh_grid_bytes == expect);
}

TEST_CASE("sample phase volume tracks the sampling ratio") {
  const auto cfg = desk_config(2, 3);
  const auto result = harness::run_experiment(cfg);
  const double expect = 4.0 * 4096.0 * cfg.spec.r_samp;
  for (const auto& rec : result.records) {
    CHECK(std::abs(static_cast<double>(rec.sample_bytes) - expect) <=
          4.0 * cfg.site_count());
  }
}

TEST_CASE("particle id multiset is conserved every step") {
  auto cfg = desk_config(3, 8);
  cfg.jitter = 0.3;
  const auto result = harness::run_experiment(cfg);
  REQUIRE(result.final_state.size() == 4096);
  for (std::size_t i = 0; i < result.final_state.size(); ++i)
    CHECK(result.final_state.ids[i] == i);  // sorted unique ids 0..N-1
}

TEST_CASE("multi-site run reproduces the single-site trajectory") {
  auto base = desk_config(1, 10);
  const auto one = harness::run_experiment(base);
  for (int s : {2, 3}) {
    auto cfg = desk_config(s, 10);
    const auto multi = harness::run_experiment(cfg);
    const double gap = max_position_gap(one.final_state, multi.final_state);
    CHECK(gap < 1e-10 * base.box_length);
  }
}

TEST_CASE("virtual communication time follows the model identity") {
  const auto cfg = desk_config(3, 6);
  const auto result = harness::run_experiment(cfg);
  const auto cmp = harness::compare_with_model(result.records, cfg.spec);
  CHECK(cmp.measured_w_l ==
        Approx(cfg.spec.net.lambda_wan * ring::plan_step_exchanges(3))
            .epsilon(1e-12));
  CHECK(cmp.measured_w_b == Approx(cmp.model_w_b_from_bytes).epsilon(1e-12));
  CHECK(cmp.measured_mesh_bytes == Approx(cmp.model_mesh_bytes).epsilon(1e-12));
  CHECK(std::abs(cmp.measured_sample_bytes - cmp.model_sample_bytes) <=
        4.0 * cfg.site_count());
  const std::string report = cmp.report();
  CHECK(report.find("w_l,") != std::string::npos);
}

TEST_CASE("local essential tree volume drops with a wider opening angle") {
  // Dense run so aggregation has something to compress.
  harness::ExperimentConfig cfg;
  cfg.spec.n_particles = 32768.0;
  cfg.spec.n_mesh = 4096.0;
  cfg.spec.theta = 0.3;
  cfg.spec.p_total = 16;
  cfg.spec.sites.assign(2, presets::global_grid_site());
  cfg.spec.net = presets::global_grid_network();
  cfg.spec.r_samp = 1.0 / 64.0;
  cfg.steps = 2;
  cfg.lattice_side = 32;
  cfg.mesh_side = 16;
  cfg.jitter = 0.3;
  cfg.seed = 7;
  cfg.force.theta = 0.3;
  cfg.force.softening = 0.01;
  cfg.dt.fixed_dt = 1e-4;

  const auto tight = harness::run_experiment(cfg);
  cfg.spec.theta = 0.5;
  cfg.force.theta = 0.5;
  const auto loose = harness::run_experiment(cfg);
  const auto let_bytes = [](const harness::StepRecord& rec) {
    return rec.phase_bytes[static_cast<int>(ring::Phase::let)];
  };
  CHECK(let_bytes(tight.records.back()) > let_bytes(loose.records.back()));

  // The same drop shows up within one run when the opening angle switches
  // on a step schedule.
  cfg.spec.theta = 0.3;
  cfg.force.theta = 0.3;
  cfg.force.theta_schedule = {{1, 0.5}};
  const auto switched = harness::run_experiment(cfg);
  CHECK(let_bytes(switched.records[0]) > let_bytes(switched.records[1]));
  CHECK(let_bytes(switched.records[0]) == let_bytes(tight.records[0]));
}

TEST_CASE("heterogeneous sites balance their force times") {
  // Two sites with a 2:1 speed ratio; the balancer should equalize the
  // virtual force-calculation times well within twenty steps.
  harness::ExperimentConfig cfg = desk_config(2, 20);
  cfg.spec.sites[0].tau_tree = 5.0e-9;
  cfg.spec.sites[1].tau_tree = 1.0e-8;
  cfg.spec.r_samp = 1.0 / 8.0;
  cfg.move_limit = 0.05;  // L/20
  cfg.jitter = 0.2;
  const auto result = harness::run_experiment(cfg);
  auto imbalance = [](const harness::StepRecord& rec) {
    const double hi = std::max(rec.t_calc[0], rec.t_calc[1]);
    const double lo = std::min(rec.t_calc[0], rec.t_calc[1]);
    return (hi - lo) / hi;
  };
  int first_balanced = -1;
  for (const auto& rec : result.records) {
    REQUIRE(rec.t_calc.size() == 2);
    if (first_balanced < 0 && imbalance(rec) < 0.05) first_balanced = rec.step;
  }
  CHECK(first_balanced >= 0);
  CHECK(first_balanced <= 19);
  // Once reached, the balance holds.
  for (const auto& rec : result.records)
    if (rec.step >= first_balanced + 3) CHECK(imbalance(rec) < 0.05);
}

TEST_CASE("averaging window computes mean and spread") {
  auto cfg = desk_config(2, 6);
  const auto result = harness::run_experiment(cfg);
  const auto avg = harness::average_window(result.records, 4);
  CHECK(avg.window == 4);
  // Two-pass oracle for one field.
  double mean = 0.0;
  for (std::size_t i = 2; i < 6; ++i) mean += result.records[i].tree_seconds;
  mean /= 4.0;
  double var = 0.0;
  for (std::size_t i = 2; i < 6; ++i)
    var += std::pow(result.records[i].tree_seconds - mean, 2.0);
  const double sd = std::sqrt(var / 3.0);
  CHECK(avg.mean.tree_seconds == Approx(mean).epsilon(1e-12));
  CHECK(avg.stddev.tree_seconds == Approx(sd).epsilon(1e-12));

  // Identical records average to themselves with (numerically) zero spread.
  std::vector<harness::StepRecord> same(5, result.records[3]);
  const auto flat = harness::average_window(same, 5);
  CHECK(flat.mean.tree_seconds == Approx(result.records[3].tree_seconds));
  CHECK(flat.stddev.tree_seconds <= 1e-12 * flat.mean.tree_seconds);

  CHECK_THROWS(harness::average_window(result.records, 99));
}

TEST_CASE("adaptive shared step stays deterministic across site counts") {
  auto make = [](int s) {
    auto cfg = desk_config(s, 6);
    cfg.dt.adaptive = true;
    cfg.dt.eta = 0.1;
    cfg.dt.dt_max = 5e-4;
    cfg.dt.softening = cfg.force.softening;
    return cfg;
  };
  const auto one = harness::run_experiment(make(1));
  const auto two = harness::run_experiment(make(2));
  // Step 0 falls back to dt_max, later steps follow the gathered minimum.
  CHECK(one.records[0].dt == 5e-4);
  CHECK(one.records.back().dt <= 5e-4);
  for (std::size_t k = 0; k < one.records.size(); ++k)
    CHECK(two.records[k].dt == Approx(one.records[k].dt).epsilon(1e-9));
  CHECK(max_position_gap(one.final_state, two.final_state) < 1e-10);
}

TEST_CASE("periodic snapshots are written and readable") {
  auto cfg = desk_config(2, 4);
  cfg.snapshot_cadence = 2;
  cfg.snapshot_prefix = "/tmp/tpm_cadence_test";
  const auto result = harness::run_experiment(cfg);
  for (int step : {2, 4}) {
    const ParticleSet snap = read_snapshot(
        "/tmp/tpm_cadence_test_step" + std::to_string(step) + ".snbk");
    CHECK(snap.size() == 4096);
    CHECK(snap.time == Approx(step * cfg.dt.fixed_dt));
  }
  CHECK(result.final_state.size() == 4096);
}

TEST_CASE("step csv schema") {
  auto cfg = desk_config(2, 2);
  const auto result = harness::run_experiment(cfg);
  const std::string header = harness::step_csv_header();
  CHECK(header.rfind("step,", 0) == 0);
  const std::string row = harness::step_csv_row(result.records[0]);
  int commas = 0;
  for (char c : row) commas += c == ',';
  int header_commas = 0;
  for (char c : header) header_commas += c == ',';
  CHECK(commas == header_commas);
  CHECK(row.find("virtual") != std::string::npos);
}

TEST_CASE("tcp backend runs a two-site experiment over loopback") {
  // Two site processes are emulated by two threads, each driving its own
  // site over real sockets.
  auto make = [](int site) {
    auto cfg = desk_config(2, 3);
    cfg.backend = net::Backend::tcp;
    cfg.tcp_site = site;
    cfg.tcp_hosts = {"127.0.0.1", "127.0.0.1"};
    cfg.tcp_base_port = 29870;
    return cfg;
  };
  harness::ExperimentResult r0, r1;
  std::thread site0([&] { r0 = harness::run_site_experiment(make(0)); });
  std::thread site1([&] { r1 = harness::run_site_experiment(make(1)); });
  site0.join();
  site1.join();
  CHECK(r0.records.size() == 3);
  CHECK(r0.final_state.size() + r1.final_state.size() == 4096);
  for (const auto& rec : r0.records) {
    CHECK_FALSE(rec.virtual_clock);
    CHECK(rec.wan_exchanges == ring::plan_step_exchanges(2));
  }
  // The wall-clock tcp run agrees with the simulated run bit-for-bit on ids.
  const auto sim = harness::run_experiment(desk_config(2, 3));
  ParticleSet merged = r0.final_state;
  merged.append(r1.final_state);
  CHECK(merged.size() == sim.final_state.size());
}

TEST_CASE("config file round trip") {
  const std::string text = R"(
# sample configuration
[network]
preset = das3

[run]
roster = das3:2
n = 16777216
m = 2097152
theta = 0.3
p = 60
r_samp_inverse = 2500

[experiment]
steps = 4
lattice_side = 8
mesh_side = 16
softening = 0.02
dt = 1e-3
backend = simulated
)";
  const auto file = config::File::parse_string(text);
  const auto spec = config::load_runspec(file);
  CHECK(spec.site_count() == 2);
  CHECK(spec.net.star_topology);
  CHECK(spec.r_samp == Approx(1.0 / 2500.0));
  CHECK(spec.sites[0].name == "VU");
  const auto cfg = config::load_experiment(file);
  CHECK(cfg.steps == 4);
  CHECK(cfg.lattice_side == 8);
  CHECK(cfg.force.softening == Approx(0.02));
  CHECK(cfg.dt.fixed_dt == Approx(1e-3));

  auto overridden = file;
  overridden.override("run.theta", "0.5");
  CHECK(config::load_runspec(overridden).theta == Approx(0.5));

  CHECK_THROWS(config::File::parse_string("[run\nn=1"));
  CHECK_THROWS(config::File::parse_string("key_without_section = 1"));
}

}  // TEST_SUITE
