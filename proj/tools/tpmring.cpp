// Command-line front end: closed-form step-time predictions, scalability
// sweeps, multi-site simulation runs, self-checks, network benchmarking and
// the user-space relay.

#include <CLI11.hpp>

#include <cmath>
#include <csignal>
#include <fstream>
#include <iostream>
#include <thread>

#include "treepm/config.hpp"
#include "treepm/forces.hpp"
#include "treepm/harness.hpp"
#include "treepm/ic.hpp"
#include "treepm/mesh.hpp"
#include "treepm/model.hpp"
#include "treepm/presets.hpp"
#include "treepm/ring.hpp"
#include "treepm/transport.hpp"

namespace {

using namespace tpm;

std::ostream& open_output(std::ofstream& file, const std::string& path) {
  if (path.empty()) return std::cout;
  file.open(path);
  if (!file) throw std::runtime_error("cannot open output file " + path);
  return file;
}

config::File load_config(const std::string& path,
                         const std::vector<std::string>& overrides) {
  config::File file = config::File::parse_file(path);
  for (const std::string& ov : overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("override must be section.key=value: " + ov);
    file.override(ov.substr(0, eq), ov.substr(eq + 1));
  }
  return file;
}

int cmd_predict(const std::string& config_path,
                const std::vector<std::string>& overrides,
                const std::string& out_path) {
  const auto spec = config::load_runspec(load_config(config_path, overrides));
  std::ofstream file;
  std::ostream& os = open_output(file, out_path);
  os << model::prediction_csv_header() << '\n'
     << model::prediction_csv_row(spec) << '\n';
  const auto breakdown = model::predict_step(spec);
  if (breakdown.theta_warning)
    std::cerr << "note: opening angle outside the fitted range [0.2, 0.75]\n";
  return 0;
}

int cmd_sweep(const std::string& config_path,
              const std::vector<std::string>& overrides,
              const std::string& mode, int max_sites, int fixed_sites,
              const std::string& scaling, double sigma_min, double sigma_max,
              int points, const std::string& out_path) {
  auto spec = config::load_runspec(load_config(config_path, overrides));
  std::ofstream file;
  std::ostream& os = open_output(file, out_path);
  os << model::prediction_csv_header() << '\n';

  if (mode == "sites") {
    const auto site = spec.sites.front();
    const int p_base = spec.p_total;
    for (int s = 1; s <= max_sites; ++s) {
      model::RunSpec row = spec;
      row.sites.assign(s, site);
      row.p_total = scaling == "per-site" ? p_base * s : p_base;
      if (row.p_total % s != 0) continue;  // fixed-total needs divisibility
      os << model::prediction_csv_row(row) << '\n';
    }
    return 0;
  }
  if (mode == "bandwidth") {
    const auto site = spec.sites.front();
    model::RunSpec row = spec;
    row.sites.assign(fixed_sites, site);
    const double ratio = std::pow(sigma_max / sigma_min, 1.0 / (points - 1));
    double sigma = sigma_min;
    for (int i = 0; i < points; ++i, sigma *= ratio) {
      row.net.sigma_wan = sigma;
      os << model::prediction_csv_row(row) << '\n';
    }
    return 0;
  }
  throw std::runtime_error("sweep mode must be 'sites' or 'bandwidth'");
}

int cmd_simulate(const std::string& config_path,
                 const std::vector<std::string>& overrides,
                 const std::string& records_path,
                 const std::string& snapshot_path,
                 const std::string& phases_path, const std::string& slabs_path,
                 bool compare) {
  const auto file = load_config(config_path, overrides);
  auto cfg = config::load_experiment(file);
  const harness::ExperimentResult result =
      cfg.backend == net::Backend::tcp ? harness::run_site_experiment(cfg)
                                       : harness::run_experiment(cfg);
  std::ofstream records_file;
  std::ostream& os = open_output(records_file, records_path);
  os << harness::step_csv_header() << '\n';
  for (const auto& rec : result.records)
    os << harness::step_csv_row(rec) << '\n';
  if (!snapshot_path.empty()) write_snapshot(result.final_state, snapshot_path);
  if (!phases_path.empty()) {
    std::ofstream phases(phases_path);
    phases << ring::stats_csv_header() << '\n';
    for (const auto& rec : result.records)
      for (int p = 0; p < ring::kPhaseCount; ++p) {
        ring::PhaseStats st;
        st.payload_bytes = rec.phase_bytes[p];
        st.seconds = rec.phase_seconds[p];
        phases << ring::stats_csv_row(rec.step, static_cast<ring::Phase>(p), st)
               << '\n';
      }
  }
  if (!slabs_path.empty()) {
    std::ofstream slabs(slabs_path);
    slabs << "step," << slab_csv_header() << '\n';
    for (std::size_t step = 0; step < result.slab_history.size(); ++step)
      for (const auto& slab : result.slab_history[step])
        slabs << step << ',' << slab_csv_row(slab) << '\n';
  }
  if (compare) {
    const auto cmp = harness::compare_with_model(result.records, cfg.spec);
    std::cerr << cmp.report();
  }
  return 0;
}

#define SELF_CHECK(name, expr)                                   \
  do {                                                           \
    const bool ok_ = (expr);                                     \
    std::cout << (ok_ ? "ok   - " : "FAIL - ") << name << '\n';  \
    if (!ok_) failures += 1;                                     \
  } while (0)

int cmd_validate() {
  int failures = 0;

  {  // model reconstruction identity and a published fixture
    model::RunSpec spec;
    spec.n_particles = 16777216.0;
    spec.n_mesh = 2097152.0;
    spec.theta = 0.3;
    spec.p_total = 60;
    spec.sites = {presets::das3_sites()[0]};
    spec.net = presets::das3_network();
    spec.r_samp = 1.0 / 2500.0;
    const auto b = model::predict_step(spec);
    const double sum = b.t_tree + b.t_pm + b.t_l + b.t_b + b.w_l + b.w_b;
    SELF_CHECK("model reconstruction identity",
               std::abs(sum - b.t_exec) <= 1e-12 * b.t_exec);
    SELF_CHECK("model tree-time fixture",
               std::abs(b.t_tree - 11.79) / 11.79 < 0.015);
  }
  {  // memory estimator headline values
    const auto m = model::memory_estimate(8589934592.0, 16777216.0);
    SELF_CHECK("memory estimator", std::abs(m.tree_bytes - 850.4e9) < 1e9);
  }
  SELF_CHECK("exchange plan", ring::plan_step_exchanges(1) == 0 &&
                                  ring::plan_step_exchanges(2) == 13 &&
                                  ring::plan_step_exchanges(4) == 23);
  {  // tree walk against the direct oracle
    const ParticleSet ps = ic::plummer(512, 1.0, 3, 64.0, {32.0, 32.0, 32.0});
    const OcTree tree = OcTree::build(ps, 10);
    ForceParams params;
    params.theta = 0.0;
    params.softening = 0.01;
    const auto res = tree_force(tree, ps, params);
    const auto oracle = direct_force_oracle(ps, 0.01);
    double worst = 0.0;
    for (std::size_t i = 0; i < ps.size(); ++i)
      worst = std::max(worst,
                       norm(res.accel[i] - oracle[i]) / norm(oracle[i]));
    SELF_CHECK("tree walk matches direct summation", worst < 1e-12);
  }
  {  // mesh solver single mode
    const int m = 16;
    Mesh mesh(m, 1.0);
    const double h = mesh.cell_width();
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j)
        for (int k = 0; k < m; ++k)
          mesh.density[mesh.index(i, j, k)] =
              std::cos(2.0 * M_PI * 2.0 * (i + 0.5) * h) * h * h * h;
    pm_solve(mesh);
    const double k2 = std::pow(4.0 * M_PI, 2.0);
    const double expect =
        -4.0 * M_PI / k2 * std::cos(2.0 * M_PI * 2.0 * 0.5 * h);
    SELF_CHECK("mesh Green function",
               std::abs(mesh.potential[mesh.index(0, 3, 3)] - expect) <
                   1e-6 * std::abs(expect));
  }
  {  // simulated transport round trip and timing
    net::ChannelConfig cc;
    cc.backend = net::Backend::simulated;
    cc.latency = 0.27;
    cc.bandwidth = 1e8;
    auto [a, b] = net::make_sim_pair(cc);
    std::vector<uint8_t> payload(123457);
    for (std::size_t i = 0; i < payload.size(); ++i)
      payload[i] = static_cast<uint8_t>(i);
    a->send(payload);
    const auto got = b->recv();
    SELF_CHECK("simulated transport round trip", got == payload);
    SELF_CHECK("simulated delivery timing",
               std::abs(b->clock() - (0.135 + payload.size() / 1e8)) < 1e-12);
  }
  {  // a small two-site run against the single-site trajectory
    auto make_cfg = [](int s) {
      harness::ExperimentConfig cfg;
      cfg.spec.n_particles = 512.0;
      cfg.spec.n_mesh = 4096.0;
      cfg.spec.theta = 0.5;
      cfg.spec.p_total = 4 * s;
      cfg.spec.sites.assign(s, presets::global_grid_site());
      cfg.spec.net = presets::global_grid_network();
      cfg.spec.r_samp = 0.125;
      cfg.steps = 3;
      cfg.lattice_side = 8;
      cfg.mesh_side = 16;
      cfg.jitter = 0.2;
      cfg.seed = 99;
      cfg.force.theta = 0.5;
      cfg.force.softening = 0.02;
      cfg.dt.fixed_dt = 1e-4;
      return cfg;
    };
    const auto one = harness::run_experiment(make_cfg(1));
    const auto two = harness::run_experiment(make_cfg(2));
    double gap = 0.0;
    for (std::size_t i = 0; i < one.final_state.size(); ++i)
      gap = std::max(gap, norm(one.final_state.box.min_image(
                              one.final_state.positions[i],
                              two.final_state.positions[i])));
    SELF_CHECK("two-site trajectory determinism", gap < 1e-10);
    SELF_CHECK("two-site exchange accounting",
               two.records[0].wan_exchanges == ring::plan_step_exchanges(2));
  }

  std::cout << (failures == 0 ? "all checks passed\n"
                              : "some checks failed\n");
  return failures == 0 ? 0 : 1;
}

int cmd_netbench(const std::string& serve, const std::string& connect,
                 bool sim, double sim_latency, double sim_bandwidth,
                 int streams, std::size_t chunk, double pacing,
                 const std::string& sizes_arg, int reps,
                 const std::string& out_path) {
  std::vector<std::size_t> sizes;
  {
    std::istringstream ss(sizes_arg);
    std::string tok;
    while (std::getline(ss, tok, ',')) sizes.push_back(std::stoull(tok));
  }
  net::ChannelConfig cc;
  cc.streams = streams;
  cc.send_chunk = chunk;
  cc.recv_chunk = chunk;
  cc.pacing_rate = pacing;

  if (sim) {
    cc.backend = net::Backend::simulated;
    cc.latency = sim_latency;
    cc.bandwidth = sim_bandwidth;
    auto [a, b] = net::make_sim_pair(cc);
    std::thread echo([&b_ref = *b, n = sizes.size(), reps] {
      net::netbench_echo(b_ref, n, reps);
    });
    const auto result = net::netbench(*a, sizes, reps);
    echo.join();
    std::ofstream file;
    open_output(file, out_path) << net::netbench_csv(result);
    return 0;
  }
  cc.backend = net::Backend::tcp;
  if (!serve.empty()) {
    net::TcpListener listener(static_cast<uint16_t>(std::stoi(serve)));
    std::cerr << "echo peer on port " << listener.port() << "\n";
    auto ch = listener.accept_channel(cc);
    net::netbench_echo(*ch, sizes.size(), reps);
    return 0;
  }
  const auto colon = connect.find(':');
  if (colon == std::string::npos)
    throw std::runtime_error("--connect needs host:port");
  auto ch = net::open_channel(cc, connect.substr(0, colon),
                              static_cast<uint16_t>(
                                  std::stoi(connect.substr(colon + 1))));
  const auto result = net::netbench(*ch, sizes, reps);
  std::ofstream file;
  open_output(file, out_path) << net::netbench_csv(result);
  return 0;
}

volatile std::sig_atomic_t g_stop = 0;

int cmd_relay(int listen_port, const std::string& forward) {
  const auto colon = forward.find(':');
  if (colon == std::string::npos)
    throw std::runtime_error("--forward needs host:port");
  net::Relay relay(static_cast<uint16_t>(listen_port),
                   forward.substr(0, colon),
                   static_cast<uint16_t>(std::stoi(forward.substr(colon + 1))));
  std::cerr << "relaying port " << relay.port() << " -> " << forward << "\n";
  std::signal(SIGINT, [](int) { g_stop = 1; });
  std::signal(SIGTERM, [](int) { g_stop = 1; });
  while (!g_stop)
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
  relay.stop();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"TreePM ring: analytic step-time model and multi-site simulator"};
  app.require_subcommand(1);

  std::string config_path, out_path, records_path, snapshot_path;
  std::vector<std::string> overrides;

  auto* predict = app.add_subcommand("predict", "one-step model breakdown CSV");
  predict->add_option("--config", config_path, "configuration file")->required();
  predict->add_option("--set", overrides, "override section.key=value");
  predict->add_option("-o,--output", out_path, "output CSV (default stdout)");

  auto* sweep = app.add_subcommand("sweep", "site-count or bandwidth sweeps");
  std::string mode = "sites", scaling = "per-site";
  int max_sites = 16, fixed_sites = 8, points = 25;
  double sigma_min = 1e7, sigma_max = 2e9;
  sweep->add_option("--config", config_path)->required();
  sweep->add_option("--set", overrides);
  sweep->add_option("--mode", mode, "sites | bandwidth");
  sweep->add_option("--max-sites", max_sites);
  sweep->add_option("--scaling", scaling, "per-site | total process scaling");
  sweep->add_option("--sites", fixed_sites, "site count for bandwidth mode");
  sweep->add_option("--sigma-min", sigma_min);
  sweep->add_option("--sigma-max", sigma_max);
  sweep->add_option("--points", points);
  sweep->add_option("-o,--output", out_path);

  auto* simulate = app.add_subcommand("simulate", "run a multi-site experiment");
  bool compare = false;
  std::string phases_path, slabs_path;
  simulate->add_option("--config", config_path)->required();
  simulate->add_option("--set", overrides);
  simulate->add_option("--records", records_path, "step-record CSV output");
  simulate->add_option("--snapshot", snapshot_path, "final snapshot path");
  simulate->add_option("--phase-stats", phases_path,
                       "per-phase CSV (step,phase,bytes,seconds)");
  simulate->add_option("--slabs", slabs_path,
                       "decomposition CSV (step,site,lo,hi,count,t_calc)");
  simulate->add_flag("--compare", compare, "print measured-vs-model report");

  auto* validate = app.add_subcommand("validate", "run the built-in self checks");

  auto* netbench = app.add_subcommand("netbench", "latency/throughput probe");
  std::string serve, connect, sizes_arg = "8192,1048576,67108864";
  bool sim = false;
  double sim_latency = 0.27, sim_bandwidth = 1e8, pacing = 0.0;
  int streams = 1, reps = 3;
  std::size_t chunk = 256 * 1024;
  netbench->add_option("--serve", serve, "run the echo peer on this port");
  netbench->add_option("--connect", connect, "host:port of the echo peer");
  netbench->add_flag("--sim", sim, "deterministic in-process link");
  netbench->add_option("--sim-latency", sim_latency);
  netbench->add_option("--sim-bandwidth", sim_bandwidth);
  netbench->add_option("--streams", streams);
  netbench->add_option("--chunk", chunk);
  netbench->add_option("--pacing", pacing, "bytes/s injection cap");
  netbench->add_option("--sizes", sizes_arg, "comma separated transfer sizes");
  netbench->add_option("--reps", reps);
  netbench->add_option("-o,--output", out_path);

  auto* relay = app.add_subcommand("relay", "user-space port forwarder");
  int listen_port = 0;
  std::string forward;
  relay->add_option("--listen", listen_port, "listen port")->required();
  relay->add_option("--forward", forward, "host:port to forward to")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (predict->parsed()) return cmd_predict(config_path, overrides, out_path);
    if (sweep->parsed())
      return cmd_sweep(config_path, overrides, mode, max_sites, fixed_sites,
                       scaling, sigma_min, sigma_max, points, out_path);
    if (simulate->parsed())
      return cmd_simulate(config_path, overrides, records_path, snapshot_path,
                          phases_path, slabs_path, compare);
    if (validate->parsed()) return cmd_validate();
    if (netbench->parsed())
      return cmd_netbench(serve, connect, sim, sim_latency, sim_bandwidth,
                          streams, chunk, pacing, sizes_arg, reps, out_path);
    if (relay->parsed()) return cmd_relay(listen_port, forward);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
