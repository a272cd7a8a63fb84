#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "treepm/decomposition.hpp"
#include "treepm/forces.hpp"
#include "treepm/integrator.hpp"
#include "treepm/model.hpp"
#include "treepm/particles.hpp"
#include "treepm/ring.hpp"
#include "treepm/transport.hpp"

// Runs full multi-site experiments in-process over the simulated transport
// (one driver thread per site) or, per site, over real sockets, and collects
// per-step structure: phase byte counts, exchange counts and timings that
// can be audited against the analytic model.

namespace tpm::harness {

struct ExperimentConfig {
  model::RunSpec spec;  // sites, network and model parameters
  net::Backend backend = net::Backend::simulated;
  int steps = 10;
  int lattice_side = 16;  // engine particle count = side^3
  int mesh_side = 32;     // engine mesh = side^3
  double box_length = 1.0;
  double jitter = 0.1;    // initial lattice displacement, in lattice spacings
  uint64_t seed = 20260809;
  ForceParams force;
  DtPolicy dt;
  int n_leaf = 10;
  double move_limit = 0.05;  // per-step boundary motion cap, absolute length
  int snapshot_cadence = 0;  // 0 disables periodic snapshots
  std::string snapshot_prefix;
  // tcp backend only: this process's site index, peer hosts and base port.
  int tcp_site = 0;
  std::vector<std::string> tcp_hosts;
  uint16_t tcp_base_port = 0;

  int site_count() const { return spec.site_count(); }
  void validate() const;
};

struct StepRecord {
  int step = 0;
  std::array<double, ring::kPhaseCount> phase_seconds{};
  std::array<uint64_t, ring::kPhaseCount> phase_bytes{};
  uint64_t mesh_grid_bytes = 0;
  uint64_t sample_bytes = 0;
  uint64_t aux_bytes = 0;
  uint32_t wan_exchanges = 0;
  double wan_latency_seconds = 0.0;
  double wan_bandwidth_seconds = 0.0;
  double comm_seconds = 0.0;
  double tree_seconds = 0.0;
  double pm_seconds = 0.0;
  double total_seconds = 0.0;
  uint64_t interaction_count = 0;
  std::vector<double> t_calc;  // per site
  double dt = 0.0;
  bool virtual_clock = true;
};

struct ExperimentResult {
  std::vector<StepRecord> records;
  ParticleSet final_state;  // gathered over sites, sorted by id
  std::vector<SiteSlab> final_slabs;
  // Decomposition state per step (slab_history[step][site]).
  std::vector<std::vector<SiteSlab>> slab_history;
};

// Simulated backend: all sites in-process, records merged across sites.
ExperimentResult run_experiment(const ExperimentConfig& config);

// tcp backend: runs this process's site against its peers; records are the
// local site's view (wall clock).
ExperimentResult run_site_experiment(const ExperimentConfig& config);

struct ModelComparison {
  double measured_w_l = 0.0;
  double model_w_l = 0.0;
  double measured_w_b = 0.0;
  double model_w_b_from_bytes = 0.0;  // measured bytes / sigma_eff
  double measured_mesh_bytes = 0.0;
  double model_mesh_bytes = 0.0;  // 4 s M
  double measured_sample_bytes = 0.0;
  double model_sample_bytes = 0.0;  // 4 N r_samp
  double measured_let_bytes = 0.0;
  double model_let_bytes = 0.0;  // (48/theta + 24) N^(2/3)
  std::string report() const;
};

// Averages the wide-area structure over the records (skipping step 0, which
// carries the initial imbalance) and sets it against the model terms.
ModelComparison compare_with_model(const std::vector<StepRecord>& records,
                                   const model::RunSpec& spec);

struct AveragedRecord {
  StepRecord mean;
  StepRecord stddev;
  int window = 0;
};

// Arithmetic mean and two-pass standard deviation over the last `window`
// records.
AveragedRecord average_window(const std::vector<StepRecord>& records,
                              int window);

std::string step_csv_header();
std::string step_csv_row(const StepRecord& record);

}  // namespace tpm::harness
