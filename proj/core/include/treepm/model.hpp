#pragma once

#include <cstdint>
#include <string>
#include <vector>

// Analytic step-time model for TreePM runs striped across compute sites.
// All formulas are closed-form in the run parameters plus a small set of
// per-machine and per-network constants; everything here is pure and
// thread-safe.

namespace tpm::model {

// Per-machine calibration constants, obtainable from a short single-process
// test run on each site.
struct MachineConstants {
  double tau_tree = 0.0;  // seconds per tree interaction
  double tau_fft = 0.0;   // seconds per FFT operation
  double tau_mesh = 0.0;  // seconds per particle for mesh operations
  std::string name;
};

struct NetworkConstants {
  double lambda_lan = 0.0;  // local round-trip time [s]
  double lambda_wan = 0.0;  // wide-area round-trip time [s]
  double sigma_lan = 0.0;   // local bandwidth [bytes/s]
  double sigma_wan = 0.0;   // wide-area bandwidth [bytes/s]
  // Star-shaped wide-area wiring: the effective inter-site bandwidth is
  // sigma_wan / (s-1) when s >= 2.
  bool star_topology = false;
};

// Problem description shared by the model and the simulator.
struct RunSpec {
  double n_particles = 0.0;  // N
  double n_mesh = 0.0;       // M (total cells)
  double theta = 0.5;        // tree opening angle
  int p_total = 1;           // total process count across all sites
  std::vector<MachineConstants> sites;  // ordered roster, size s
  NetworkConstants net;
  double r_samp = 1e-4;         // sampled-particle ratio (a fraction, <= 1)
  double migration_bytes = 0.0  /* measured per-step migration volume */;

  int site_count() const { return static_cast<int>(sites.size()); }
  // Throws std::invalid_argument on hard violations (non-positive constants,
  // p_total not divisible by the site count, empty roster).
  void validate() const;
};

struct PredictionBreakdown {
  double t_tree = 0.0;
  double t_pm = 0.0;
  double t_l = 0.0;
  double t_b = 0.0;
  double w_l = 0.0;
  double w_b = 0.0;
  double t_exec = 0.0;  // always the exact sum of the six terms above
  double n_int = 0.0;
  bool theta_warning = false;  // opening angle outside the fitted range
};

// Interaction-count fit for cosmological snapshots. Valid (fitted) range is
// 0.2 <= theta <= 0.75; outside it the count is still returned but callers
// should treat it as extrapolation (see theta_in_fit_range).
double n_interactions(double n_particles, double n_mesh, double theta);
bool theta_in_fit_range(double theta);

// Per-step tree integration time. Uses the arithmetic mean of tau_tree over
// the roster; the 1.2 factor covers list construction and tree build
// overhead.
double tree_time(const RunSpec& spec);

// Serial FFT plus per-particle mesh operations. The FFT runs at one location,
// so tau_fft/tau_mesh are taken from the first site in the roster.
double pm_time(const RunSpec& spec);

struct LocalCommTime {
  double t_l = 0.0;  // latency-bound
  double t_b = 0.0;  // bandwidth-bound
};
// Intra-site communication. The latency term counts 18 collectives of
// log2(q) steps plus two all-to-alls of q steps, with q the per-site process
// count (q = p for a single site, p/s otherwise).
LocalCommTime local_comm_time(const RunSpec& spec);

struct WanCommTime {
  double w_l = 0.0;
  double w_b = 0.0;
};
// Inter-site communication: five ring gathers (s-1 exchanges each) plus four
// blocking exchanges with each of the two ring neighbours, 5s+3 exchanges in
// total. Returns {0, 0} for a single site.
WanCommTime wan_comm_time(const RunSpec& spec);

// Effective wide-area bandwidth after the star-topology correction.
double effective_sigma_wan(const NetworkConstants& net, int site_count);

PredictionBreakdown predict_step(const RunSpec& spec);

// Speedup S(s) = t_exec(1, p) / t_exec(s, s*p). `per_site` must describe the
// p-process single-site run; the roster is replicated s times.
double speedup(const RunSpec& per_site, int s);

// Efficiency E(s) = t_exec(1, p) / t_exec(s, p) at fixed total process count.
double efficiency(const RunSpec& total, int s);

struct SweepPoint {
  double sigma_wan = 0.0;
  double efficiency = 0.0;
};
// E(s) as a function of wide-area bandwidth; non-decreasing in sigma and
// asymptoting to the latency-limited ceiling.
std::vector<SweepPoint> bandwidth_sweep(const RunSpec& total, int s,
                                        const std::vector<double>& sigma_list);

// Stellar-dynamics variants (pure tree or direct-summation integrators, no
// mesh). The force-pass cost is supplied externally via base_step_time.
enum class StellarKind { tree_shared, tree_block, direct_block };

struct StellarModelSpec {
  StellarKind kind = StellarKind::tree_shared;
  double base_step_time = 0.0;  // one shared-timestep force pass [s]
  double n_particles = 0.0;
  double block_size_override = 0.0;  // 0 = use the n_b fit
};

struct StellarWanModel {
  double w_l_tree = 0.0;
  double w_b_tree = 0.0;
  double steps_per_shared = 1.0;  // block steps per shared-step equivalent
  double wan_per_shared = 0.0;    // steps_per_shared * (w_l + w_b)
};
StellarWanModel stellar_wan_model(const StellarModelSpec& spec, int s,
                                  const NetworkConstants& net, double theta,
                                  double r_samp);
// Average block size fit n_b = 0.2 N^0.81.
double block_size(double n_particles);

struct MemoryEstimate {
  double tree_bytes = 0.0;  // 99 bytes per particle (60 + 0.75 * 52)
  double mesh_bytes = 0.0;  // 4.5 bytes per mesh cell
};
MemoryEstimate memory_estimate(double n_particles, double n_mesh);

// One CSV row per evaluated configuration, fixed column order:
// N,M,p,s,theta,t_tree,t_pm,t_l,t_b,w_l,w_b,t_exec,S,E
std::string prediction_csv_header();
std::string prediction_csv_row(const RunSpec& spec);

}  // namespace tpm::model
