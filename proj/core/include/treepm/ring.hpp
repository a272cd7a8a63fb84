#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "treepm/decomposition.hpp"
#include "treepm/particles.hpp"
#include "treepm/transport.hpp"

// Per-step communication among the sites of a ring: gathers run as s-1
// neighbour hops (send right, receive left), neighbour phases as four
// blocking directional transfers per phase. Byte accounting counts each
// logical payload once, when its owner injects it, matching the additive
// volume terms of the analytic model; the virtual clock charges one
// round-trip latency per blocking exchange plus payload bytes over the
// effective wide-area bandwidth.

namespace tpm::ring {

struct ProtocolError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// The four per-step communication phases.
enum class Phase : int { mesh = 0, samples = 1, let = 2, migrate = 3 };
constexpr int kPhaseCount = 4;
const char* phase_name(Phase p);

struct PhaseStats {
  uint64_t payload_bytes = 0;  // distinct payload bytes this site injected
  double seconds = 0.0;        // virtual (simulated) or wall (tcp) duration
  uint32_t exchanges = 0;      // blocking wide-area exchanges
  uint32_t neighbor_sessions = 0;  // paired neighbour exchanges (LET/migrate)
};

struct ExchangeStats {
  std::array<PhaseStats, kPhaseCount> phase;
  uint64_t mesh_grid_bytes = 0;  // density payloads alone (4 bytes/cell/site)
  uint64_t sample_bytes = 0;     // sample payloads alone
  uint64_t aux_bytes = 0;        // load/timestep/boundary scalars
  double wan_latency_seconds = 0.0;
  double wan_bandwidth_seconds = 0.0;

  uint32_t wan_exchanges() const {
    uint32_t n = 0;
    for (const auto& p : phase) n += p.exchanges;
    return n;
  }
  void reset() { *this = ExchangeStats{}; }
};

// One site's view of the ring. For s = 2 the two channels lead to the same
// peer; the protocol still performs both directions so the 5s+3 exchange
// accounting of the model is realized literally.
struct SiteEndpoint {
  int site = 0;
  int site_count = 1;
  net::Channel* left = nullptr;   // towards (site - 1 + s) % s
  net::Channel* right = nullptr;  // towards (site + 1) % s
  double lambda_wan = 0.0;        // virtual-clock parameters (simulated runs)
  double sigma_wan_eff = 0.0;
  bool virtual_clock = true;
  ExchangeStats stats;
};

// Expected wide-area exchanges per step: five ring gathers of s-1 hops plus
// four blocking transfers with each of the two neighbours; 0 for one site.
uint32_t plan_step_exchanges(int s);

// Generic ring allgather: returns all sites' payloads ordered by site index
// (every site gets the identical result). Records under `phase`.
std::vector<std::vector<uint8_t>> ring_allgather(SiteEndpoint& ep,
                                                 std::vector<uint8_t> own,
                                                 Phase phase);

struct MeshReduceResult {
  std::vector<double> density;   // elementwise sum, site-index fold order
  std::vector<double> t_calc;    // per-site force-calculation times
  std::vector<uint64_t> counts;  // populations those times were measured over
  double dt_min = 0.0;           // global minimum of the step proposals
};

// Phase 1: density grids cross as one float per cell; the sum is folded in
// site order in double precision. Force-time (paired with its particle
// count) and timestep scalars ride the same phase as two further gathers.
MeshReduceResult ring_reduce_mesh(SiteEndpoint& ep,
                                  const std::vector<double>& local_density,
                                  double t_calc_local, uint64_t count_local,
                                  double dt_local);

// Phase 2a: sampled x-coordinates, concatenated in site order.
SampleSet ring_gather_samples(SiteEndpoint& ep, const SampleSet& local);

// Phase 2b: boundary agreement; every site contributes its computed interior
// boundaries and verifies all sites agree bit-exactly.
void ring_agree_boundaries(SiteEndpoint& ep,
                           const std::vector<double>& boundaries);

struct LetExchangeResult {
  LetExport from_left;
  LetExport from_right;
};

// Phase 3: local essential tree data, one paired exchange for two sites and
// two for three or more.
LetExchangeResult exchange_let(SiteEndpoint& ep, const LetExport& to_left,
                               const LetExport& to_right);

// Phase 4: particle migration; the global particle multiset is conserved.
ParticleSet migrate_particles(SiteEndpoint& ep, const ParticleSet& to_left,
                              const ParticleSet& to_right, const Box& box);

// Memory-capped exchange: the payload crosses as ceil(len/cap) sequential
// sub-messages and is reassembled bit-exactly.
void chunked_send(net::Channel& ch, const std::vector<uint8_t>& payload,
                  std::size_t memory_cap);
std::vector<uint8_t> chunked_recv(net::Channel& ch);

// Wire helpers shared with the harness.
std::vector<uint8_t> particles_to_bytes(const ParticleSet& ps);
ParticleSet particles_from_bytes(const std::vector<uint8_t>& buf, const Box& box);
std::vector<uint8_t> grid_to_wire(const std::vector<double>& grid);  // f32 cells
void fold_wire_grid(std::vector<double>& acc, const std::vector<uint8_t>& wire);

std::string stats_csv_header();
std::string stats_csv_row(int step, Phase phase, const PhaseStats& stats);

}  // namespace tpm::ring
