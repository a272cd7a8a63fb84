#include "treepm/ring.hpp"

#include <cstring>
#include <sstream>
#include <thread>

namespace tpm::ring {

const char* phase_name(Phase p) {
  switch (p) {
    case Phase::mesh: return "mesh";
    case Phase::samples: return "samples";
    case Phase::let: return "let";
    case Phase::migrate: return "migrate";
  }
  return "?";
}

uint32_t plan_step_exchanges(int s) {
  if (s <= 1) return 0;
  return static_cast<uint32_t>(5 * s + 3);
}

namespace {

struct PhaseClock {
  SiteEndpoint& ep;
  Phase phase;
  double wall_start = 0.0;
  uint64_t latency_units = 0;   // blocking exchanges in this phase call
  uint64_t global_bytes = 0;    // all payload bytes that crossed the ring

  PhaseClock(SiteEndpoint& e, Phase p) : ep(e), phase(p) {
    if (!ep.virtual_clock && ep.right) wall_start = ep.right->clock();
  }

  void account(uint32_t exchanges, uint64_t own_bytes, uint64_t all_bytes) {
    PhaseStats& st = ep.stats.phase[static_cast<int>(phase)];
    st.exchanges += exchanges;
    st.payload_bytes += own_bytes;
    latency_units += exchanges;
    global_bytes += all_bytes;
  }

  void close() {
    PhaseStats& st = ep.stats.phase[static_cast<int>(phase)];
    if (ep.virtual_clock) {
      const double lat = ep.lambda_wan * static_cast<double>(latency_units);
      const double bw =
          ep.sigma_wan_eff > 0.0
              ? static_cast<double>(global_bytes) / ep.sigma_wan_eff
              : 0.0;
      st.seconds += lat + bw;
      ep.stats.wan_latency_seconds += lat;
      ep.stats.wan_bandwidth_seconds += bw;
    } else if (ep.right) {
      st.seconds += ep.right->clock() - wall_start;
    }
  }
};

// Sends on one channel while receiving on another. Both ring neighbours may
// push large payloads at once; a synchronous send could stall on full socket
// buffers with the peer equally stalled.
std::vector<uint8_t> exchange_op(net::Channel& send_ch,
                                 const std::vector<uint8_t>& payload,
                                 net::Channel& recv_ch) {
  std::exception_ptr send_error;
  std::thread sender([&] {
    try {
      send_ch.send(payload);
    } catch (...) {
      send_error = std::current_exception();
    }
  });
  std::vector<uint8_t> received;
  std::exception_ptr recv_error;
  try {
    received = recv_ch.recv();
  } catch (...) {
    recv_error = std::current_exception();
  }
  sender.join();
  if (send_error) std::rethrow_exception(send_error);
  if (recv_error) std::rethrow_exception(recv_error);
  return received;
}

}  // namespace

std::vector<std::vector<uint8_t>> ring_allgather(SiteEndpoint& ep,
                                                 std::vector<uint8_t> own,
                                                 Phase phase) {
  const int s = ep.site_count;
  std::vector<std::vector<uint8_t>> all(static_cast<std::size_t>(std::max(s, 1)));
  if (s <= 1) {
    all[0] = std::move(own);
    return all;
  }
  PhaseClock clock(ep, phase);
  const uint64_t own_bytes = own.size();
  all[ep.site] = own;
  std::vector<uint8_t> relay = std::move(own);
  uint64_t global_bytes = own_bytes;
  for (int round = 1; round < s; ++round) {
    relay = exchange_op(*ep.right, relay, *ep.left);
    const int origin = (ep.site - round + s * 64) % s;
    all[origin] = relay;
    global_bytes += relay.size();
  }
  clock.account(static_cast<uint32_t>(s - 1), own_bytes, global_bytes);
  clock.close();
  return all;
}

std::vector<uint8_t> grid_to_wire(const std::vector<double>& grid) {
  std::vector<uint8_t> wire(grid.size() * 4);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const float f = static_cast<float>(grid[i]);
    std::memcpy(wire.data() + 4 * i, &f, 4);
  }
  return wire;
}

void fold_wire_grid(std::vector<double>& acc, const std::vector<uint8_t>& wire) {
  if (wire.size() != acc.size() * 4)
    throw ProtocolError("ring_reduce_mesh: mesh shape mismatch");
  for (std::size_t i = 0; i < acc.size(); ++i) {
    float f;
    std::memcpy(&f, wire.data() + 4 * i, 4);
    acc[i] += static_cast<double>(f);
  }
}

MeshReduceResult ring_reduce_mesh(SiteEndpoint& ep,
                                  const std::vector<double>& local_density,
                                  double t_calc_local, uint64_t count_local,
                                  double dt_local) {
  MeshReduceResult out;
  if (ep.site_count <= 1) {
    out.density = local_density;
    out.t_calc = {t_calc_local};
    out.counts = {count_local};
    out.dt_min = dt_local;
    return out;
  }

  auto grids = ring_allgather(ep, grid_to_wire(local_density), Phase::mesh);
  ep.stats.mesh_grid_bytes += 4 * local_density.size();
  out.density.assign(local_density.size(), 0.0);
  for (const auto& wire : grids) fold_wire_grid(out.density, wire);

  // Load and timestep scalars are accumulated in this same phase as two
  // further ring gathers.
  auto pack_load = [](double t, uint64_t n) {
    std::vector<uint8_t> b(16);
    std::memcpy(b.data(), &t, 8);
    std::memcpy(b.data() + 8, &n, 8);
    return b;
  };
  auto pack = [](double v) {
    std::vector<uint8_t> b(8);
    std::memcpy(b.data(), &v, 8);
    return b;
  };
  auto unpack = [](const std::vector<uint8_t>& b) {
    if (b.size() != 8) throw ProtocolError("ring_reduce_mesh: bad aux payload");
    double v;
    std::memcpy(&v, b.data(), 8);
    return v;
  };
  auto loads = ring_allgather(ep, pack_load(t_calc_local, count_local), Phase::mesh);
  auto steps = ring_allgather(ep, pack(dt_local), Phase::mesh);
  ep.stats.aux_bytes += 24;
  out.t_calc.reserve(loads.size());
  out.counts.reserve(loads.size());
  for (const auto& b : loads) {
    if (b.size() != 16) throw ProtocolError("ring_reduce_mesh: bad load payload");
    double t;
    uint64_t n;
    std::memcpy(&t, b.data(), 8);
    std::memcpy(&n, b.data() + 8, 8);
    out.t_calc.push_back(t);
    out.counts.push_back(n);
  }
  out.dt_min = unpack(steps[0]);
  for (const auto& b : steps) out.dt_min = std::min(out.dt_min, unpack(b));
  return out;
}

SampleSet ring_gather_samples(SiteEndpoint& ep, const SampleSet& local) {
  SampleSet out;
  out.r_samp = local.r_samp;
  if (ep.site_count <= 1) {
    out.x = local.x;
    return out;
  }
  std::vector<uint8_t> own(local.x.size() * 4);
  if (!local.x.empty())
    std::memcpy(own.data(), local.x.data(), own.size());
  auto all = ring_allgather(ep, std::move(own), Phase::samples);
  ep.stats.sample_bytes += 4 * local.x.size();
  for (const auto& b : all) {
    const std::size_t n = b.size() / 4;
    const std::size_t at = out.x.size();
    out.x.resize(at + n);
    if (n) std::memcpy(out.x.data() + at, b.data(), b.size());
  }
  return out;
}

void ring_agree_boundaries(SiteEndpoint& ep,
                           const std::vector<double>& boundaries) {
  if (ep.site_count <= 1) return;
  std::vector<uint8_t> own(boundaries.size() * 8);
  if (!boundaries.empty())
    std::memcpy(own.data(), boundaries.data(), own.size());
  auto all = ring_allgather(ep, std::move(own), Phase::samples);
  ep.stats.aux_bytes += 8 * boundaries.size();
  for (const auto& b : all)
    if (b.size() != boundaries.size() * 8 ||
        std::memcmp(b.data(), all[ep.site].data(), b.size()) != 0)
      throw ProtocolError("boundary agreement failed across sites");
}

namespace {

// One blocking directional neighbour transfer in each of four slots:
// send-left, recv-right, send-right, recv-left. Every slot counts as one
// wide-area exchange; payload bytes are charged at the sender. In the
// degenerate two-site ring a phase physically collapses to a single paired
// exchange with the one neighbour, but the exchange count keeps the 5s+3
// accounting of the model.
struct NeighborPhase {
  SiteEndpoint& ep;
  PhaseClock clock;

  NeighborPhase(SiteEndpoint& e, Phase p) : ep(e), clock(e, p) {}

  // Full four-slot pattern (s >= 3): a send to the left neighbour arrives on
  // that site's right-hand channel, so send-left pairs with recv-right.
  std::pair<std::vector<uint8_t>, std::vector<uint8_t>> run(
      const std::vector<uint8_t>& to_left, const std::vector<uint8_t>& to_right) {
    std::vector<uint8_t> from_right = exchange_op(*ep.left, to_left, *ep.right);
    std::vector<uint8_t> from_left = exchange_op(*ep.right, to_right, *ep.left);
    const uint64_t own = to_left.size() + to_right.size();
    clock.account(4, own, own + from_left.size() + from_right.size());
    PhaseStats& st = ep.stats.phase[static_cast<int>(clock.phase)];
    st.neighbor_sessions += 2;
    clock.close();
    return {std::move(from_left), std::move(from_right)};
  }

  // Single paired exchange (s == 2).
  std::vector<uint8_t> run_pair(const std::vector<uint8_t>& to_peer) {
    std::vector<uint8_t> from_peer = exchange_op(*ep.left, to_peer, *ep.right);
    clock.account(4, to_peer.size(), to_peer.size() + from_peer.size());
    PhaseStats& st = ep.stats.phase[static_cast<int>(clock.phase)];
    st.neighbor_sessions += 1;
    clock.close();
    return from_peer;
  }
};

}  // namespace

LetExchangeResult exchange_let(SiteEndpoint& ep, const LetExport& to_left,
                               const LetExport& to_right) {
  LetExchangeResult out;
  if (ep.site_count <= 1) return out;
  NeighborPhase phase(ep, Phase::let);
  if (ep.site_count == 2) {
    // Both directions name the same slab of the one neighbour; ship the
    // export once and fold the import into the left-hand slot.
    auto from_peer = phase.run_pair(to_left.serialize());
    out.from_left = LetExport::deserialize(from_peer.data(), from_peer.size());
    return out;
  }
  auto [from_left, from_right] =
      phase.run(to_left.serialize(), to_right.serialize());
  out.from_left = LetExport::deserialize(from_left.data(), from_left.size());
  out.from_right = LetExport::deserialize(from_right.data(), from_right.size());
  return out;
}

std::vector<uint8_t> particles_to_bytes(const ParticleSet& ps) {
  std::vector<uint8_t> buf;
  buf.reserve(8 + 64 * ps.size());
  auto put = [&buf](const void* p, std::size_t n) {
    const uint8_t* b = static_cast<const uint8_t*>(p);
    buf.insert(buf.end(), b, b + n);
  };
  const uint64_t n = ps.size();
  put(&n, 8);
  for (std::size_t i = 0; i < ps.size(); ++i) {
    put(&ps.ids[i], 8);
    put(&ps.masses[i], 8);
    for (int a = 0; a < 3; ++a) {
      const double v = ps.positions[i][a];
      put(&v, 8);
    }
    for (int a = 0; a < 3; ++a) {
      const double v = ps.velocities[i][a];
      put(&v, 8);
    }
  }
  return buf;
}

ParticleSet particles_from_bytes(const std::vector<uint8_t>& buf,
                                 const Box& box) {
  if (buf.size() < 8) throw ProtocolError("particle payload: truncated header");
  uint64_t n;
  std::memcpy(&n, buf.data(), 8);
  if (buf.size() != 8 + 64 * n)
    throw ProtocolError("particle payload: length mismatch");
  ParticleSet ps;
  ps.box = box;
  ps.reserve(n);
  std::size_t at = 8;
  for (uint64_t i = 0; i < n; ++i) {
    uint64_t id;
    double mass;
    Vec3 pos, vel;
    std::memcpy(&id, buf.data() + at, 8);
    at += 8;
    std::memcpy(&mass, buf.data() + at, 8);
    at += 8;
    for (int a = 0; a < 3; ++a) {
      std::memcpy(&pos[a], buf.data() + at, 8);
      at += 8;
    }
    for (int a = 0; a < 3; ++a) {
      std::memcpy(&vel[a], buf.data() + at, 8);
      at += 8;
    }
    ps.push_back(id, mass, pos, vel);
  }
  return ps;
}

ParticleSet migrate_particles(SiteEndpoint& ep, const ParticleSet& to_left,
                              const ParticleSet& to_right, const Box& box) {
  ParticleSet received;
  received.box = box;
  if (ep.site_count <= 1) {
    if (to_left.size() || to_right.size())
      throw ProtocolError("migrate_particles: migrants with a single site");
    return received;
  }
  NeighborPhase phase(ep, Phase::migrate);
  if (ep.site_count == 2) {
    // Both directions lead to the one neighbour: ship the union.
    ParticleSet both = to_left;
    both.append(to_right);
    auto from_peer = phase.run_pair(particles_to_bytes(both));
    return particles_from_bytes(from_peer, box);
  }
  auto [from_left, from_right] =
      phase.run(particles_to_bytes(to_left), particles_to_bytes(to_right));
  received = particles_from_bytes(from_left, box);
  received.append(particles_from_bytes(from_right, box));
  return received;
}

void chunked_send(net::Channel& ch, const std::vector<uint8_t>& payload,
                  std::size_t memory_cap) {
  if (memory_cap == 0) throw ProtocolError("chunked_send: zero memory cap");
  const uint64_t total = payload.size();
  const uint64_t parts =
      total == 0 ? 1 : (total + memory_cap - 1) / memory_cap;
  std::vector<uint8_t> header(16);
  std::memcpy(header.data(), &total, 8);
  std::memcpy(header.data() + 8, &parts, 8);
  ch.send(header);
  for (uint64_t p = 0; p < parts; ++p) {
    const std::size_t at = static_cast<std::size_t>(p) * memory_cap;
    const std::size_t n =
        std::min(memory_cap, static_cast<std::size_t>(total) - at);
    ch.send(std::vector<uint8_t>(payload.begin() + at, payload.begin() + at + n));
  }
}

std::vector<uint8_t> chunked_recv(net::Channel& ch) {
  const std::vector<uint8_t> header = ch.recv();
  if (header.size() != 16) throw ProtocolError("chunked_recv: bad header");
  uint64_t total, parts;
  std::memcpy(&total, header.data(), 8);
  std::memcpy(&parts, header.data() + 8, 8);
  std::vector<uint8_t> out;
  out.reserve(total);
  for (uint64_t p = 0; p < parts; ++p) {
    const std::vector<uint8_t> piece = ch.recv();
    out.insert(out.end(), piece.begin(), piece.end());
  }
  if (out.size() != total)
    throw ProtocolError("chunked_recv: reassembled length mismatch");
  return out;
}

std::string stats_csv_header() { return "step,phase,bytes,seconds"; }

std::string stats_csv_row(int step, Phase phase, const PhaseStats& stats) {
  std::ostringstream os;
  os.precision(10);
  os << step << ',' << phase_name(phase) << ',' << stats.payload_bytes << ','
     << stats.seconds;
  return os.str();
}

}  // namespace tpm::ring
