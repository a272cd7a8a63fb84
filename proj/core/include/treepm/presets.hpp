#pragma once

#include "treepm/model.hpp"

// Built-in machine and network constant sets for the reference environments
// the model was calibrated on: a national five-cluster grid ("das3"), a
// four-supercomputer wide-area testbed ("gbbp") and an idealized homogeneous
// global grid used for scalability studies.

namespace tpm::presets {

// Five grid clusters in fixed roster order (VU, UvA, LIACS, TU, MM).
std::vector<model::MachineConstants> das3_sites();
// Four supercomputers keyed by letter: H (Espoo), E (Edinburgh),
// A (Amsterdam), T (Tokyo).
model::MachineConstants gbbp_site(char letter);
// Roster from a letter string, e.g. "HEA".
std::vector<model::MachineConstants> gbbp_roster(const std::string& letters);

model::NetworkConstants das3_network();   // star topology
model::NetworkConstants gbbp_network();   // flat sigma_wan
model::NetworkConstants global_grid_network();
model::MachineConstants global_grid_site();

// Sampling-rate convention from the reference runs: 1/2500 for N = 256^3 and
// 1/10000 for anything larger.
double reference_r_samp(double n_particles);

// Parallel-stream transfer profiles (streams, chunk sizes, pacing): a tuned
// dedicated light path and a shared research WAN.
struct TransferProfile {
  int streams = 1;
  std::size_t send_chunk = 8 * 1024;
  std::size_t recv_chunk = 32 * 1024;
  double pacing_rate = 0.0;  // bytes/s per stream, 0 = unlimited
};
TransferProfile lightpath_profile();   // 64 streams, 8 kB chunks, 100 MB/s/stream
TransferProfile shared_wan_profile();  // 16 streams, 256 kB chunks

}  // namespace tpm::presets
