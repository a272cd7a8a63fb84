#include "treepm/presets.hpp"

#include <stdexcept>

namespace tpm::presets {

using model::MachineConstants;
using model::NetworkConstants;

std::vector<MachineConstants> das3_sites() {
  return {
      {5.9e-9, 5.0e-9, 2.4e-6, "VU"},
      {6.4e-9, 5.0e-9, 2.4e-6, "UvA"},
      {5.4e-9, 5.7e-9, 2.4e-6, "LIACS"},
      {5.9e-9, 5.0e-9, 1.9e-6, "TU"},
      {5.9e-9, 5.0e-9, 2.4e-6, "MM"},
  };
}

MachineConstants gbbp_site(char letter) {
  switch (letter) {
    case 'H': return {3.9e-9, 3.4e-9, 7.8e-7, "Louhi"};
    case 'E': return {4.0e-9, 3.4e-9, 7.8e-7, "HECToR"};
    case 'A': return {5.4e-9, 5.1e-9, 5.8e-7, "Huygens"};
    case 'T': return {4.3e-9, 3.4e-9, 7.8e-7, "CFCA"};
    default: throw std::invalid_argument(std::string("unknown site letter: ") + letter);
  }
}

std::vector<MachineConstants> gbbp_roster(const std::string& letters) {
  std::vector<MachineConstants> roster;
  roster.reserve(letters.size());
  for (char c : letters) roster.push_back(gbbp_site(c));
  return roster;
}

NetworkConstants das3_network() {
  NetworkConstants net;
  net.lambda_lan = 1.0e-4;
  net.lambda_wan = 3.0e-3;
  net.sigma_lan = 1.0e8;
  net.sigma_wan = 5.0e7;
  net.star_topology = true;
  return net;
}

NetworkConstants gbbp_network() {
  NetworkConstants net;
  net.lambda_lan = 8.0e-5;
  net.lambda_wan = 2.7e-1;
  net.sigma_lan = 5.4e8;
  net.sigma_wan = 5.0e7;
  net.star_topology = false;
  return net;
}

NetworkConstants global_grid_network() {
  NetworkConstants net;
  net.lambda_lan = 8.0e-5;
  net.lambda_wan = 3.0e-1;
  net.sigma_lan = 2.3e9;
  net.sigma_wan = 4.0e8;
  net.star_topology = false;
  return net;
}

MachineConstants global_grid_site() {
  return {5.0e-9, 3.5e-9, 7.5e-7, "grid"};
}

double reference_r_samp(double n_particles) {
  return n_particles <= 256.0 * 256.0 * 256.0 ? 1.0 / 2500.0 : 1.0 / 10000.0;
}

TransferProfile lightpath_profile() {
  TransferProfile p;
  p.streams = 64;
  p.send_chunk = 8 * 1024;
  p.recv_chunk = 8 * 1024;
  p.pacing_rate = 1.0e8;
  return p;
}

TransferProfile shared_wan_profile() {
  TransferProfile p;
  p.streams = 16;
  p.send_chunk = 256 * 1024;
  p.recv_chunk = 256 * 1024;
  p.pacing_rate = 0.0;
  return p;
}

}  // namespace tpm::presets
