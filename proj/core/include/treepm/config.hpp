#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "treepm/harness.hpp"
#include "treepm/model.hpp"

// Line-based "key = value" configuration with [section] headers. Sections:
//   [network]     lambda_lan, lambda_wan, sigma_lan, sigma_wan, star_topology,
//                 or preset = das3 | gbbp | globalgrid (explicit keys override)
//   [site]        repeatable; tau_tree, tau_fft, tau_mesh, name,
//                 or preset = VU|UvA|LIACS|TU|MM|H|E|A|T|grid
//   [run]         n, m, theta, p, r_samp (ratio) or r_samp_inverse,
//                 migration_bytes, roster = das3:<s> | gbbp:<letters> | grid:<s>
//   [experiment]  steps, lattice_side, mesh_side, box_length, jitter, seed,
//                 softening, ncrit, cutoff_cells, n_leaf, dt, adaptive, eta,
//                 dt_max, move_limit, snapshot_cadence, snapshot_prefix,
//                 backend, tcp_site, tcp_hosts, tcp_base_port
// '#' starts a comment; empty lines are skipped.

namespace tpm::config {

struct Section {
  std::string name;
  std::map<std::string, std::string> kv;

  bool has(const std::string& key) const { return kv.count(key) > 0; }
  std::string get(const std::string& key) const;
  double get_double(const std::string& key) const;
  long long get_int(const std::string& key) const;
  bool get_bool(const std::string& key) const;
};

struct File {
  std::vector<Section> sections;

  static File parse_file(const std::string& path);
  static File parse_string(const std::string& text);

  const Section* find(const std::string& name) const;
  std::vector<const Section*> find_all(const std::string& name) const;
  // CLI overrides arrive as "section.key=value" strings.
  void override(const std::string& dotted_key, const std::string& value);
};

model::RunSpec load_runspec(const File& file);
harness::ExperimentConfig load_experiment(const File& file);

}  // namespace tpm::config
