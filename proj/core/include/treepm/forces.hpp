#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "treepm/octree.hpp"
#include "treepm/particles.hpp"

namespace tpm {

struct ForceParams {
  double theta = 0.5;      // opening angle
  double softening = 0.0;  // Plummer softening length
  int ncrit = 1000;        // max particles sharing one interaction list
  double cutoff_cells = 3.0;  // short-range span in mesh cell widths
  // Step-indexed opening-angle switches, ordered by step: (from_step, theta).
  std::vector<std::pair<int, double>> theta_schedule;

  double theta_at(int step) const {
    double t = theta;
    for (const auto& [from, value] : theta_schedule)
      if (step >= from) t = value;
    return t;
  }
};

struct ForceResult {
  std::vector<Vec3> accel;  // aligned with the target set
  uint64_t interaction_count = 0;
};

// Smooth short-range weight: 1 at r = 0, 0 at r >= r_cut, C2 at both ends.
double short_range_taper(double r, double r_cut);

// Grouped Barnes-Hut walk over `tree` evaluated at `targets` (unit G,
// Plummer softening). Cells open when side > theta * distance, with distance
// measured from the group's bounding box to the cell centre, so every
// decision is a function of the fixed octant geometry alone.
//
// range_limit > 0 selects the short-range (mesh-complemented) mode: the
// walk skips cells farther than range_limit, tapers every contribution to
// zero at range_limit, and additionally restricts accepted cells to
// side <= range_limit / 2 so the interaction horizon stays bounded.
// Self-contributions are excluded by particle id.
ForceResult tree_force(const OcTree& tree, const ParticleSet& targets,
                       const ForceParams& params, double range_limit = 0.0);

// Exact O(N^2) pairwise accelerations, the verification oracle for the tree.
// With range_limit > 0 contributions beyond the limit are dropped (hard
// truncation under the minimum image). Throws when the set exceeds `cap`.
std::vector<Vec3> direct_force_oracle(const ParticleSet& particles,
                                      double softening,
                                      double range_limit = 0.0,
                                      std::size_t cap = 100000);

// Pairwise potential energy (test support for energy-conservation checks).
double direct_potential(const ParticleSet& particles, double softening);
double kinetic_energy(const ParticleSet& particles);

}  // namespace tpm
