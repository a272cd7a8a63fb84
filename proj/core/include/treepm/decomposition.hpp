#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "treepm/forces.hpp"
#include "treepm/octree.hpp"
#include "treepm/particles.hpp"

namespace tpm {

struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One site's x-interval of the box. Slabs tile [0, L) without gaps; the
// first slab starts at 0 and only interior boundaries move.
struct SiteSlab {
  int site = 0;
  double lo = 0.0;
  double hi = 0.0;
  uint64_t count = 0;
  double t_calc = 0.0;  // force-calculation time of the previous step

  double width() const { return hi - lo; }
  bool contains(double x) const { return x >= lo && x < hi; }
};

std::vector<SiteSlab> uniform_slabs(int s, double box_length);
int slab_owner(const std::vector<SiteSlab>& slabs, double x);

// Axis-aligned sub-box of a slab owned by one process.
struct ProcessDomain {
  std::array<double, 3> lo{};
  std::array<double, 3> hi{};
  int rank = 0;
  uint64_t count = 0;
};

// Sampled x-coordinates used to estimate the particle distribution along the
// slab axis. Exchanged as single-precision values.
struct SampleSet {
  std::vector<float> x;
  double r_samp = 1.0;
};

// Deterministic stride sampling in id order: every k-th particle with
// k = round(1/r_samp).
SampleSet sample_particles(const ParticleSet& particles, double r_samp);

// Per-site particle shares from the previous step's force times:
// N_i = N * (1/t_i) / sum_j (1/t_j).
std::vector<double> balance_targets(const std::vector<double>& t_calc,
                                    double n_total);

struct BoundaryUpdate {
  std::vector<SiteSlab> slabs;
  bool degenerate = false;  // all samples equal; boundaries left unchanged
};

// Moves the interior slab boundaries toward the load-balanced shares, using
// order statistics of the gathered samples, with each boundary clamped to at
// most move_limit of displacement per step. Ties resolve toward the lower
// coordinate.
BoundaryUpdate update_site_boundaries(const SampleSet& samples,
                                      const std::vector<double>& t_calc,
                                      const std::vector<SiteSlab>& current,
                                      double move_limit, double box_length);

// Recursive multisection of a slab: up to three nested splits along the
// longest axis of the running sub-box, equalizing particle counts per
// division. Throws DomainError (naming the factorization) when a split
// plane cannot be placed.
std::vector<ProcessDomain> multisection_decompose(const ParticleSet& particles,
                                                  const SiteSlab& slab,
                                                  int p_local,
                                                  double box_length);

struct MigrantSplit {
  std::vector<std::size_t> stay;
  std::vector<std::size_t> to_left;
  std::vector<std::size_t> to_right;
};

// Assigns every particle of `particles` to stay / left-neighbour /
// right-neighbour relative to slabs[site] under periodic wraparound. A
// particle owned by a non-adjacent slab indicates a missed migration step
// and raises DomainError.
MigrantSplit select_migrants(const ParticleSet& particles,
                             const std::vector<SiteSlab>& slabs, int site);

// Tree data one site exports so a neighbour whose slab is `requester` can
// run its short-range walk as if it had the full particle set: raw
// particles where the walk may descend to leaves, subtree moments where
// every admissible target group accepts the cell, and bare mass carriers
// where only ancestor moments are affected.
struct LetExport {
  std::vector<TreeAggregate> aggregates;
  std::vector<uint64_t> ids;
  std::vector<double> masses;
  std::vector<Vec3> positions;

  std::size_t particle_count() const { return ids.size(); }
  // Wire size: 16-byte header, 48 bytes per aggregate, 40 per particle.
  std::size_t byte_size() const;
  std::vector<uint8_t> serialize() const;
  static LetExport deserialize(const uint8_t* data, std::size_t len);
};

// `range` is the short-range cutoff length, `margin` the extra shell kept to
// absorb boundary motion (one mesh cell by default).
LetExport build_local_essential_tree(const OcTree& tree,
                                     const SiteSlab& requester,
                                     const ForceParams& params, double range,
                                     double margin);

// Appends the export's particles to `out` (velocities zero: exports carry
// force-relevant fields only).
void append_let_particles(const LetExport& let, ParticleSet& out);

// CSV dump of decomposition state: site, lo, hi, count, t_calc.
std::string slab_csv_header();
std::string slab_csv_row(const SiteSlab& slab);

}  // namespace tpm
