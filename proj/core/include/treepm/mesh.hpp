#pragma once

#include <cstdint>
#include <vector>

#include "treepm/particles.hpp"

namespace tpm {

// Periodic mass mesh with grid nodes at cell centres. `density` holds mass
// per cell; the solver fills `potential` and the three force-component
// grids. Invariant after assignment: the grid total equals the assigned
// particle mass to rounding.
class Mesh {
 public:
  Mesh(int cells_per_side, double box_length);

  int side() const { return side_; }
  std::size_t total_cells() const { return density.size(); }
  double cell_width() const { return cell_width_; }
  double box_length() const { return box_length_; }

  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(i) * side_ + j) * side_ + k;
  }

  double total_density_mass() const;
  void clear();

  std::vector<double> density;
  std::vector<double> potential;
  std::vector<double> force[3];

 private:
  int side_;
  double box_length_;
  double cell_width_;
};

// Cloud-in-cell assignment of particle masses onto the mesh (adds onto the
// existing grid). The same kernel is used by pm_interpolate, which cancels
// the self-force.
void pm_assign_density(const ParticleSet& particles, Mesh& mesh);

// Poisson solve for the periodic potential (G = 1): FFT of the density,
// -4 pi G / k^2 in Fourier space with the mean mode removed, then centred
// finite differences for the force grids.
void pm_solve(Mesh& mesh);

// Cloud-in-cell gather of the force grids at the particle positions.
std::vector<Vec3> pm_interpolate(const Mesh& mesh, const ParticleSet& particles);

}  // namespace tpm
