#pragma once

#include "treepm/particles.hpp"

// Initial-condition generators for tests and desk-scale experiments: a
// perturbed uniform lattice for periodic runs and a Plummer sphere for
// isolated stellar-style tests.

namespace tpm::ic {

// n_side^3 equal-mass particles on a cubic lattice, each displaced by a
// uniform random offset of at most `jitter` lattice spacings per axis.
// Total mass 1, zero velocities. Deterministic for a fixed seed.
ParticleSet lattice(int n_side, double box_length, double jitter, uint64_t seed);

// Standard Plummer sphere with total mass 1, scale radius `a`, virial
// velocities, centre-of-mass frame, placed at `centre` in a non-periodic box.
ParticleSet plummer(std::size_t n, double a, uint64_t seed, double box_length,
                    const Vec3& centre);

// Two bodies of mass m1, m2 on a circular orbit of separation r about their
// barycentre (non-periodic box). Orbital period is 2*pi*sqrt(r^3/(m1+m2)).
ParticleSet two_body_circular(double m1, double m2, double r, double box_length);

}  // namespace tpm::ic
