#include "treepm/ic.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace tpm::ic {

ParticleSet lattice(int n_side, double box_length, double jitter, uint64_t seed) {
  if (n_side < 1) throw std::invalid_argument("lattice: n_side must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double h = box_length / n_side;
  const std::size_t n = static_cast<std::size_t>(n_side) * n_side * n_side;
  ParticleSet ps;
  ps.box = {box_length, true};
  ps.reserve(n);
  const double mass = 1.0 / static_cast<double>(n);
  uint64_t id = 0;
  for (int i = 0; i < n_side; ++i)
    for (int j = 0; j < n_side; ++j)
      for (int k = 0; k < n_side; ++k) {
        Vec3 pos{(i + 0.5) * h, (j + 0.5) * h, (k + 0.5) * h};
        if (jitter > 0.0) {
          pos.x += jitter * h * u(rng);
          pos.y += jitter * h * u(rng);
          pos.z += jitter * h * u(rng);
        }
        ps.push_back(id++, mass, ps.box.wrap(pos), {});
      }
  return ps;
}

ParticleSet plummer(std::size_t n, double a, uint64_t seed, double box_length,
                    const Vec3& centre) {
  if (n == 0) throw std::invalid_argument("plummer: empty model");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);

  ParticleSet ps;
  ps.box = {box_length, false};
  ps.reserve(n);
  const double mass = 1.0 / static_cast<double>(n);

  auto iso_dir = [&]() {
    // Uniform direction via z = cos(theta), phi uniform.
    const double z = 2.0 * u(rng) - 1.0;
    const double phi = 2.0 * M_PI * u(rng);
    const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
    return Vec3{s * std::cos(phi), s * std::sin(phi), z};
  };

  for (std::size_t i = 0; i < n; ++i) {
    // Radius from the inverse cumulative mass profile; clip the far tail.
    double r;
    do {
      const double m = u(rng) * 0.999;
      r = a / std::sqrt(std::pow(m, -2.0 / 3.0) - 1.0);
    } while (r > 20.0 * a);
    const Vec3 pos = centre + r * iso_dir();

    // Velocity from the isotropic distribution f(q) ~ q^2 (1-q^2)^3.5
    // (von Neumann rejection), scaled by the local escape speed.
    double q, g;
    do {
      q = u(rng);
      g = 0.1 * u(rng);
    } while (g > q * q * std::pow(1.0 - q * q, 3.5));
    const double v_esc = std::sqrt(2.0) * std::pow(1.0 + r * r / (a * a), -0.25);
    const Vec3 vel = q * v_esc * iso_dir();

    ps.push_back(i, mass, pos, vel);
  }

  // Move to the centre-of-mass frame, keeping the requested centre.
  Vec3 cm{}, cv{};
  for (std::size_t i = 0; i < n; ++i) {
    cm += ps.masses[i] * ps.positions[i];
    cv += ps.masses[i] * ps.velocities[i];
  }
  for (std::size_t i = 0; i < n; ++i) {
    ps.positions[i] += centre - cm;
    ps.velocities[i] -= cv;
  }
  return ps;
}

ParticleSet two_body_circular(double m1, double m2, double r, double box_length) {
  const double m = m1 + m2;
  const double v = std::sqrt(m / r);  // relative circular speed, G = 1
  ParticleSet ps;
  ps.box = {box_length, false};
  const Vec3 c{0.5 * box_length, 0.5 * box_length, 0.5 * box_length};
  ps.push_back(0, m1, c + Vec3{r * m2 / m, 0, 0}, Vec3{0, v * m2 / m, 0});
  ps.push_back(1, m2, c - Vec3{r * m1 / m, 0, 0}, Vec3{0, -v * m1 / m, 0});
  return ps;
}

}  // namespace tpm::ic
