#include "treepm/mesh.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>
#include <stdexcept>

namespace tpm {

namespace {
// The FFTW planner is not thread-safe; plan creation and destruction are
// serialized, execution runs concurrently.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

Mesh::Mesh(int cells_per_side, double box_length)
    : side_(cells_per_side),
      box_length_(box_length),
      cell_width_(box_length / cells_per_side) {
  if (cells_per_side < 2) throw std::invalid_argument("Mesh: side must be >= 2");
  const std::size_t n =
      static_cast<std::size_t>(side_) * side_ * side_;
  density.assign(n, 0.0);
  potential.assign(n, 0.0);
  for (auto& f : force) f.assign(n, 0.0);
}

double Mesh::total_density_mass() const {
  double sum = 0.0;
  for (double v : density) sum += v;
  return sum;
}

void Mesh::clear() {
  std::fill(density.begin(), density.end(), 0.0);
  std::fill(potential.begin(), potential.end(), 0.0);
  for (auto& f : force) std::fill(f.begin(), f.end(), 0.0);
}

void pm_assign_density(const ParticleSet& particles, Mesh& mesh) {
  const int m = mesh.side();
  const double inv_h = 1.0 / mesh.cell_width();
  for (std::size_t p = 0; p < particles.size(); ++p) {
    const Vec3& pos = particles.positions[p];
    const double mass = particles.masses[p];
    int base[3];
    double frac[3];
    for (int a = 0; a < 3; ++a) {
      // Grid nodes sit at cell centres (i + 1/2) h.
      const double u = pos[a] * inv_h - 0.5;
      const double fl = std::floor(u);
      base[a] = static_cast<int>(fl);
      frac[a] = u - fl;
    }
    for (int di = 0; di < 2; ++di)
      for (int dj = 0; dj < 2; ++dj)
        for (int dk = 0; dk < 2; ++dk) {
          const int i = ((base[0] + di) % m + m) % m;
          const int j = ((base[1] + dj) % m + m) % m;
          const int k = ((base[2] + dk) % m + m) % m;
          const double w = (di ? frac[0] : 1.0 - frac[0]) *
                           (dj ? frac[1] : 1.0 - frac[1]) *
                           (dk ? frac[2] : 1.0 - frac[2]);
          mesh.density[mesh.index(i, j, k)] += mass * w;
        }
  }
}

void pm_solve(Mesh& mesh) {
  const int m = mesh.side();
  const std::size_t n = mesh.total_cells();
  const std::size_t nc = static_cast<std::size_t>(m) * m * (m / 2 + 1);
  const double h = mesh.cell_width();
  const double cell_volume = h * h * h;
  const double box = mesh.box_length();

  std::vector<double> real(n);
  // Density contrast in mass/volume units.
  for (std::size_t i = 0; i < n; ++i) real[i] = mesh.density[i] / cell_volume;

  fftw_complex* spec =
      static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * nc));
  if (!spec) throw std::bad_alloc();

  fftw_plan fwd, bwd;
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fwd = fftw_plan_dft_r2c_3d(m, m, m, real.data(), spec, FFTW_ESTIMATE);
    bwd = fftw_plan_dft_c2r_3d(m, m, m, spec, real.data(), FFTW_ESTIMATE);
  }
  fftw_execute(fwd);

  const double two_pi_over_l = 2.0 * M_PI / box;
  const double norm = 1.0 / static_cast<double>(n);
  std::size_t idx = 0;
  for (int i = 0; i < m; ++i) {
    const int ki = i <= m / 2 ? i : i - m;
    for (int j = 0; j < m; ++j) {
      const int kj = j <= m / 2 ? j : j - m;
      for (int k = 0; k <= m / 2; ++k, ++idx) {
        const int kk = k;
        const double k2 = two_pi_over_l * two_pi_over_l *
                          (static_cast<double>(ki) * ki +
                           static_cast<double>(kj) * kj +
                           static_cast<double>(kk) * kk);
        double g = 0.0;  // mean mode removed
        if (k2 > 0.0) g = -4.0 * M_PI / k2;
        spec[idx][0] *= g * norm;
        spec[idx][1] *= g * norm;
      }
    }
  }
  fftw_execute(bwd);
  mesh.potential.assign(real.begin(), real.end());

  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(fwd);
    fftw_destroy_plan(bwd);
  }
  fftw_free(spec);

  // F = -grad(phi), centred differences on the periodic grid.
  const double inv_2h = 1.0 / (2.0 * h);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      for (int k = 0; k < m; ++k) {
        const int ip = (i + 1) % m, im = (i + m - 1) % m;
        const int jp = (j + 1) % m, jm = (j + m - 1) % m;
        const int kp = (k + 1) % m, km = (k + m - 1) % m;
        const std::size_t c = mesh.index(i, j, k);
        mesh.force[0][c] =
            -(mesh.potential[mesh.index(ip, j, k)] -
              mesh.potential[mesh.index(im, j, k)]) * inv_2h;
        mesh.force[1][c] =
            -(mesh.potential[mesh.index(i, jp, k)] -
              mesh.potential[mesh.index(i, jm, k)]) * inv_2h;
        mesh.force[2][c] =
            -(mesh.potential[mesh.index(i, j, kp)] -
              mesh.potential[mesh.index(i, j, km)]) * inv_2h;
      }
}

std::vector<Vec3> pm_interpolate(const Mesh& mesh, const ParticleSet& particles) {
  const int m = mesh.side();
  const double inv_h = 1.0 / mesh.cell_width();
  std::vector<Vec3> accel(particles.size());
  for (std::size_t p = 0; p < particles.size(); ++p) {
    const Vec3& pos = particles.positions[p];
    int base[3];
    double frac[3];
    for (int a = 0; a < 3; ++a) {
      const double u = pos[a] * inv_h - 0.5;
      const double fl = std::floor(u);
      base[a] = static_cast<int>(fl);
      frac[a] = u - fl;
    }
    Vec3 acc{};
    for (int di = 0; di < 2; ++di)
      for (int dj = 0; dj < 2; ++dj)
        for (int dk = 0; dk < 2; ++dk) {
          const int i = ((base[0] + di) % m + m) % m;
          const int j = ((base[1] + dj) % m + m) % m;
          const int k = ((base[2] + dk) % m + m) % m;
          const double w = (di ? frac[0] : 1.0 - frac[0]) *
                           (dj ? frac[1] : 1.0 - frac[1]) *
                           (dk ? frac[2] : 1.0 - frac[2]);
          const std::size_t c = mesh.index(i, j, k);
          acc.x += w * mesh.force[0][c];
          acc.y += w * mesh.force[1][c];
          acc.z += w * mesh.force[2][c];
        }
    accel[p] = acc;
  }
  return accel;
}

}  // namespace tpm
