#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace tpm {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
  Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
  Vec3& operator*=(double f) { x *= f; y *= f; z *= f; return *this; }
  double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
  double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
};

inline Vec3 operator+(Vec3 a, const Vec3& b) { return a += b; }
inline Vec3 operator-(Vec3 a, const Vec3& b) { return a -= b; }
inline Vec3 operator*(Vec3 a, double f) { return a *= f; }
inline Vec3 operator*(double f, Vec3 a) { return a *= f; }
inline double dot(const Vec3& a, const Vec3& b) {
  return a.x * b.x + a.y * b.y + a.z * b.z;
}
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

// Simulation volume. Periodic boxes wrap coordinates into [0, length) and use
// the minimum-image convention for displacements.
struct Box {
  double length = 1.0;
  bool periodic = true;

  double wrap1(double v) const {
    if (!periodic) return v;
    v = std::fmod(v, length);
    return v < 0.0 ? v + length : v;
  }
  Vec3 wrap(Vec3 p) const { return {wrap1(p.x), wrap1(p.y), wrap1(p.z)}; }
  double min_image1(double d) const {
    if (!periodic) return d;
    if (d > 0.5 * length) d -= length;
    if (d < -0.5 * length) d += length;
    return d;
  }
  // Displacement from `a` to `b` under minimum image.
  Vec3 min_image(const Vec3& a, const Vec3& b) const {
    return {min_image1(b.x - a.x), min_image1(b.y - a.y), min_image1(b.z - a.z)};
  }
};

// Structure-of-arrays particle storage. Invariants: positions wrapped into
// the box, masses positive, ids unique.
struct ParticleSet {
  std::vector<uint64_t> ids;
  std::vector<double> masses;
  std::vector<Vec3> positions;
  std::vector<Vec3> velocities;
  Box box;
  double time = 0.0;

  std::size_t size() const { return ids.size(); }
  bool empty() const { return ids.empty(); }
  void reserve(std::size_t n);
  void push_back(uint64_t id, double mass, const Vec3& pos, const Vec3& vel);
  void append(const ParticleSet& other);
  // Keeps the entries at `keep` (indices in ascending order), drops the rest.
  ParticleSet select(const std::vector<std::size_t>& keep) const;
  double total_mass() const;
  void wrap_positions();
  // Throws std::invalid_argument if an invariant is violated.
  void check_invariants() const;
};

// Binary snapshot, little-endian:
//   header  { magic "SNBK", version u32, N u64, box_length f64, time f64 }
//   records N x { id u64, mass f64, pos f64[3], vel f64[3] }
void write_snapshot(const ParticleSet& ps, const std::string& path);
ParticleSet read_snapshot(const std::string& path);
void write_snapshot(const ParticleSet& ps, std::ostream& os);
ParticleSet read_snapshot(std::istream& is);

// Whitespace-separated text fixture: first line "N box_length time", then one
// particle per line as "id mass x y z vx vy vz". Lines starting with '#' are
// skipped.
ParticleSet read_text_particles(const std::string& path);

}  // namespace tpm
