#include "treepm/particles.hpp"

#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace tpm {

void ParticleSet::reserve(std::size_t n) {
  ids.reserve(n);
  masses.reserve(n);
  positions.reserve(n);
  velocities.reserve(n);
}

void ParticleSet::push_back(uint64_t id, double mass, const Vec3& pos,
                            const Vec3& vel) {
  ids.push_back(id);
  masses.push_back(mass);
  positions.push_back(pos);
  velocities.push_back(vel);
}

void ParticleSet::append(const ParticleSet& other) {
  ids.insert(ids.end(), other.ids.begin(), other.ids.end());
  masses.insert(masses.end(), other.masses.begin(), other.masses.end());
  positions.insert(positions.end(), other.positions.begin(), other.positions.end());
  velocities.insert(velocities.end(), other.velocities.begin(), other.velocities.end());
}

ParticleSet ParticleSet::select(const std::vector<std::size_t>& keep) const {
  ParticleSet out;
  out.box = box;
  out.time = time;
  out.reserve(keep.size());
  for (std::size_t i : keep)
    out.push_back(ids[i], masses[i], positions[i], velocities[i]);
  return out;
}

double ParticleSet::total_mass() const {
  double sum = 0.0;
  for (double m : masses) sum += m;
  return sum;
}

void ParticleSet::wrap_positions() {
  for (auto& p : positions) p = box.wrap(p);
}

void ParticleSet::check_invariants() const {
  std::unordered_set<uint64_t> seen;
  seen.reserve(size());
  for (std::size_t i = 0; i < size(); ++i) {
    if (!(masses[i] > 0.0))
      throw std::invalid_argument("ParticleSet: non-positive mass");
    if (!seen.insert(ids[i]).second)
      throw std::invalid_argument("ParticleSet: duplicate id");
    if (box.periodic) {
      const Vec3& p = positions[i];
      if (p.x < 0.0 || p.x >= box.length || p.y < 0.0 || p.y >= box.length ||
          p.z < 0.0 || p.z >= box.length)
        throw std::invalid_argument("ParticleSet: position outside periodic box");
    }
  }
}

namespace {

constexpr char kSnapshotMagic[4] = {'S', 'N', 'B', 'K'};
constexpr uint32_t kSnapshotVersion = 1;

template <typename T>
void put(std::ostream& os, T v) {
  // Little-endian on-disk layout; this code assumes a little-endian host.
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("snapshot: truncated stream");
  return v;
}

}  // namespace

void write_snapshot(const ParticleSet& ps, std::ostream& os) {
  os.write(kSnapshotMagic, 4);
  put<uint32_t>(os, kSnapshotVersion);
  put<uint64_t>(os, ps.size());
  put<double>(os, ps.box.length);
  put<double>(os, ps.time);
  for (std::size_t i = 0; i < ps.size(); ++i) {
    put<uint64_t>(os, ps.ids[i]);
    put<double>(os, ps.masses[i]);
    for (int a = 0; a < 3; ++a) put<double>(os, ps.positions[i][a]);
    for (int a = 0; a < 3; ++a) put<double>(os, ps.velocities[i][a]);
  }
  if (!os) throw std::runtime_error("snapshot: write failed");
}

void write_snapshot(const ParticleSet& ps, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("snapshot: cannot open " + path);
  write_snapshot(ps, f);
}

ParticleSet read_snapshot(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kSnapshotMagic, 4) != 0)
    throw std::runtime_error("snapshot: bad magic");
  const uint32_t version = get<uint32_t>(is);
  if (version != kSnapshotVersion)
    throw std::runtime_error("snapshot: unsupported version");
  const uint64_t n = get<uint64_t>(is);
  ParticleSet ps;
  ps.box.length = get<double>(is);
  ps.time = get<double>(is);
  ps.reserve(n);
  for (uint64_t i = 0; i < n; ++i) {
    const uint64_t id = get<uint64_t>(is);
    const double mass = get<double>(is);
    Vec3 pos, vel;
    for (int a = 0; a < 3; ++a) pos[a] = get<double>(is);
    for (int a = 0; a < 3; ++a) vel[a] = get<double>(is);
    ps.push_back(id, mass, pos, vel);
  }
  return ps;
}

ParticleSet read_snapshot(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("snapshot: cannot open " + path);
  return read_snapshot(f);
}

ParticleSet read_text_particles(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("text particles: cannot open " + path);
  std::string line;
  ParticleSet ps;
  bool have_header = false;
  uint64_t expected = 0;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    if (!have_header) {
      if (!(ls >> expected >> ps.box.length >> ps.time))
        throw std::runtime_error("text particles: bad header line");
      ps.reserve(expected);
      have_header = true;
      continue;
    }
    uint64_t id;
    double mass;
    Vec3 pos, vel;
    if (!(ls >> id >> mass >> pos.x >> pos.y >> pos.z >> vel.x >> vel.y >> vel.z))
      throw std::runtime_error("text particles: bad particle line");
    ps.push_back(id, mass, pos, vel);
  }
  if (!have_header || ps.size() != expected)
    throw std::runtime_error("text particles: particle count mismatch");
  return ps;
}

}  // namespace tpm
