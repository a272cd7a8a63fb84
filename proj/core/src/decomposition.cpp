#include "treepm/decomposition.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>

namespace tpm {

std::vector<SiteSlab> uniform_slabs(int s, double box_length) {
  std::vector<SiteSlab> slabs(s);
  for (int i = 0; i < s; ++i) {
    slabs[i].site = i;
    slabs[i].lo = box_length * i / s;
    slabs[i].hi = box_length * (i + 1) / s;
  }
  slabs.back().hi = box_length;
  return slabs;
}

int slab_owner(const std::vector<SiteSlab>& slabs, double x) {
  for (std::size_t i = 0; i < slabs.size(); ++i)
    if (slabs[i].contains(x)) return static_cast<int>(i);
  return static_cast<int>(slabs.size()) - 1;  // x == L edge case
}

SampleSet sample_particles(const ParticleSet& particles, double r_samp) {
  if (!(r_samp > 0.0) || r_samp > 1.0)
    throw std::invalid_argument("sample_particles: r_samp must be in (0, 1]");
  const uint64_t stride =
      std::max<uint64_t>(1, static_cast<uint64_t>(std::llround(1.0 / r_samp)));
  std::vector<std::size_t> by_id(particles.size());
  std::iota(by_id.begin(), by_id.end(), 0);
  std::sort(by_id.begin(), by_id.end(), [&](std::size_t a, std::size_t b) {
    return particles.ids[a] < particles.ids[b];
  });
  SampleSet out;
  out.r_samp = r_samp;
  for (std::size_t i = 0; i < by_id.size(); i += stride)
    out.x.push_back(static_cast<float>(particles.positions[by_id[i]].x));
  return out;
}

std::vector<double> balance_targets(const std::vector<double>& t_calc,
                                    double n_total) {
  double inv_sum = 0.0;
  for (double t : t_calc) {
    if (!(t > 0.0))
      throw std::invalid_argument("balance_targets: force times must be positive");
    inv_sum += 1.0 / t;
  }
  std::vector<double> out(t_calc.size());
  for (std::size_t i = 0; i < t_calc.size(); ++i)
    out[i] = n_total * (1.0 / t_calc[i]) / inv_sum;
  return out;
}

BoundaryUpdate update_site_boundaries(const SampleSet& samples,
                                      const std::vector<double>& t_calc,
                                      const std::vector<SiteSlab>& current,
                                      double move_limit, double box_length) {
  if (samples.x.empty())
    throw std::invalid_argument("update_site_boundaries: no samples");
  if (t_calc.size() != current.size())
    throw std::invalid_argument("update_site_boundaries: loads/slabs mismatch");

  BoundaryUpdate out;
  out.slabs = current;

  std::vector<float> xs = samples.x;
  std::sort(xs.begin(), xs.end());
  if (xs.front() == xs.back()) {
    out.degenerate = true;
    return out;
  }

  // Target shares follow the inverse force times weighted by the population
  // each time was measured over (slab counts when available, else the sampled
  // occupancy). Time over population is the per-particle cost, so these
  // shares equalize the times instead of chasing them; with equal
  // populations this reduces to the plain inverse-time rule.
  const int s = static_cast<int>(current.size());
  const std::size_t n = xs.size();
  std::vector<double> weights(s);
  for (int i = 0; i < s; ++i) {
    if (!(t_calc[i] > 0.0))
      throw std::invalid_argument("update_site_boundaries: loads must be positive");
    double population = static_cast<double>(current[i].count);
    if (population <= 0.0)
      for (float x : xs) population += current[i].contains(x) ? 1.0 : 0.0;
    weights[i] = std::max(population, 0.5) / t_calc[i];
  }
  double weight_sum = 0.0;
  for (double w : weights) weight_sum += w;
  std::vector<double> shares(s);
  for (int i = 0; i < s; ++i) shares[i] = weights[i] / weight_sum;
  double prev = 0.0;
  for (int b = 1; b < s; ++b) {
    double cum = 0.0;
    for (int j = 0; j < b; ++j) cum += shares[j];
    const std::size_t rank = std::min<std::size_t>(
        n - 1, static_cast<std::size_t>(std::floor(cum * static_cast<double>(n))));
    double target = static_cast<double>(xs[rank]);
    const double cur = current[b].lo;
    target = std::clamp(target, cur - move_limit, cur + move_limit);
    // Keep slabs ordered and non-empty.
    target = std::clamp(target, prev + 1e-12 * box_length,
                        box_length - 1e-12 * box_length);
    out.slabs[b - 1].hi = target;
    out.slabs[b].lo = target;
    prev = target;
  }
  return out;
}

namespace {

// Most balanced factor triple f0 >= f1 >= f2 with f0*f1*f2 = p.
std::array<int, 3> factor3(int p) {
  std::array<int, 3> best{p, 1, 1};
  for (int a = 1; a * a * a <= p; ++a) {
    if (p % a) continue;
    const int q = p / a;
    for (int b = a; b * b <= q; ++b) {
      if (q % b) continue;
      const int c = q / b;
      if (c < best[0]) best = {c, b, a};
    }
  }
  return best;
}

struct SplitBox {
  std::array<double, 3> lo, hi;
  std::vector<std::size_t> idx;
};

}  // namespace

std::vector<ProcessDomain> multisection_decompose(const ParticleSet& particles,
                                                  const SiteSlab& slab,
                                                  int p_local,
                                                  double box_length) {
  if (p_local < 1)
    throw std::invalid_argument("multisection_decompose: p_local must be >= 1");
  const std::array<int, 3> factors = factor3(p_local);

  SplitBox root;
  root.lo = {slab.lo, 0.0, 0.0};
  root.hi = {slab.hi, box_length, box_length};
  root.idx.resize(particles.size());
  std::iota(root.idx.begin(), root.idx.end(), 0);

  std::vector<SplitBox> level{std::move(root)};
  for (int l = 0; l < 3; ++l) {
    const int f = factors[l];
    if (f == 1) continue;
    std::vector<SplitBox> next;
    next.reserve(level.size() * f);
    for (SplitBox& b : level) {
      int axis = 0;
      double extent = b.hi[0] - b.lo[0];
      for (int a = 1; a < 3; ++a)
        if (b.hi[a] - b.lo[a] > extent) {
          extent = b.hi[a] - b.lo[a];
          axis = a;
        }
      std::sort(b.idx.begin(), b.idx.end(), [&](std::size_t x, std::size_t y) {
        return particles.positions[x][axis] < particles.positions[y][axis];
      });
      const std::size_t n = b.idx.size();
      double plane_prev = b.lo[axis];
      std::size_t cut_prev = 0;
      for (int part = 1; part <= f; ++part) {
        const std::size_t cut =
            static_cast<std::size_t>(std::llround(double(n) * part / f));
        double plane_hi;
        if (part == f) {
          plane_hi = b.hi[axis];
        } else {
          if (cut == 0 || cut >= n)
            throw DomainError(
                "multisection: cannot place split plane (factorization " +
                std::to_string(factors[0]) + "x" + std::to_string(factors[1]) +
                "x" + std::to_string(factors[2]) + ")");
          const double below = particles.positions[b.idx[cut - 1]][axis];
          const double above = particles.positions[b.idx[cut]][axis];
          plane_hi = 0.5 * (below + above);
          // Tied coordinates cannot be separated by an axis plane.
          if (!(above > below) || !(plane_hi > plane_prev) ||
              !(plane_hi < b.hi[axis]))
            throw DomainError(
                "multisection: degenerate split along axis " +
                std::to_string(axis) + " (factorization " +
                std::to_string(factors[0]) + "x" + std::to_string(factors[1]) +
                "x" + std::to_string(factors[2]) + ")");
        }
        SplitBox child;
        child.lo = b.lo;
        child.hi = b.hi;
        child.lo[axis] = plane_prev;
        child.hi[axis] = plane_hi;
        child.idx.assign(b.idx.begin() + cut_prev, b.idx.begin() + cut);
        next.push_back(std::move(child));
        plane_prev = plane_hi;
        cut_prev = cut;
      }
    }
    level = std::move(next);
  }

  std::vector<ProcessDomain> out;
  out.reserve(level.size());
  int rank = 0;
  for (const SplitBox& b : level) {
    ProcessDomain d;
    d.lo = b.lo;
    d.hi = b.hi;
    d.rank = rank++;
    d.count = b.idx.size();
    out.push_back(d);
  }
  return out;
}

MigrantSplit select_migrants(const ParticleSet& particles,
                             const std::vector<SiteSlab>& slabs, int site) {
  const int s = static_cast<int>(slabs.size());
  const SiteSlab& mine = slabs[site];
  const int left = (site + s - 1) % s;
  const int right = (site + 1) % s;
  const double period = slabs.back().hi;
  MigrantSplit out;
  for (std::size_t i = 0; i < particles.size(); ++i) {
    const double x = particles.positions[i].x;
    if (mine.contains(x)) {
      out.stay.push_back(i);
      continue;
    }
    const int owner = slab_owner(slabs, x);
    if (owner == site || s < 2) {
      out.stay.push_back(i);
      continue;
    }
    if (s == 2) {
      // Degenerate ring: the one neighbour sits on both sides; pick the
      // direction of the nearer crossed boundary.
      double d_right = std::fmod(x - mine.hi + period, period);
      double d_left = std::fmod(mine.lo - x + period, period);
      (d_right <= d_left ? out.to_right : out.to_left).push_back(i);
      continue;
    }
    if (owner == left)
      out.to_left.push_back(i);
    else if (owner == right)
      out.to_right.push_back(i);
    else
      throw DomainError("select_migrants: particle moved farther than one slab");
  }
  return out;
}

namespace {

// 1D minimum-image distance from the interval [lo, hi] (dilated slab) to the
// x-extent of a cell.
double interval_dist(double lo, double hi, double cx, double ch, double period,
                     bool periodic) {
  const double center = 0.5 * (lo + hi);
  const double half = 0.5 * (hi - lo);
  return min_image_interval_dist(center, half, cx, ch, period, periodic);
}

struct LetBuilder {
  const OcTree& tree;
  double dlo, dhi;      // requester slab dilated by the group-size cap
  double range;         // walk cutoff R
  double margin;
  double theta;
  LetExport out;

  void visit(int32_t index) {
    const OcTree::Node& n = tree.nodes()[index];
    const Box& box = tree.box();
    const double d =
        interval_dist(dlo, dhi, n.center.x, n.half, box.length, box.periodic);

    // Beyond 1.5 R no accepted cell can reach this content at all (accepted
    // cells span at most R/2 and sit within R of a group).
    if (d > 1.5 * range + margin) return;

    if (d > range + margin) {
      // Never walked directly, but its mass feeds ancestor moments.
      emit_aggregate(n);
      return;
    }
    const double side = 2.0 * n.half;
    const double dc =
        interval_dist(dlo, dhi, n.center.x, 0.0, box.length, box.periodic);
    if (side <= 0.5 * range && theta > 0.0 && side <= theta * dc) {
      // Every admissible group accepts this cell.
      emit_aggregate(n);
      return;
    }
    if (n.leaf || n.aggregate) {
      emit_particles(n);
      emit_residents(index);
      return;
    }
    for (int o = 0; o < 8; ++o)
      if (n.child[o] >= 0) visit(n.child[o]);
    emit_residents(index);
  }

  void emit_aggregate(const OcTree::Node& n) {
    if (n.count == 0 || n.mass <= 0.0) return;
    out.aggregates.push_back({n.key, n.count, n.mass, n.com});
  }

  void emit_particles(const OcTree::Node& n) {
    const ParticleSet& src = tree.source();
    for (int32_t k = 0; k < n.particle_count; ++k) {
      const uint32_t j = tree.particle_order()[n.first_particle + k];
      out.ids.push_back(src.ids[j]);
      out.masses.push_back(src.masses[j]);
      out.positions.push_back(src.positions[j]);
    }
  }

  void emit_residents(int32_t index) {
    if (const auto* res = tree.residents(index))
      for (int32_t a : *res) {
        const TreeAggregate& agg = tree.aggregate_data(a);
        out.aggregates.push_back(agg);
      }
  }
};

}  // namespace

LetExport build_local_essential_tree(const OcTree& tree,
                                     const SiteSlab& requester,
                                     const ForceParams& params, double range,
                                     double margin) {
  if (!(range > 0.0))
    throw std::invalid_argument("build_local_essential_tree: range must be > 0");
  LetBuilder b{tree,
               requester.lo - 0.5 * range,
               requester.hi + 0.5 * range,
               range,
               margin,
               params.theta,
               {}};
  b.visit(0);
  return std::move(b.out);
}

void append_let_particles(const LetExport& let, ParticleSet& out) {
  for (std::size_t i = 0; i < let.particle_count(); ++i)
    out.push_back(let.ids[i], let.masses[i], let.positions[i], Vec3{});
}

std::size_t LetExport::byte_size() const {
  return 16 + 48 * aggregates.size() + 40 * ids.size();
}

std::vector<uint8_t> LetExport::serialize() const {
  std::vector<uint8_t> buf;
  buf.reserve(byte_size());
  auto put = [&buf](const void* p, std::size_t len) {
    const uint8_t* b = static_cast<const uint8_t*>(p);
    buf.insert(buf.end(), b, b + len);
  };
  const uint64_t na = aggregates.size(), np = ids.size();
  put(&na, 8);
  put(&np, 8);
  for (const TreeAggregate& a : aggregates) {
    put(&a.key, 8);
    put(&a.count, 8);
    put(&a.mass, 8);
    put(&a.com.x, 8);
    put(&a.com.y, 8);
    put(&a.com.z, 8);
  }
  for (std::size_t i = 0; i < np; ++i) {
    put(&ids[i], 8);
    put(&masses[i], 8);
    put(&positions[i].x, 8);
    put(&positions[i].y, 8);
    put(&positions[i].z, 8);
  }
  return buf;
}

LetExport LetExport::deserialize(const uint8_t* data, std::size_t len) {
  auto need = [&](std::size_t n, std::size_t at) {
    if (at + n > len) throw std::runtime_error("LetExport: truncated payload");
  };
  std::size_t at = 0;
  auto get = [&](void* p, std::size_t n) {
    need(n, at);
    std::memcpy(p, data + at, n);
    at += n;
  };
  uint64_t na = 0, np = 0;
  get(&na, 8);
  get(&np, 8);
  LetExport out;
  out.aggregates.resize(na);
  for (auto& a : out.aggregates) {
    get(&a.key, 8);
    get(&a.count, 8);
    get(&a.mass, 8);
    get(&a.com.x, 8);
    get(&a.com.y, 8);
    get(&a.com.z, 8);
  }
  out.ids.resize(np);
  out.masses.resize(np);
  out.positions.resize(np);
  for (std::size_t i = 0; i < np; ++i) {
    get(&out.ids[i], 8);
    get(&out.masses[i], 8);
    get(&out.positions[i].x, 8);
    get(&out.positions[i].y, 8);
    get(&out.positions[i].z, 8);
  }
  return out;
}

std::string slab_csv_header() { return "site,lo,hi,count,t_calc"; }

std::string slab_csv_row(const SiteSlab& slab) {
  std::ostringstream os;
  os.precision(12);
  os << slab.site << ',' << slab.lo << ',' << slab.hi << ',' << slab.count
     << ',' << slab.t_calc;
  return os.str();
}

}  // namespace tpm
