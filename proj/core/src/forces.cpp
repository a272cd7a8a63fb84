#include "treepm/forces.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace tpm {

double short_range_taper(double r, double r_cut) {
  if (r >= r_cut) return 0.0;
  if (r <= 0.0) return 1.0;
  const double x = r / r_cut;
  const double s = x * x * x * (10.0 + x * (-15.0 + 6.0 * x));
  return 1.0 - s;
}

namespace {

struct TargetGroup {
  Vec3 center;
  Vec3 half;
  std::vector<uint32_t> targets;  // indices into the target set
};

// Splits targets over the fixed octant geometry until the box side drops
// below `cap`; used below real leaves and in regions the tree does not
// refine.
void geometric_groups(const ParticleSet& targets, Vec3 center, double half,
                      std::vector<uint32_t> idx, double cap,
                      std::vector<TargetGroup>& out) {
  if (idx.empty()) return;
  if (2.0 * half <= cap) {
    out.push_back({center, {half, half, half}, std::move(idx)});
    return;
  }
  std::array<std::vector<uint32_t>, 8> oct;
  for (uint32_t t : idx) {
    const Vec3& p = targets.positions[t];
    const int o = (p.x >= center.x ? 1 : 0) | (p.y >= center.y ? 2 : 0) |
                  (p.z >= center.z ? 4 : 0);
    oct[o].push_back(t);
  }
  const double qh = 0.5 * half;
  for (int o = 0; o < 8; ++o) {
    if (oct[o].empty()) continue;
    const Vec3 c{center.x + ((o & 1) ? qh : -qh),
                 center.y + ((o & 2) ? qh : -qh),
                 center.z + ((o & 4) ? qh : -qh)};
    geometric_groups(targets, c, qh, std::move(oct[o]), cap, out);
  }
}

// Groups follow the tree cells: a cell qualifies once it holds at most ncrit
// particles (counting imported content, i.e. the full-data population) and
// its side is within the size cap. Both criteria are independent of which
// subset of particles is being evaluated.
void build_groups(const OcTree& tree, const ParticleSet& targets,
                  int32_t node_index, std::vector<uint32_t> idx, int ncrit,
                  double cap, std::vector<TargetGroup>& out) {
  if (idx.empty()) return;
  const OcTree::Node& n = tree.nodes()[node_index];
  const double side = 2.0 * n.half;
  if (side <= cap && n.count <= static_cast<uint64_t>(ncrit)) {
    out.push_back({n.center, {n.half, n.half, n.half}, std::move(idx)});
    return;
  }
  if (n.leaf || n.aggregate) {
    geometric_groups(targets, n.center, n.half, std::move(idx), cap, out);
    return;
  }
  std::array<std::vector<uint32_t>, 8> oct;
  for (uint32_t t : idx) {
    const Vec3& p = targets.positions[t];
    const int o = (p.x >= n.center.x ? 1 : 0) | (p.y >= n.center.y ? 2 : 0) |
                  (p.z >= n.center.z ? 4 : 0);
    oct[o].push_back(t);
  }
  const double qh = 0.5 * n.half;
  for (int o = 0; o < 8; ++o) {
    if (oct[o].empty()) continue;
    if (n.child[o] >= 0) {
      build_groups(tree, targets, n.child[o], std::move(oct[o]), ncrit, cap, out);
    } else {
      const Vec3 c{n.center.x + ((o & 1) ? qh : -qh),
                   n.center.y + ((o & 2) ? qh : -qh),
                   n.center.z + ((o & 4) ? qh : -qh)};
      geometric_groups(targets, c, qh, std::move(oct[o]), cap, out);
    }
  }
}

class Walker {
 public:
  Walker(const OcTree& tree, const ParticleSet& targets,
         const ForceParams& params, double range_limit, ForceResult& result)
      : tree_(tree),
        targets_(targets),
        box_(tree.box()),
        params_(params),
        range_(range_limit),
        eps2_(params.softening * params.softening),
        result_(result) {}

  void run(const TargetGroup& group) {
    group_ = &group;
    visit(0);
  }

 private:
  double weight(double r) const {
    return range_ > 0.0 ? short_range_taper(r, range_) : 1.0;
  }

  void eval_moments(double mass, const Vec3& com) {
    for (uint32_t t : group_->targets) {
      const Vec3 dx = box_.min_image(targets_.positions[t], com);
      const double r2 = dot(dx, dx) + eps2_;
      if (r2 <= 0.0) continue;
      const double r = std::sqrt(dot(dx, dx));
      const double w = weight(r);
      if (w == 0.0) {
        ++result_.interaction_count;
        continue;
      }
      const double f = mass * w / (r2 * std::sqrt(r2));
      result_.accel[t] += f * dx;
      ++result_.interaction_count;
    }
  }

  void eval_leaf_particles(const OcTree::Node& n) {
    const ParticleSet& src = tree_.source();
    for (int32_t k = 0; k < n.particle_count; ++k) {
      const uint32_t j = tree_.particle_order()[n.first_particle + k];
      for (uint32_t t : group_->targets) {
        if (targets_.ids[t] == src.ids[j]) continue;  // self
        const Vec3 dx = box_.min_image(targets_.positions[t], src.positions[j]);
        const double r2 = dot(dx, dx) + eps2_;
        if (r2 <= 0.0) continue;
        const double r = std::sqrt(dot(dx, dx));
        const double w = weight(r);
        ++result_.interaction_count;
        if (w == 0.0) continue;
        const double f = src.masses[j] * w / (r2 * std::sqrt(r2));
        result_.accel[t] += f * dx;
      }
    }
  }

  void visit(int32_t index) {
    const OcTree::Node& n = tree_.nodes()[index];
    const double side = 2.0 * n.half;
    if (range_ > 0.0 &&
        box_box_dist(group_->center, group_->half, n.center, n.half, box_) >
            range_)
      return;
    if (n.aggregate) {
      eval_moments(n.mass, n.com);
      return;
    }
    const double d = box_point_dist(group_->center, group_->half, n.center, box_);
    const bool size_ok = range_ <= 0.0 || side <= 0.5 * range_;
    if (size_ok && side <= params_.theta * d) {
      eval_moments(n.mass, n.com);
      return;
    }
    if (n.leaf) {
      eval_leaf_particles(n);
      eval_residents(index);
      return;
    }
    for (int o = 0; o < 8; ++o)
      if (n.child[o] >= 0) visit(n.child[o]);
    eval_residents(index);
  }

  // Pinned imports cannot be opened; when their host cell is, their moments
  // are used directly.
  void eval_residents(int32_t index) {
    if (const auto* res = tree_.residents(index))
      for (int32_t a : *res) {
        const TreeAggregate& agg = tree_.aggregate_data(a);
        eval_moments(agg.mass, agg.com);
      }
  }

  const OcTree& tree_;
  const ParticleSet& targets_;
  const Box& box_;
  const ForceParams& params_;
  const double range_;
  const double eps2_;
  ForceResult& result_;
  const TargetGroup* group_ = nullptr;
};

}  // namespace

ForceResult tree_force(const OcTree& tree, const ParticleSet& targets,
                       const ForceParams& params, double range_limit) {
  if (params.theta < 0.0)
    throw std::invalid_argument("tree_force: negative theta");
  if (params.ncrit < 1)
    throw std::invalid_argument("tree_force: ncrit must be >= 1");
  ForceResult result;
  result.accel.assign(targets.size(), Vec3{});
  if (targets.empty()) return result;

  const double cap =
      range_limit > 0.0 ? 0.5 * range_limit : std::numeric_limits<double>::max();
  std::vector<uint32_t> all(targets.size());
  for (uint32_t i = 0; i < targets.size(); ++i) all[i] = i;
  std::vector<TargetGroup> groups;
  build_groups(tree, targets, 0, std::move(all), params.ncrit, cap, groups);

  Walker walker(tree, targets, params, range_limit, result);
  for (const TargetGroup& g : groups) walker.run(g);
  return result;
}

std::vector<Vec3> direct_force_oracle(const ParticleSet& particles,
                                      double softening, double range_limit,
                                      std::size_t cap) {
  if (particles.size() > cap)
    throw std::invalid_argument("direct_force_oracle: set exceeds the O(N^2) cap");
  const double eps2 = softening * softening;
  std::vector<Vec3> accel(particles.size());
  for (std::size_t i = 0; i < particles.size(); ++i) {
    for (std::size_t j = 0; j < particles.size(); ++j) {
      if (i == j) continue;
      const Vec3 dx =
          particles.box.min_image(particles.positions[i], particles.positions[j]);
      const double d2 = dot(dx, dx);
      if (range_limit > 0.0 && d2 > range_limit * range_limit) continue;
      const double r2 = d2 + eps2;
      if (r2 <= 0.0) continue;
      accel[i] += particles.masses[j] / (r2 * std::sqrt(r2)) * dx;
    }
  }
  return accel;
}

double direct_potential(const ParticleSet& particles, double softening) {
  const double eps2 = softening * softening;
  double pe = 0.0;
  for (std::size_t i = 0; i < particles.size(); ++i)
    for (std::size_t j = i + 1; j < particles.size(); ++j) {
      const Vec3 dx =
          particles.box.min_image(particles.positions[i], particles.positions[j]);
      pe -= particles.masses[i] * particles.masses[j] /
            std::sqrt(dot(dx, dx) + eps2);
    }
  return pe;
}

double kinetic_energy(const ParticleSet& particles) {
  double ke = 0.0;
  for (std::size_t i = 0; i < particles.size(); ++i)
    ke += 0.5 * particles.masses[i] * dot(particles.velocities[i], particles.velocities[i]);
  return ke;
}

}  // namespace tpm
