#include "treepm/octree.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tpm {

namespace {

int key_depth(uint64_t key) {
  int d = 0;
  while (key > 1) {
    key >>= 3;
    ++d;
  }
  return d;
}

// Octant digit of `key` at tree depth `depth` (0-based from the root).
int key_octant_at(uint64_t key, int depth, int total_depth) {
  return static_cast<int>((key >> (3 * (total_depth - 1 - depth))) & 0x7);
}

}  // namespace

OcTree OcTree::build(const ParticleSet& source, int n_leaf) {
  return build_merged(source, {}, n_leaf);
}

OcTree OcTree::build_merged(const ParticleSet& source,
                            const std::vector<TreeAggregate>& aggregates,
                            int n_leaf) {
  if (source.empty() && aggregates.empty())
    throw std::invalid_argument("OcTree: cannot build over an empty set");
  if (n_leaf < 1) throw std::invalid_argument("OcTree: n_leaf must be >= 1");
  OcTree tree;
  tree.source_ = &source;
  tree.aggregates_ = aggregates;
  tree.n_leaf_ = n_leaf;
  tree.order_.reserve(source.size());

  std::vector<uint32_t> pidx(source.size());
  for (uint32_t i = 0; i < source.size(); ++i) pidx[i] = i;
  std::vector<uint32_t> aidx(aggregates.size());
  for (uint32_t i = 0; i < aggregates.size(); ++i) aidx[i] = i;

  const double half = 0.5 * source.box.length;
  tree.build_node(1, {half, half, half}, half, 0, pidx, aidx);
  return tree;
}

int32_t OcTree::build_node(uint64_t key, const Vec3& center, double half,
                           int depth, std::vector<uint32_t>& pidx,
                           std::vector<uint32_t>& aidx) {
  const int32_t index = static_cast<int32_t>(nodes_.size());
  nodes_.emplace_back();
  {
    Node& n = nodes_.back();
    n.key = key;
    n.center = center;
    n.half = half;
  }

  // Aggregates pinned at this very cell cannot be subdivided further.
  std::vector<uint32_t> sub_aggs;
  std::vector<uint32_t> here_aggs;
  for (uint32_t a : aidx)
    (aggregates_[a].key == key ? here_aggs : sub_aggs).push_back(a);

  uint64_t count = pidx.size();
  for (uint32_t a : aidx) count += aggregates_[a].count;

  const bool can_split =
      depth < kMaxDepth &&
      (!sub_aggs.empty() ||
       (!pidx.empty() && count > static_cast<uint64_t>(n_leaf_)));

  if (pidx.empty() && sub_aggs.empty()) {
    // Pure imported content: a single merged pseudo-cell.
    Node& n = nodes_[index];
    n.aggregate = true;
    n.count = count;
    for (uint32_t a : here_aggs) {
      const TreeAggregate& agg = aggregates_[a];
      n.com += agg.mass * agg.com;
      n.mass += agg.mass;
    }
    if (n.mass > 0.0) n.com *= 1.0 / n.mass;
    return index;
  }

  if (!can_split) {
    Node& n = nodes_[index];
    n.leaf = true;
    n.count = count;
    n.first_particle = static_cast<int32_t>(order_.size());
    n.particle_count = static_cast<int32_t>(pidx.size());
    for (uint32_t p : pidx) {
      order_.push_back(p);
      n.mass += source_->masses[p];
      n.com += source_->masses[p] * source_->positions[p];
    }
    // At the depth cap, deeper-keyed aggregates fold in as residents.
    here_aggs.insert(here_aggs.end(), sub_aggs.begin(), sub_aggs.end());
    for (uint32_t a : here_aggs) {
      const TreeAggregate& agg = aggregates_[a];
      n.mass += agg.mass;
      n.com += agg.mass * agg.com;
      residents_[index].push_back(static_cast<int32_t>(a));
    }
    if (n.mass > 0.0) n.com *= 1.0 / n.mass;
    return index;
  }

  // Partition content into the eight fixed octants.
  std::array<std::vector<uint32_t>, 8> oct_p, oct_a;
  for (uint32_t p : pidx) {
    const Vec3& pos = source_->positions[p];
    const int oct = (pos.x >= center.x ? 1 : 0) | (pos.y >= center.y ? 2 : 0) |
                    (pos.z >= center.z ? 4 : 0);
    oct_p[oct].push_back(p);
  }
  const int child_depth_total = key_depth(key) + 1;
  for (uint32_t a : sub_aggs) {
    const int total = key_depth(aggregates_[a].key);
    if (total < child_depth_total)
      throw std::invalid_argument("OcTree: aggregate key above its cell");
    oct_a[key_octant_at(aggregates_[a].key, depth, total)].push_back(a);
  }
  pidx.clear();
  pidx.shrink_to_fit();

  const double qh = 0.5 * half;
  for (int oct = 0; oct < 8; ++oct) {
    if (oct_p[oct].empty() && oct_a[oct].empty()) continue;
    const Vec3 ccenter{center.x + ((oct & 1) ? qh : -qh),
                       center.y + ((oct & 2) ? qh : -qh),
                       center.z + ((oct & 4) ? qh : -qh)};
    const int32_t c = build_node((key << 3) | oct, ccenter, qh, depth + 1,
                                 oct_p[oct], oct_a[oct]);
    nodes_[index].child[oct] = c;
    Node& n = nodes_[index];
    n.mass += nodes_[c].mass;
    n.com += nodes_[c].mass * nodes_[c].com;
    n.count += nodes_[c].count;
  }
  for (uint32_t a : here_aggs) {
    const TreeAggregate& agg = aggregates_[a];
    Node& n = nodes_[index];
    n.mass += agg.mass;
    n.com += agg.mass * agg.com;
    n.count += agg.count;
    residents_[index].push_back(static_cast<int32_t>(a));
  }
  Node& n = nodes_[index];
  if (n.mass > 0.0) n.com *= 1.0 / n.mass;
  return index;
}

const std::vector<int32_t>* OcTree::residents(int32_t node) const {
  auto it = residents_.find(node);
  return it == residents_.end() ? nullptr : &it->second;
}

double OcTree::recompute_mass(int32_t index, double& max_rel) const {
  const Node& n = nodes_[index];
  double sum = 0.0;
  if (n.leaf || n.aggregate) {
    for (int32_t i = 0; i < n.particle_count; ++i)
      sum += source_->masses[order_[n.first_particle + i]];
    if (n.aggregate)
      sum = n.mass;  // imported moments are their own ground truth
  } else {
    for (int oct = 0; oct < 8; ++oct)
      if (n.child[oct] >= 0) sum += recompute_mass(n.child[oct], max_rel);
  }
  if (const auto* res = residents(index))
    for (int32_t a : *res) sum += aggregates_[a].mass;
  if (n.mass > 0.0)
    max_rel = std::max(max_rel, std::abs(sum - n.mass) / n.mass);
  return sum;
}

double OcTree::max_mass_error() const {
  double max_rel = 0.0;
  recompute_mass(0, max_rel);
  return max_rel;
}

double min_image_interval_dist(double center_a, double half_a, double center_b,
                               double half_b, double period, bool periodic) {
  double d = center_a - center_b;
  if (periodic) {
    d = std::fmod(d, period);
    if (d > 0.5 * period) d -= period;
    if (d < -0.5 * period) d += period;
  }
  return std::max(0.0, std::abs(d) - half_a - half_b);
}

double box_point_dist(const Vec3& gc, const Vec3& gh, const Vec3& p,
                      const Box& box) {
  double s = 0.0;
  for (int a = 0; a < 3; ++a) {
    const double d =
        min_image_interval_dist(gc[a], gh[a], p[a], 0.0, box.length, box.periodic);
    s += d * d;
  }
  return std::sqrt(s);
}

double box_box_dist(const Vec3& gc, const Vec3& gh, const Vec3& cc, double ch,
                    const Box& box) {
  double s = 0.0;
  for (int a = 0; a < 3; ++a) {
    const double d =
        min_image_interval_dist(gc[a], gh[a], cc[a], ch, box.length, box.periodic);
    s += d * d;
  }
  return std::sqrt(s);
}

}  // namespace tpm
