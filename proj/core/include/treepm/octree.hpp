#pragma once

#include <array>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "treepm/particles.hpp"

namespace tpm {

// Imported pseudo-cell: the aggregated moments of a remote subtree, pinned to
// a fixed cell of the global octant geometry by its path key.
struct TreeAggregate {
  uint64_t key = 1;     // 1 at the root, (parent << 3) | octant per level
  uint64_t count = 0;   // particles represented
  double mass = 0.0;
  Vec3 com;
};

// Box-anchored Barnes-Hut octree. Cells are the fixed octants of the
// simulation box, so two trees built over different subsets of the same
// particle distribution agree on cell geometry; remote fragments (particles
// plus aggregates) merge into the same cell structure the full-data tree
// would have.
class OcTree {
 public:
  struct Node {
    uint64_t key = 1;
    Vec3 center;
    double half = 0.0;        // half side length
    double mass = 0.0;
    Vec3 com;
    uint64_t count = 0;
    std::array<int32_t, 8> child{{-1, -1, -1, -1, -1, -1, -1, -1}};
    int32_t first_particle = -1;  // leaves: offset into particle_order()
    int32_t particle_count = 0;
    bool leaf = false;
    bool aggregate = false;   // imported moments only, cannot be opened
  };

  static constexpr int kMaxDepth = 20;

  // Builds over all particles of `source`; `source` must outlive the tree.
  // Deterministic given the input order. Throws on an empty set.
  static OcTree build(const ParticleSet& source, int n_leaf);
  // As build(), with remote aggregates grafted at their keys. Aggregate keys
  // must not collide with local particle content.
  static OcTree build_merged(const ParticleSet& source,
                             const std::vector<TreeAggregate>& aggregates,
                             int n_leaf);

  const std::vector<Node>& nodes() const { return nodes_; }
  const Node& root() const { return nodes_.front(); }
  // Leaf particle ranges index into this permutation of source indices.
  const std::vector<uint32_t>& particle_order() const { return order_; }
  const ParticleSet& source() const { return *source_; }
  const Box& box() const { return source_->box; }
  int n_leaf() const { return n_leaf_; }

  // Residents: aggregates pinned at an internal node's own cell (possible
  // only when both ring neighbours cut their export at the same box). The
  // walk treats them as unconditionally accepted moments.
  const std::vector<int32_t>* residents(int32_t node) const;
  const TreeAggregate& aggregate_data(int32_t index) const {
    return aggregates_[index];
  }

  double side_length(const Node& n) const { return 2.0 * n.half; }

  // Recomputes node mass as the sum over descendant particles and imported
  // aggregates, returning the largest relative deviation from the stored
  // moments (verification hook).
  double max_mass_error() const;

 private:
  OcTree() = default;
  int32_t build_node(uint64_t key, const Vec3& center, double half, int depth,
                     std::vector<uint32_t>& pidx,
                     std::vector<uint32_t>& aidx);
  double recompute_mass(int32_t index, double& max_rel) const;

  const ParticleSet* source_ = nullptr;
  std::vector<TreeAggregate> aggregates_;
  std::vector<Node> nodes_;
  std::vector<uint32_t> order_;
  std::unordered_map<int32_t, std::vector<int32_t>> residents_;
  int n_leaf_ = 10;
};

// Periodic point/box distance helpers used by the walk and the exporter.
// Boxes are (center, half-extent) per axis; all distances fold through the
// minimum image when the box is periodic.
double min_image_interval_dist(double center_a, double half_a, double center_b,
                               double half_b, double period, bool periodic);
// Distance from box (gc, gh) to point p, folded per axis.
double box_point_dist(const Vec3& gc, const Vec3& gh, const Vec3& p,
                      const Box& box);
// Distance between two boxes.
double box_box_dist(const Vec3& gc, const Vec3& gh, const Vec3& cc, double ch,
                    const Box& box);

}  // namespace tpm
