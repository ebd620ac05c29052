#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <vector>

#include "skd/build.hpp"
#include "skd/node.hpp"
#include "skd/types.hpp"

namespace skd {

struct TreeStats {
  std::uint64_t points = 0;
  std::uint64_t leaf_count = 0;
  std::uint64_t inner_count = 0;
  std::uint64_t height = 0;  // levels including the leaf level; empty tree = 0
  std::uint64_t light = 0;
  std::uint64_t heavy = 0;
  std::uint64_t outlier = 0;
  std::uint64_t n64 = 0;
  std::uint64_t n32 = 0;
  std::uint64_t n16 = 0;
  double avg_leaf_occupancy = 0;
};

// The slicing kd-tree. Single writer during updates; arbitrary concurrent
// readers otherwise.
class SkdTree {
 public:
  SkdTree() = default;
  ~SkdTree() { destroy_subtree(root_); }
  SkdTree(SkdTree&& o) noexcept { *this = std::move(o); }
  SkdTree& operator=(SkdTree&& o) noexcept;
  SkdTree(const SkdTree&) = delete;
  SkdTree& operator=(const SkdTree&) = delete;

  const Schema& schema() const noexcept { return schema_; }
  const BuildConfig& config() const noexcept { return cfg_; }
  std::uint64_t size() const noexcept { return count_; }
  bool empty() const noexcept { return count_ == 0; }
  std::uint64_t leaf_count() const noexcept { return leaf_count_; }
  // Root handle for read-only structural introspection.
  NodeRef root() const noexcept { return root_; }

  SimdMode simd_mode() const noexcept { return cfg_.simd; }
  void set_simd_mode(SimdMode m) noexcept { cfg_.simd = m; }
  bool dim_skip() const noexcept { return cfg_.dim_skip; }
  void set_dim_skip(bool v) noexcept { cfg_.dim_skip = v; }

  // Exact points inside the closed box, breadth-first.
  std::vector<Point> range_query(const RangeQuery& q, QueryCounters* counters = nullptr) const;
  // Same query, ids only (skips materializing coordinates).
  std::vector<std::uint64_t> range_query_ids(const RangeQuery& q,
                                             QueryCounters* counters = nullptr) const;

  // The k nearest points by squared Euclidean distance, ascending; ties at
  // the k-th position keep the earliest-discovered point. Returns fewer than
  // k entries iff the tree holds fewer than k points.
  std::vector<Neighbor> knn(std::span<const CoordKey> q, std::size_t k,
                            QueryCounters* counters = nullptr) const;
  std::vector<Neighbor> knn(std::initializer_list<CoordKey> q, std::size_t k,
                            QueryCounters* counters = nullptr) const {
    return knn(std::span<const CoordKey>(q.begin(), q.size()), k, counters);
  }

  InsertOutcome insert(const Point& p) { return insert(p.coords, p.id); }
  InsertOutcome insert(std::span<const CoordKey> coords, std::uint64_t id);
  InsertOutcome insert(std::initializer_list<CoordKey> coords, std::uint64_t id) {
    return insert(std::span<const CoordKey>(coords.begin(), coords.size()), id);
  }
  EraseOutcome erase(const Point& p) { return erase(p.coords, p.id); }
  EraseOutcome erase(std::span<const CoordKey> coords, std::uint64_t id);
  EraseOutcome erase(std::initializer_list<CoordKey> coords, std::uint64_t id) {
    return erase(std::span<const CoordKey>(coords.begin(), coords.size()), id);
  }

  LeafThresholds thresholds() const noexcept {
    return compute_thresholds(count_, leaf_count_, schema_.leaf_capacity);
  }
  TreeStats stats() const;

  // Walks the whole tree and throws std::logic_error on the first violated
  // structural invariant. Test and diagnostic hook.
  void check_structure() const;

 private:
  friend SkdTree build(PointSet, const BuildConfig&);

  struct PathEntry {
    InnerNode* node;
    unsigned child;
  };

  enum class SplitResult : std::uint8_t { Failed, SplitParent, Rebuilt };

  LeafNode* descend(std::span<const CoordKey> coords, std::vector<PathEntry>& path) const;
  SplitResult split_leaf(LeafNode* leaf, std::vector<PathEntry>& path);
  bool split_at_parent(LeafNode* leaf, InnerNode* parent, unsigned child_slot);
  bool rebuild_at_ancestor(InnerNode* node, unsigned child_slot, std::uint32_t dim_pos);
  void full_rebuild();
  void classify_leaf(LeafNode* leaf) noexcept;
  void unlink_empty_leaf(std::vector<PathEntry>& path);
  void collect_points(NodeRef n, PointSet& out) const;
  std::uint32_t dim_cycle_pos(std::uint8_t dim) const noexcept;

  Schema schema_;
  BuildConfig cfg_;
  NodeRef root_{};
  std::uint64_t count_ = 0;
  std::uint64_t leaf_count_ = 0;
  std::mt19937_64 rng_{0x5eed};
};

}  // namespace skd
