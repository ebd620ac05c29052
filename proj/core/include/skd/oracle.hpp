#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>
#include <unordered_map>
#include <vector>

#include "skd/dataset.hpp"
#include "skd/types.hpp"

namespace skd {

// Brute-force ground truth: flat row storage with delete-by-swap. kNN ties
// break by insertion order (earlier first).
class FlatStore {
 public:
  FlatStore() = default;
  explicit FlatStore(std::uint32_t dims) : dims_(dims) {}
  explicit FlatStore(const PointSet& pts);

  std::uint32_t dims() const noexcept { return dims_; }
  std::size_t size() const noexcept { return ids_.size(); }

  void insert(std::span<const CoordKey> coords, std::uint64_t id);
  void insert(std::initializer_list<CoordKey> coords, std::uint64_t id) {
    insert(std::span<const CoordKey>(coords.begin(), coords.size()), id);
  }
  // Removes the row matching both coordinates and id; false when absent.
  bool erase(std::span<const CoordKey> coords, std::uint64_t id);
  bool erase(std::initializer_list<CoordKey> coords, std::uint64_t id) {
    return erase(std::span<const CoordKey>(coords.begin(), coords.size()), id);
  }
  bool contains(std::span<const CoordKey> coords, std::uint64_t id) const;
  bool contains(std::initializer_list<CoordKey> coords, std::uint64_t id) const {
    return contains(std::span<const CoordKey>(coords.begin(), coords.size()), id);
  }

  std::span<const CoordKey> row(std::size_t i) const noexcept {
    return {coords_.data() + i * dims_, dims_};
  }
  std::uint64_t id(std::size_t i) const noexcept { return ids_[i]; }
  std::uint64_t seq(std::size_t i) const noexcept { return seqs_[i]; }

 private:
  std::uint32_t dims_ = 0;
  std::uint64_t next_seq_ = 0;
  std::vector<CoordKey> coords_;
  std::vector<std::uint64_t> ids_;
  std::vector<std::uint64_t> seqs_;
  std::unordered_multimap<std::uint64_t, std::size_t> by_id_;
};

std::vector<Point> scan_range(const FlatStore& store, const RangeQuery& q);
std::vector<std::uint64_t> scan_range_ids(const FlatStore& store, const RangeQuery& q);
std::vector<Neighbor> scan_knn(const FlatStore& store, std::span<const CoordKey> q,
                               std::size_t k);
inline std::vector<Neighbor> scan_knn(const FlatStore& store,
                                      std::initializer_list<CoordKey> q, std::size_t k) {
  return scan_knn(store, std::span<const CoordKey>(q.begin(), q.size()), k);
}

// Textbook binary kd-tree baseline: exact median splits on depth-cycled
// dimensions, bucket leaves, scalar code throughout. Read-only after build;
// references the point set, which must outlive the tree.
class BinaryKdTree {
 public:
  BinaryKdTree(const PointSet& pts, std::uint32_t leaf_capacity);

  std::vector<std::uint64_t> range_ids(const RangeQuery& q) const;
  std::vector<Neighbor> knn(std::span<const CoordKey> q, std::size_t k) const;
  std::vector<Neighbor> knn(std::initializer_list<CoordKey> q, std::size_t k) const {
    return knn(std::span<const CoordKey>(q.begin(), q.size()), k);
  }

 private:
  struct Node {
    CoordKey split = 0;
    std::uint32_t dim = 0;
    std::int32_t left = -1;   // node index, -1 for none
    std::int32_t right = -1;
    std::uint32_t begin = 0;  // leaf row range when left == right == -1
    std::uint32_t end = 0;
  };

  std::int32_t build_node(std::uint32_t begin, std::uint32_t end, std::uint32_t depth);
  void range_walk(std::int32_t node, const RangeQuery& q,
                  std::vector<std::uint64_t>& out) const;
  void knn_walk(std::int32_t node, std::span<const CoordKey> q, std::size_t k,
                std::vector<std::pair<SqDist, std::uint32_t>>& heap) const;

  std::uint32_t dims_ = 0;
  std::uint32_t leaf_capacity_ = 0;
  std::vector<Node> nodes_;
  std::int32_t root_ = -1;
  std::vector<std::uint32_t> order_;  // row permutation
  const PointSet* pts_ = nullptr;
};

}  // namespace skd
