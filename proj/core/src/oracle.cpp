#include "skd/oracle.hpp"

#include <algorithm>
#include <cassert>

namespace skd {

FlatStore::FlatStore(const PointSet& pts) : FlatStore(pts.dims()) {
  coords_.reserve(pts.size() * dims_);
  ids_.reserve(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) insert(pts.row(i), pts.id(i));
}

void FlatStore::insert(std::span<const CoordKey> coords, std::uint64_t id) {
  by_id_.emplace(id, ids_.size());
  coords_.insert(coords_.end(), coords.begin(), coords.end());
  ids_.push_back(id);
  seqs_.push_back(next_seq_++);
}

bool FlatStore::contains(std::span<const CoordKey> coords, std::uint64_t id) const {
  auto [lo, hi] = by_id_.equal_range(id);
  for (auto it = lo; it != hi; ++it) {
    if (std::equal(coords.begin(), coords.end(), row(it->second).begin())) return true;
  }
  return false;
}

bool FlatStore::erase(std::span<const CoordKey> coords, std::uint64_t id) {
  auto [lo, hi] = by_id_.equal_range(id);
  auto it = lo;
  for (; it != hi; ++it) {
    if (std::equal(coords.begin(), coords.end(), row(it->second).begin())) break;
  }
  if (it == hi) return false;
  std::size_t victim = it->second;
  by_id_.erase(it);
  std::size_t last = ids_.size() - 1;
  if (victim != last) {
    // Re-home the moved row's index entry before overwriting the slot.
    auto [mlo, mhi] = by_id_.equal_range(ids_[last]);
    for (auto mit = mlo; mit != mhi; ++mit) {
      if (mit->second == last) {
        mit->second = victim;
        break;
      }
    }
    std::copy_n(coords_.begin() + last * dims_, dims_, coords_.begin() + victim * dims_);
    ids_[victim] = ids_[last];
    seqs_[victim] = seqs_[last];
  }
  coords_.resize(last * dims_);
  ids_.pop_back();
  seqs_.pop_back();
  return true;
}

std::vector<Point> scan_range(const FlatStore& store, const RangeQuery& q) {
  std::vector<Point> out;
  for (std::size_t i = 0; i < store.size(); ++i) {
    auto r = store.row(i);
    if (q.contains(r)) out.push_back(Point{{r.begin(), r.end()}, store.id(i)});
  }
  return out;
}

std::vector<std::uint64_t> scan_range_ids(const FlatStore& store, const RangeQuery& q) {
  std::vector<std::uint64_t> out;
  for (std::size_t i = 0; i < store.size(); ++i) {
    if (q.contains(store.row(i))) out.push_back(store.id(i));
  }
  return out;
}

std::vector<Neighbor> scan_knn(const FlatStore& store, std::span<const CoordKey> q,
                               std::size_t k) {
  struct Cand {
    SqDist dist;
    std::uint64_t seq;
    std::uint32_t row;
  };
  std::vector<Cand> cands;
  cands.reserve(store.size());
  for (std::size_t i = 0; i < store.size(); ++i) {
    cands.push_back({sq_distance(store.row(i), q), store.seq(i),
                     static_cast<std::uint32_t>(i)});
  }
  auto less = [](const Cand& a, const Cand& b) {
    return a.dist != b.dist ? a.dist < b.dist : a.seq < b.seq;
  };
  std::size_t kk = std::min(k, cands.size());
  std::partial_sort(cands.begin(), cands.begin() + kk, cands.end(), less);
  std::vector<Neighbor> out;
  out.reserve(kk);
  for (std::size_t i = 0; i < kk; ++i) {
    auto r = store.row(cands[i].row);
    out.push_back(Neighbor{Point{{r.begin(), r.end()}, store.id(cands[i].row)},
                           cands[i].dist});
  }
  return out;
}

BinaryKdTree::BinaryKdTree(const PointSet& pts, std::uint32_t leaf_capacity)
    : dims_(pts.dims()), leaf_capacity_(std::max(1u, leaf_capacity)), pts_(&pts) {
  order_.resize(pts.size());
  for (std::uint32_t i = 0; i < order_.size(); ++i) order_[i] = i;
  if (!pts.empty()) {
    nodes_.reserve(pts.size() / leaf_capacity_ * 2 + 8);
    root_ = build_node(0, static_cast<std::uint32_t>(pts.size()), 0);
  }
}

std::int32_t BinaryKdTree::build_node(std::uint32_t begin, std::uint32_t end,
                                      std::uint32_t depth) {
  std::int32_t me = static_cast<std::int32_t>(nodes_.size());
  nodes_.emplace_back();
  if (end - begin <= leaf_capacity_) {
    nodes_[me].begin = begin;
    nodes_[me].end = end;
    return me;
  }
  std::uint32_t dim = depth % dims_;
  std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     return pts_->row(a)[dim] < pts_->row(b)[dim];
                   });
  CoordKey split = pts_->row(order_[mid])[dim];
  nodes_[me].split = split;
  nodes_[me].dim = dim;
  std::int32_t l = build_node(begin, mid, depth + 1);
  std::int32_t r = build_node(mid, end, depth + 1);
  nodes_[me].left = l;
  nodes_[me].right = r;
  return me;
}

void BinaryKdTree::range_walk(std::int32_t node, const RangeQuery& q,
                              std::vector<std::uint64_t>& out) const {
  const Node& n = nodes_[node];
  if (n.left < 0) {
    for (std::uint32_t i = n.begin; i < n.end; ++i) {
      if (q.contains(pts_->row(order_[i]))) out.push_back(pts_->id(order_[i]));
    }
    return;
  }
  // nth_element leaves equal keys on both sides; descend conservatively.
  if (q.lo[n.dim] <= n.split) range_walk(n.left, q, out);
  if (q.hi[n.dim] >= n.split) range_walk(n.right, q, out);
}

std::vector<std::uint64_t> BinaryKdTree::range_ids(const RangeQuery& q) const {
  std::vector<std::uint64_t> out;
  if (root_ >= 0) range_walk(root_, q, out);
  return out;
}

void BinaryKdTree::knn_walk(std::int32_t node, std::span<const CoordKey> q,
                            std::size_t k,
                            std::vector<std::pair<SqDist, std::uint32_t>>& heap) const {
  const Node& n = nodes_[node];
  if (n.left < 0) {
    for (std::uint32_t i = n.begin; i < n.end; ++i) {
      SqDist d = sq_distance(pts_->row(order_[i]), q);
      if (heap.size() < k) {
        heap.emplace_back(d, order_[i]);
        std::push_heap(heap.begin(), heap.end());
      } else if (d < heap.front().first) {
        std::pop_heap(heap.begin(), heap.end());
        heap.back() = {d, order_[i]};
        std::push_heap(heap.begin(), heap.end());
      }
    }
    return;
  }
  std::int32_t near = q[n.dim] < n.split ? n.left : n.right;
  std::int32_t far = near == n.left ? n.right : n.left;
  knn_walk(near, q, k, heap);
  CoordKey gap = q[n.dim] < n.split ? n.split - q[n.dim] : q[n.dim] - n.split;
  SqDist plane = SqDist{gap} * gap;
  if (heap.size() < k || plane <= heap.front().first) knn_walk(far, q, k, heap);
}

std::vector<Neighbor> BinaryKdTree::knn(std::span<const CoordKey> q,
                                        std::size_t k) const {
  std::vector<std::pair<SqDist, std::uint32_t>> heap;
  if (root_ >= 0 && k > 0) {
    heap.reserve(k + 1);
    knn_walk(root_, q, k, heap);
  }
  std::sort(heap.begin(), heap.end());
  std::vector<Neighbor> out;
  out.reserve(heap.size());
  for (auto& [d, row] : heap) {
    auto r = pts_->row(row);
    out.push_back(Neighbor{Point{{r.begin(), r.end()}, pts_->id(row)}, d});
  }
  return out;
}

}  // namespace skd
