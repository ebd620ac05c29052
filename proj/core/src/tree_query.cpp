#include <algorithm>
#include <array>
#include <cassert>
#include <queue>
#include <vector>

#include "skd/tree.hpp"

namespace skd {

namespace {

// Breadth-first walk over all nodes overlapping q; fn runs per leaf.
template <typename LeafFn>
void walk_range(NodeRef root, const RangeQuery& q, SimdMode mode,
                QueryCounters* counters, LeafFn&& fn) {
  if (!root) return;
  std::vector<NodeRef> queue{root};
  for (std::size_t head = 0; head < queue.size(); ++head) {
    NodeRef n = queue[head];
    if (n.is_inner()) {
      const InnerNode& in = *n.inner();
      if (counters) ++counters->nodes_visited;
      auto [first, last] =
          locate_children(in, q.lo[in.split_dim], q.hi[in.split_dim], mode);
      for (unsigned c = first; c <= last; ++c) queue.push_back(in.children[c]);
    } else {
      if (counters) ++counters->leaves_scanned;
      fn(*n.leaf());
    }
  }
}

}  // namespace

std::vector<Point> SkdTree::range_query(const RangeQuery& q,
                                        QueryCounters* counters) const {
  assert(q.dims() == schema_.dims);
  std::vector<Point> res;
  std::vector<std::uint32_t> slots;
  walk_range(root_, q, cfg_.simd, counters, [&](const LeafNode& leaf) {
    slots.clear();
    leaf_collect_range(leaf, q, cfg_.dim_skip, cfg_.simd, slots, counters);
    for (std::uint32_t s : slots) res.push_back(leaf.point(s));
  });
  return res;
}

std::vector<std::uint64_t> SkdTree::range_query_ids(const RangeQuery& q,
                                                    QueryCounters* counters) const {
  assert(q.dims() == schema_.dims);
  std::vector<std::uint64_t> res;
  std::vector<std::uint32_t> slots;
  walk_range(root_, q, cfg_.simd, counters, [&](const LeafNode& leaf) {
    slots.clear();
    leaf_collect_range(leaf, q, cfg_.dim_skip, cfg_.simd, slots, counters);
    for (std::uint32_t s : slots) res.push_back(leaf.ids[s]);
  });
  return res;
}

namespace {

enum class EntryKind : std::uint8_t { Node, GroupLeft, GroupRight };

// Priority-queue element: either one node or a contiguous run of sibling
// children on one side of the query's containing child. delta holds, per
// dimension, a proven lower bound on |q[d] - p[d]| for every point p below
// the entry; dist is the squared sum of those gaps.
struct HeapEntry {
  SqDist dist = 0;
  NodeRef node{};
  const InnerNode* owner = nullptr;
  unsigned lo = 0;  // inclusive child range, groups only
  unsigned hi = 0;
  EntryKind kind = EntryKind::Node;
  std::array<CoordKey, kMaxDims> delta{};
};

struct EntryOrder {
  bool operator()(const HeapEntry& a, const HeapEntry& b) const noexcept {
    return a.dist > b.dist;  // min-heap on dist
  }
};

SqDist delta_dist(const std::array<CoordKey, kMaxDims>& delta, std::uint32_t dims) noexcept {
  SqDist acc = 0;
  bool ovf = false;
  for (std::uint32_t d = 0; d < dims; ++d) {
    acc = sq_dist_add(acc, SqDist{delta[d]} * delta[d], ovf);
  }
  return acc;
}

struct ResultOrder {
  bool operator()(const Neighbor& a, const Neighbor& b) const noexcept {
    return a.dist < b.dist;  // max-heap on dist
  }
};

}  // namespace

std::vector<Neighbor> SkdTree::knn(std::span<const CoordKey> q, std::size_t k,
                                   QueryCounters* counters) const {
  assert(q.size() == schema_.dims);
  std::vector<Neighbor> best;
  if (k == 0 || !root_) return best;
  const SimdMode mode = cfg_.simd;
  const std::uint32_t dims = schema_.dims;

  best.reserve(std::min<std::size_t>(k, count_));
  ResultOrder worse;

  std::priority_queue<HeapEntry, std::vector<HeapEntry>, EntryOrder> pq;
  {
    HeapEntry root;
    root.node = root_;
    pq.push(root);
  }

  std::vector<SqDist> dists;
  while (!pq.empty()) {
    HeapEntry e = pq.top();
    pq.pop();
    if (best.size() == k && e.dist >= best.front().dist) break;

    if (e.kind == EntryKind::Node && e.node.is_leaf()) {
      const LeafNode& leaf = *e.node.leaf();
      if (counters) {
        ++counters->leaves_scanned;
        counters->points_compared += leaf.slotuse;
      }
      dists.resize(leaf.slotuse);
      bool ovf = false;
      leaf_sq_distances(leaf, q, mode, dists.data(), ovf);
      for (std::uint32_t s = 0; s < leaf.slotuse; ++s) {
        if (best.size() < k) {
          best.push_back({leaf.point(s), dists[s]});
          std::push_heap(best.begin(), best.end(), worse);
        } else if (dists[s] < best.front().dist) {
          std::pop_heap(best.begin(), best.end(), worse);
          best.back() = {leaf.point(s), dists[s]};
          std::push_heap(best.begin(), best.end(), worse);
        }
      }
      continue;
    }

    if (e.kind == EntryKind::Node) {
      const InnerNode& in = *e.node.inner();
      if (counters) ++counters->nodes_visited;
      const std::uint32_t d = in.split_dim;
      const CoordKey qd = q[d];
      unsigned c = locate_child(in, qd, mode);

      HeapEntry child = e;
      child.node = in.children[c];
      child.delta[d] = 0;
      child.dist = delta_dist(child.delta, dims);
      pq.push(child);

      if (c > 0) {
        HeapEntry g = e;
        g.kind = EntryKind::GroupLeft;
        g.owner = &in;
        g.node = NodeRef{};
        g.lo = 0;
        g.hi = c - 1;
        g.delta[d] = qd - in.effective_splitter(c - 1);
        g.dist = delta_dist(g.delta, dims);
        pq.push(g);
      }
      if (c < in.slotuse) {
        HeapEntry g = e;
        g.kind = EntryKind::GroupRight;
        g.owner = &in;
        g.node = NodeRef{};
        g.lo = c + 1;
        g.hi = in.slotuse;
        g.delta[d] = in.effective_splitter(c) - qd;
        g.dist = delta_dist(g.delta, dims);
        pq.push(g);
      }
      continue;
    }

    // Group: peel the member adjacent to the query, reissue the rest with
    // the gap advanced to the next splitter boundary.
    const InnerNode& in = *e.owner;
    const std::uint32_t d = in.split_dim;
    const CoordKey qd = q[d];
    unsigned front = e.kind == EntryKind::GroupLeft ? e.hi : e.lo;

    HeapEntry member = e;
    member.kind = EntryKind::Node;
    member.node = in.children[front];
    member.owner = nullptr;
    pq.push(member);  // same delta and dist: the gap is exact for the front

    if (e.lo < e.hi) {
      HeapEntry rest = e;
      if (e.kind == EntryKind::GroupLeft) {
        rest.hi = e.hi - 1;
        rest.delta[d] = qd - in.effective_splitter(rest.hi);
      } else {
        rest.lo = e.lo + 1;
        rest.delta[d] = in.effective_splitter(rest.lo - 1) - qd;
      }
      rest.dist = delta_dist(rest.delta, dims);
      pq.push(rest);
    }
  }

  std::sort(best.begin(), best.end(),
            [](const Neighbor& a, const Neighbor& b) { return a.dist < b.dist; });
  return best;
}

}  // namespace skd
