#include <algorithm>
#include <cassert>
#include <stdexcept>
#include <vector>

#include "skd/tree.hpp"

namespace skd {

namespace {

std::uint64_t count_leaves(NodeRef n) noexcept {
  if (!n) return 0;
  if (n.is_leaf()) return 1;
  std::uint64_t total = 0;
  const InnerNode* in = n.inner();
  for (unsigned i = 0; i <= in->slotuse; ++i) total += count_leaves(in->children[i]);
  return total;
}

}  // namespace

SkdTree& SkdTree::operator=(SkdTree&& o) noexcept {
  if (this != &o) {
    destroy_subtree(root_);
    schema_ = std::move(o.schema_);
    cfg_ = o.cfg_;
    root_ = o.root_;
    count_ = o.count_;
    leaf_count_ = o.leaf_count_;
    rng_ = o.rng_;
    o.root_ = NodeRef{};
    o.count_ = 0;
    o.leaf_count_ = 0;
  }
  return *this;
}

LeafNode* SkdTree::descend(std::span<const CoordKey> coords,
                           std::vector<PathEntry>& path) const {
  NodeRef n = root_;
  while (n.is_inner()) {
    InnerNode* in = n.inner();
    unsigned c = locate_child(*in, coords[in->split_dim], cfg_.simd);
    path.push_back({in, c});
    n = in->children[c];
  }
  return n.leaf();
}

void SkdTree::classify_leaf(LeafNode* leaf) noexcept {
  LeafThresholds th = thresholds();
  LeafType next = leaf->slotuse > th.outlier  ? LeafType::Outlier
                  : leaf->slotuse > th.heavy ? LeafType::Heavy
                                             : LeafType::Light;
  if (next != LeafType::Outlier) {
    leaf->promo = 0;
  } else if (leaf->promo == 0) {
    leaf->promo = 1;
  }
  leaf->type = next;
}

std::uint32_t SkdTree::dim_cycle_pos(std::uint8_t dim) const noexcept {
  for (std::uint32_t i = 0; i < schema_.dim_order.size(); ++i) {
    if (schema_.dim_order[i] == dim) return i;
  }
  return 0;
}

void SkdTree::collect_points(NodeRef n, PointSet& out) const {
  if (!n) return;
  if (n.is_inner()) {
    const InnerNode* in = n.inner();
    for (unsigned i = 0; i <= in->slotuse; ++i) collect_points(in->children[i], out);
    return;
  }
  const LeafNode& leaf = *n.leaf();
  std::vector<CoordKey> row(leaf.dims);
  for (std::uint32_t s = 0; s < leaf.slotuse; ++s) {
    for (std::uint32_t d = 0; d < leaf.dims; ++d) row[d] = leaf.coord(s, d);
    out.push_row(row, leaf.ids[s]);
  }
}

InsertOutcome SkdTree::insert(std::span<const CoordKey> coords, std::uint64_t id) {
  assert(schema_.dims != 0 && coords.size() == schema_.dims);
  if (!root_) {
    auto* leaf = new LeafNode(schema_.dims);
    leaf->reserve_lanes(kBlockWidth);
    leaf->append(coords, id);
    root_ = NodeRef::from(leaf);
    count_ = 1;
    leaf_count_ = 1;
    classify_leaf(leaf);
    return InsertOutcome::Inserted;
  }

  std::vector<PathEntry> path;
  LeafNode* leaf = descend(coords, path);
  if (leaf_find_exact(*leaf, coords, id, cfg_.simd) != leaf->slotuse) {
    return InsertOutcome::Duplicate;
  }
  leaf->append(coords, id);
  ++count_;
  LeafThresholds th = thresholds();

  if (leaf->type == LeafType::Outlier) {
    // Outliers re-attempt a split only at doubling occupancy rungs.
    std::uint64_t bar = th.outlier << std::min<unsigned>(leaf->promo, 32);
    if (leaf->slotuse < bar) return InsertOutcome::Inserted;
    std::uint8_t promo = leaf->promo;
    switch (split_leaf(leaf, path)) {
      case SplitResult::SplitParent: return InsertOutcome::InsertedWithSplit;
      case SplitResult::Rebuilt: return InsertOutcome::InsertedWithRebuild;
      case SplitResult::Failed: break;
    }
    leaf->promo = static_cast<std::uint8_t>(std::min<unsigned>(promo + 1, 63));
    return InsertOutcome::InsertedOutlierGrown;
  }

  if (leaf->slotuse > th.outlier) {
    switch (split_leaf(leaf, path)) {
      case SplitResult::SplitParent: return InsertOutcome::InsertedWithSplit;
      case SplitResult::Rebuilt: return InsertOutcome::InsertedWithRebuild;
      case SplitResult::Failed: break;
    }
    leaf->type = LeafType::Outlier;
    leaf->promo = 1;
    return InsertOutcome::InsertedOutlierGrown;
  }

  classify_leaf(leaf);
  return InsertOutcome::Inserted;
}

SkdTree::SplitResult SkdTree::split_leaf(LeafNode* leaf, std::vector<PathEntry>& path) {
  if (!path.empty()) {
    InnerNode* parent = path.back().node;
    if (parent->slotuse < parent->max_splitters()) {
      return split_at_parent(leaf, parent, path.back().child) ? SplitResult::SplitParent
                                                              : SplitResult::Failed;
    }
    // The parent is full: one rebuild attempt at the nearest ancestor that
    // can still take a splitter.
    for (std::size_t i = path.size() - 1; i-- > 0;) {
      InnerNode* anc = path[i].node;
      if (anc->slotuse < anc->max_splitters()) {
        std::uint32_t dim_pos = dim_cycle_pos(anc->split_dim) + 1;
        return rebuild_at_ancestor(anc, path[i].child, dim_pos) ? SplitResult::Rebuilt
                                                                : SplitResult::Failed;
      }
    }
  }
  full_rebuild();
  return SplitResult::Rebuilt;
}

namespace {

// Exact upper median of vals quantized at shift, adjusted to the tightest
// valid splitter when the median's effective value would leave a side empty.
// Returns false when every value shares one code.
bool pick_splitter(std::vector<CoordKey>& vals, std::uint8_t shift, CoordKey mn,
                   CoordKey mx, std::uint64_t& code_out) {
  if ((mn >> shift) == (mx >> shift)) return false;
  std::nth_element(vals.begin(), vals.begin() + vals.size() / 2, vals.end());
  CoordKey med = vals[vals.size() / 2];
  std::uint64_t code = quantize(med, shift);
  CoordKey eff = effective_value(code, shift);
  if (!(eff > mn && eff <= mx)) {
    CoordKey best = 0;
    bool found = false;
    std::uint64_t min_code = quantize(mn, shift);
    for (CoordKey v : vals) {
      if (quantize(v, shift) > min_code && (!found || v < best)) {
        best = v;
        found = true;
      }
    }
    if (!found) return false;
    code = quantize(best, shift);
  }
  code_out = code;
  return true;
}

}  // namespace

bool SkdTree::split_at_parent(LeafNode* leaf, InnerNode* parent, unsigned child_slot) {
  const std::uint32_t d = parent->split_dim;
  const std::uint8_t s = parent->shift;
  const CoordKey* col = leaf->column(d);

  std::vector<CoordKey> vals(col, col + leaf->slotuse);
  std::uint64_t code;
  if (!pick_splitter(vals, s, leaf->box.lo[d], leaf->box.hi[d], code)) return false;
  if (code > layout_max_code(parent->layout)) return false;  // beyond stored width
  CoordKey eff = effective_value(code, static_cast<std::uint8_t>(s));

  std::vector<std::uint32_t> keep, move;
  keep.reserve(leaf->slotuse);
  for (std::uint32_t i = 0; i < leaf->slotuse; ++i) {
    (col[i] < eff ? keep : move).push_back(i);
  }
  assert(!keep.empty() && !move.empty());

  auto* right = new LeafNode(schema_.dims);
  right->reserve_lanes(static_cast<std::uint32_t>(move.size()));
  for (std::uint32_t dd = 0; dd < schema_.dims; ++dd) {
    CoordKey* dst = right->column(dd);
    const CoordKey* src = leaf->column(dd);
    for (std::size_t i = 0; i < move.size(); ++i) dst[i] = src[move[i]];
  }
  for (std::size_t i = 0; i < move.size(); ++i) right->ids[i] = leaf->ids[move[i]];
  right->slotuse = static_cast<std::uint32_t>(move.size());
  right->recompute_box();
  right->repad();

  for (std::uint32_t dd = 0; dd < schema_.dims; ++dd) {
    CoordKey* c2 = leaf->column(dd);
    for (std::size_t i = 0; i < keep.size(); ++i) c2[i] = c2[keep[i]];
  }
  for (std::size_t i = 0; i < keep.size(); ++i) leaf->ids[i] = leaf->ids[keep[i]];
  leaf->slotuse = static_cast<std::uint32_t>(keep.size());
  leaf->recompute_box();
  leaf->repad();

  parent->insert_splitter(child_slot, code);
  parent->children[child_slot] = NodeRef::from(leaf);
  parent->children[child_slot + 1] = NodeRef::from(right);
  ++leaf_count_;
  classify_leaf(leaf);
  classify_leaf(right);
  return true;
}

bool SkdTree::rebuild_at_ancestor(InnerNode* anc, unsigned child_slot,
                                  std::uint32_t dim_pos) {
  NodeRef sub = anc->children[child_slot];
  PointSet pts(schema_.dims);
  collect_points(sub, pts);
  const std::uint32_t d = anc->split_dim;
  const std::uint8_t s = anc->shift;

  std::vector<CoordKey> vals(pts.size());
  CoordKey mn = kMaxCoord, mx = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    vals[i] = pts.row(i)[d];
    mn = std::min(mn, vals[i]);
    mx = std::max(mx, vals[i]);
  }
  std::uint64_t code;
  if (!pick_splitter(vals, s, mn, mx, code)) return false;
  if (code > layout_max_code(anc->layout)) return false;
  CoordKey eff = effective_value(code, s);

  std::vector<std::uint32_t> left, right;
  for (std::uint32_t i = 0; i < pts.size(); ++i) {
    (pts.row(i)[d] < eff ? left : right).push_back(i);
  }
  assert(!left.empty() && !right.empty());

  auto lres = detail::build_subtree(pts, std::move(left), schema_, cfg_, dim_pos, rng_);
  auto rres = detail::build_subtree(pts, std::move(right), schema_, cfg_, dim_pos, rng_);

  std::uint64_t old_leaves = count_leaves(sub);
  destroy_subtree(sub);
  anc->insert_splitter(child_slot, code);
  anc->children[child_slot] = lres.root;
  anc->children[child_slot + 1] = rres.root;
  leaf_count_ += lres.leaf_count + rres.leaf_count - old_leaves;

  for (NodeRef r : {lres.root, rres.root}) {
    std::vector<NodeRef> stack{r};
    while (!stack.empty()) {
      NodeRef n = stack.back();
      stack.pop_back();
      if (n.is_leaf()) {
        classify_leaf(n.leaf());
      } else {
        const InnerNode* in = n.inner();
        for (unsigned i = 0; i <= in->slotuse; ++i) stack.push_back(in->children[i]);
      }
    }
  }
  return true;
}

void SkdTree::full_rebuild() {
  PointSet pts(schema_.dims);
  pts.reserve(count_);
  collect_points(root_, pts);
  destroy_subtree(root_);
  root_ = NodeRef{};

  BuildConfig cfg = cfg_;
  cfg.seed = rng_();  // advance this tree's deterministic stream
  SkdTree rebuilt = build(std::move(pts), cfg);
  schema_ = std::move(rebuilt.schema_);
  root_ = rebuilt.root_;
  count_ = rebuilt.count_;
  leaf_count_ = rebuilt.leaf_count_;
  rebuilt.root_ = NodeRef{};
  rebuilt.count_ = 0;
  rebuilt.leaf_count_ = 0;
}

EraseOutcome SkdTree::erase(std::span<const CoordKey> coords, std::uint64_t id) {
  assert(coords.size() == schema_.dims);
  if (!root_) return EraseOutcome::NotFound;
  std::vector<PathEntry> path;
  LeafNode* leaf = descend(coords, path);
  std::uint32_t slot = leaf_find_exact(*leaf, coords, id, cfg_.simd);
  if (slot == leaf->slotuse) return EraseOutcome::NotFound;

  bool boundary = leaf->on_box_boundary(slot);
  leaf->remove_swap(slot);
  --count_;
  if (leaf->slotuse == 0) {
    unlink_empty_leaf(path);
    return EraseOutcome::Erased;
  }
  if (boundary) leaf->recompute_box();
  classify_leaf(leaf);
  return EraseOutcome::Erased;
}

void SkdTree::unlink_empty_leaf(std::vector<PathEntry>& path) {
  if (path.empty()) {
    destroy_subtree(root_);
    root_ = NodeRef{};
    leaf_count_ = 0;
    return;
  }
  InnerNode* parent = path.back().node;
  unsigned slot = path.back().child;
  destroy_subtree(parent->children[slot]);
  parent->remove_child(slot);
  --leaf_count_;

  // An inner node left with a single child dissolves into its parent.
  std::size_t i = path.size() - 1;
  InnerNode* cur = parent;
  while (cur->slotuse == 0) {
    NodeRef only = cur->children[0];
    if (i == 0) {
      root_ = only;
      delete cur;
      break;
    }
    InnerNode* gp = path[i - 1].node;
    gp->children[path[i - 1].child] = only;
    delete cur;
    cur = gp;
    --i;
  }
}

TreeStats SkdTree::stats() const {
  TreeStats st;
  st.points = count_;
  st.leaf_count = leaf_count_;
  if (!root_) return st;
  struct Frame {
    NodeRef n;
    std::uint64_t depth;
  };
  std::vector<Frame> stack{{root_, 1}};
  while (!stack.empty()) {
    auto [n, depth] = stack.back();
    stack.pop_back();
    if (n.is_leaf()) {
      st.height = std::max(st.height, depth);
      switch (n.leaf()->type) {
        case LeafType::Light: ++st.light; break;
        case LeafType::Heavy: ++st.heavy; break;
        case LeafType::Outlier: ++st.outlier; break;
      }
    } else {
      ++st.inner_count;
      const InnerNode* in = n.inner();
      switch (in->layout) {
        case Layout::N64: ++st.n64; break;
        case Layout::N32: ++st.n32; break;
        case Layout::N16: ++st.n16; break;
      }
      for (unsigned i = 0; i <= in->slotuse; ++i) stack.push_back({in->children[i], depth + 1});
    }
  }
  if (st.leaf_count > 0) {
    st.avg_leaf_occupancy = static_cast<double>(st.points) / static_cast<double>(st.leaf_count);
  }
  return st;
}

void SkdTree::check_structure() const {
  auto fail = [](const char* msg) { throw std::logic_error(msg); };
  if (!root_) {
    if (count_ != 0 || leaf_count_ != 0) fail("empty tree with nonzero counters");
    return;
  }
  const std::uint32_t dims = schema_.dims;
  if (dims == 0 || dims > kMaxDims) fail("schema dims out of range");
  {
    if (schema_.dim_order.size() != dims) fail("dim_order size mismatch");
    std::vector<bool> seen(dims, false);
    for (std::uint32_t d : schema_.dim_order) {
      if (d >= dims || seen[d]) fail("dim_order is not a permutation");
      seen[d] = true;
    }
  }

  using Wide = unsigned __int128;
  struct Frame {
    NodeRef n;
    std::vector<CoordKey> lo;  // inclusive per-dim lower bounds
    std::vector<Wide> hi;      // exclusive per-dim upper bounds
  };
  std::vector<Frame> stack;
  stack.push_back({root_, std::vector<CoordKey>(dims, 0),
                   std::vector<Wide>(dims, Wide{1} << 64)});
  std::uint64_t points = 0, leaves = 0;

  while (!stack.empty()) {
    Frame f = std::move(stack.back());
    stack.pop_back();
    if (f.n.is_inner()) {
      const InnerNode& in = *f.n.inner();
      if (in.slotuse < 1 || in.slotuse > in.max_splitters()) fail("inner slotuse out of range");
      if (in.split_dim >= dims) fail("split_dim out of range");
      if (in.layout == Layout::N64 && in.shift != 0) fail("N64 node with nonzero shift");
      for (unsigned i = 1; i < in.slotuse; ++i) {
        if (in.code(i - 1) >= in.code(i)) fail("splitter codes not strictly increasing");
      }
      for (unsigned i = in.slotuse; i < in.fanout(); ++i) {
        if (in.code(i) != layout_max_code(in.layout)) fail("padding slot below layout max");
      }
      for (unsigned i = 0; i <= in.slotuse; ++i) {
        if (!in.children[i]) fail("null child in use");
      }
      for (unsigned i = in.slotuse + 1; i < in.children.size(); ++i) {
        if (in.children[i]) fail("stale child past slotuse");
      }
      const std::uint32_t d = in.split_dim;
      for (unsigned i = 0; i < in.slotuse; ++i) {
        Wide e = in.effective_splitter(i);
        if (!(e > f.lo[d] && e < f.hi[d])) fail("splitter outside the node's slab");
      }
      for (unsigned i = 0; i <= in.slotuse; ++i) {
        Frame c{in.children[i], f.lo, f.hi};
        if (i > 0) c.lo[d] = std::max(c.lo[d], in.effective_splitter(i - 1));
        if (i < in.slotuse) c.hi[d] = std::min(c.hi[d], Wide{in.effective_splitter(i)});
        stack.push_back(std::move(c));
      }
      continue;
    }

    const LeafNode& lf = *f.n.leaf();
    ++leaves;
    points += lf.slotuse;
    if (lf.dims != dims) fail("leaf dims mismatch");
    if (lf.slotuse == 0) fail("empty leaf still linked");
    if (lf.cap % kBlockWidth != 0 || lf.slotuse > lf.cap) fail("leaf capacity invariant");
    if (lf.cols.size() != std::size_t{dims} * lf.cap || lf.ids.size() != lf.cap) {
      fail("leaf storage sizing");
    }
    if (lf.box.lo.size() != dims || lf.box.hi.size() != dims) fail("leaf box sizing");
    if ((lf.type == LeafType::Outlier) != (lf.promo > 0)) {
      fail("promotion counter inconsistent with leaf type");
    }
    for (std::uint32_t d = 0; d < dims; ++d) {
      const CoordKey* col = lf.column(d);
      CoordKey mn = kMaxCoord, mx = 0;
      for (std::uint32_t i = 0; i < lf.slotuse; ++i) {
        mn = std::min(mn, col[i]);
        mx = std::max(mx, col[i]);
        if (col[i] < f.lo[d] || Wide{col[i]} >= f.hi[d]) fail("point outside its slab");
      }
      if (mn != lf.box.lo[d] || mx != lf.box.hi[d]) fail("leaf box not exact");
      for (std::uint32_t i = lf.slotuse; i < lf.padded_count(); ++i) {
        if (col[i] != col[lf.slotuse - 1]) fail("padding lane does not replicate last row");
      }
    }
  }
  if (points != count_) fail("point total mismatch");
  if (leaves != leaf_count_) fail("leaf total mismatch");
}

}  // namespace skd
