#include "skd/build.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <numeric>
#include <optional>
#include <queue>
#include <stdexcept>

#include "skd/tree.hpp"

namespace skd {

LeafThresholds compute_thresholds(std::uint64_t total_points, std::uint64_t leaf_count,
                                  std::uint32_t leaf_capacity) noexcept {
  LeafThresholds t;
  if (leaf_count == 0) {
    t.heavy = std::uint64_t{12} * leaf_capacity / 10;
    t.outlier = 2 * t.heavy;
    return t;
  }
  t.mean_occupancy = static_cast<double>(total_points) / static_cast<double>(leaf_count);
  // floor(1.2 * max(mean, C)) in exact integer arithmetic. The mean term is
  // capped at 2C: without the cap a tree whose few leaves hold most points
  // (one leaf grown from empty is the extreme) raises its own split bar
  // faster than it fills and never splits at all.
  std::uint64_t cap2 = std::uint64_t{2} * leaf_capacity;
  if (total_points > SqDist{cap2} * leaf_count) {
    t.heavy = std::uint64_t{12} * cap2 / 10;
  } else if (total_points > std::uint64_t{leaf_capacity} * leaf_count) {
    t.heavy = static_cast<std::uint64_t>(SqDist{12} * total_points /
                                         (SqDist{10} * leaf_count));
  } else {
    t.heavy = std::uint64_t{12} * leaf_capacity / 10;
  }
  t.outlier = 2 * t.heavy;
  return t;
}

double target_splits(std::uint64_t n, std::uint32_t c, std::uint32_t d) noexcept {
  std::uint64_t p = (n + c - 1) / c;
  double s = std::pow(static_cast<double>(p), 1.0 / d);
  double snap = std::round(s);
  return std::abs(s - snap) < 1e-9 ? snap : s;
}

std::vector<std::uint32_t> rank_dimensions(const PointSet& pts, const BuildConfig& cfg) {
  std::uint32_t dims = pts.dims();
  std::size_t n = pts.size();
  std::size_t m = std::min<std::size_t>(n, cfg.sample_size);
  std::vector<double> score(dims, 0.0);
  if (m > 0) {
    std::vector<CoordKey> vals(m);
    for (std::uint32_t d = 0; d < dims; ++d) {
      for (std::size_t i = 0; i < m; ++i) vals[i] = pts.row(i * n / m)[d];
      std::sort(vals.begin(), vals.end());
      std::size_t distinct = 1;
      for (std::size_t i = 1; i < m; ++i) distinct += vals[i] != vals[i - 1];
      double unique_ratio = static_cast<double>(distinct) / static_cast<double>(m);
      CoordKey lo = vals.front(), hi = vals.back();
      double spread = 0.0;
      if (hi > lo) {
        CoordKey q10 = vals[(m - 1) / 10];
        CoordKey q90 = vals[(m - 1) * 9 / 10];
        spread = static_cast<double>(q90 - q10) / static_cast<double>(hi - lo);
      }
      score[d] = std::pow(unique_ratio, cfg.unique_weight) *
                 std::pow(spread, cfg.spread_weight);
    }
  }
  std::vector<std::uint32_t> order(dims);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    return score[a] > score[b];
  });
  return order;
}

LayoutChoice choose_layout(double s_tree, double s_local, bool n64_only) noexcept {
  Layout layout = Layout::N64;
  if (!n64_only && s_tree > 8.0) {
    double best = std::abs(s_tree - 8.0);
    for (Layout cand : {Layout::N32, Layout::N16}) {
      double d = std::abs(s_tree - static_cast<double>(layout_fanout(cand)));
      if (d <= best) {  // ties favor the wider fanout
        best = d;
        layout = cand;
      }
    }
  }
  unsigned cap = layout_fanout(layout);
  double want = std::max(2.0, std::ceil(s_local));
  if (want <= cap) return {layout, static_cast<unsigned>(want), false};
  return {layout, cap, true};
}

namespace {

// Deterministic bounded draw, independent of distribution-object quirks.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t n) noexcept {
  return static_cast<std::uint64_t>((SqDist{rng()} * n) >> 64);
}

struct Segment {
  std::uint32_t begin;
  std::uint32_t end;
  std::uint32_t size() const noexcept { return end - begin; }
};

struct SegmentOrder {
  bool operator()(const Segment& a, const Segment& b) const noexcept {
    if (a.size() != b.size()) return a.size() < b.size();
    return a.begin > b.begin;  // larger first, then leftmost first
  }
};

}  // namespace

SplitOutcome recursive_median_split(CrackView view, std::uint32_t dim,
                                    unsigned target_splits_count, Layout layout,
                                    std::uint8_t shift, std::mt19937_64& rng,
                                    std::uint32_t sample_size) {
  assert(target_splits_count >= 2);
  SplitOutcome out;
  if (view.count == 0) {
    out.bounds = {0, 0};
    return out;
  }
  unsigned want = target_splits_count - 1;

  std::priority_queue<Segment, std::vector<Segment>, SegmentOrder> heap;
  heap.push({0, view.count});
  std::vector<std::pair<std::uint32_t, std::uint64_t>> cuts;  // (boundary, code)
  std::vector<CoordKey> sample;

  while (cuts.size() < want && !heap.empty()) {
    Segment seg = heap.top();
    heap.pop();
    if (seg.size() < 2) continue;

    CoordKey seg_min = kMaxCoord, seg_max = 0;
    for (std::uint32_t i = seg.begin; i < seg.end; ++i) {
      CoordKey v = view.coord(i, dim);
      seg_min = std::min(seg_min, v);
      seg_max = std::max(seg_max, v);
    }
    if ((seg_min >> shift) == (seg_max >> shift)) continue;  // one code only

    std::uint32_t m = std::min<std::uint32_t>(seg.size(), std::max(1u, sample_size));
    sample.clear();
    sample.reserve(m);
    if (m == seg.size()) {
      for (std::uint32_t i = seg.begin; i < seg.end; ++i) sample.push_back(view.coord(i, dim));
    } else {
      for (std::uint32_t i = 0; i < m; ++i) {
        sample.push_back(view.coord(
            seg.begin + static_cast<std::uint32_t>(bounded(rng, seg.size())), dim));
      }
    }
    std::nth_element(sample.begin(), sample.begin() + sample.size() / 2, sample.end());
    CoordKey median = sample[sample.size() / 2];

    std::uint64_t code = quantize(median, shift);
    CoordKey eff = effective_value(code, shift);
    if (!(eff > seg_min && eff <= seg_max)) {
      // Tightest valid splitter: the smallest value coding above the minimum.
      CoordKey best = kMaxCoord;
      bool found = false;
      std::uint64_t min_code = quantize(seg_min, shift);
      for (std::uint32_t i = seg.begin; i < seg.end; ++i) {
        CoordKey v = view.coord(i, dim);
        if (quantize(v, shift) > min_code && (!found || v < best)) {
          best = v;
          found = true;
        }
      }
      if (!found) continue;  // all values share one code; unsplittable
      code = quantize(best, shift);
      eff = effective_value(code, shift);
    }
    assert(code <= layout_max_code(layout));
    (void)layout;

    std::uint32_t* first = view.idx + seg.begin;
    std::uint32_t* last = view.idx + seg.end;
    std::uint32_t* mid = std::partition(first, last, [&](std::uint32_t r) {
      return view.pts->row(r)[dim] < eff;
    });
    std::uint32_t cut = seg.begin + static_cast<std::uint32_t>(mid - first);
    assert(cut > seg.begin && cut < seg.end);
    cuts.emplace_back(cut, code);
    heap.push({seg.begin, cut});
    heap.push({cut, seg.end});
  }

  std::sort(cuts.begin(), cuts.end());
  out.bounds.reserve(cuts.size() + 2);
  out.bounds.push_back(0);
  for (auto& [pos, code] : cuts) {
    out.bounds.push_back(pos);
    out.codes.push_back(code);
  }
  out.bounds.push_back(view.count);
  return out;
}

namespace detail {

namespace {

struct BuildCtx {
  const PointSet* pts;
  const Schema* schema;
  const BuildConfig* cfg;
  std::mt19937_64* rng;
  double s_tree = 2.0;  // build-wide per-dimension budget; fixes the layout class
  std::uint64_t leaf_count = 0;
  std::uint64_t oversized = 0;
};

struct Carry {
  std::uint32_t dim;
  double target;  // remaining split factor, >= 2
};

NodeRef make_leaf(BuildCtx& ctx, const std::uint32_t* idx, std::uint32_t count) {
  auto* leaf = new LeafNode(ctx.schema->dims);
  leaf->reserve_lanes(std::max(count, 1u));
  for (std::uint32_t d = 0; d < ctx.schema->dims; ++d) {
    CoordKey* col = leaf->column(d);
    for (std::uint32_t i = 0; i < count; ++i) col[i] = ctx.pts->row(idx[i])[d];
  }
  for (std::uint32_t i = 0; i < count; ++i) leaf->ids[i] = ctx.pts->id(idx[i]);
  leaf->slotuse = count;
  leaf->recompute_box();
  leaf->repad();
  ++ctx.leaf_count;
  if (count > ctx.schema->leaf_capacity) ++ctx.oversized;
  return NodeRef::from(leaf);
}

struct SplitAttempt {
  Layout layout;
  std::uint8_t shift;
  SplitOutcome outcome;
};

SplitAttempt try_split_dim(BuildCtx& ctx, std::uint32_t* idx, std::uint32_t count,
                           std::uint32_t dim, double s_prime) {
  CrackView view{ctx.pts, idx, count};
  CoordKey anchor = 0;
  for (std::uint32_t i = 0; i < count; ++i) anchor = std::max(anchor, view.coord(i, dim));

  LayoutChoice choice = choose_layout(ctx.s_tree, s_prime, ctx.cfg->n64_only);
  Layout layout = choice.layout;
  unsigned target = choice.splits;
  std::uint8_t shift = compute_shift(anchor, layout);
  SplitAttempt best{layout, shift,
                    recursive_median_split(view, dim, target, layout, shift, *ctx.rng,
                                           ctx.cfg->sample_size)};

  // Quantization collisions starve narrow layouts; wider codes may recover.
  while (!ctx.cfg->n64_only && best.outcome.codes.size() + 1 < target &&
         best.layout != Layout::N64) {
    Layout wider = best.layout == Layout::N16 ? Layout::N32 : Layout::N64;
    unsigned wider_target = std::min<unsigned>(target, layout_fanout(wider));
    if (best.outcome.codes.size() + 1 >= wider_target) break;
    std::uint8_t wshift = compute_shift(anchor, wider);
    // Rebuild the view ordering from scratch; the failed attempt's cracks
    // stay valid for correctness but the boundaries are recomputed anyway.
    SplitAttempt retry{wider, wshift,
                       recursive_median_split(view, dim, wider_target, wider, wshift,
                                              *ctx.rng, ctx.cfg->sample_size)};
    if (retry.outcome.codes.size() > best.outcome.codes.size()) {
      best = std::move(retry);
    } else {
      break;
    }
  }
  return best;
}

struct NodeParams {
  std::uint32_t dim_pos;        // next fresh position in dim_order
  std::uint32_t dims_used;      // fresh dimensions consumed this cycle
  double s_cycle;               // per-dimension budget for the current cycle
  double m_exp;                 // expected row count under balanced cracking
  std::optional<Carry> carry;
};

NodeRef node_for(BuildCtx& ctx, std::uint32_t* idx, std::uint32_t count, NodeParams p) {
  const std::uint32_t dims = ctx.schema->dims;
  const std::uint32_t cap = ctx.schema->leaf_capacity;
  if (count <= cap) return make_leaf(ctx, idx, count);

  if (!p.carry && p.dims_used >= dims) {
    // A full dimension cycle is behind us; re-budget for the residual rows.
    p.dims_used = 0;
    p.s_cycle = target_splits(count, cap, dims);
    p.m_exp = count;
  }

  double ratio = p.m_exp > 0 ? count / p.m_exp : 1.0;

  std::uint32_t chosen_dim = 0;
  double s_raw = 0;
  bool consumed_fresh = false;
  std::uint32_t fresh_advance = 0;
  SplitAttempt attempt{Layout::N64, 0, {}};
  bool have_split = false;

  if (p.carry) {
    s_raw = p.carry->target * ratio;
    attempt = try_split_dim(ctx, idx, count, p.carry->dim, std::max(2.0, s_raw));
    if (!attempt.outcome.codes.empty()) {
      chosen_dim = p.carry->dim;
      have_split = true;
    }
  }
  if (!have_split) {
    for (std::uint32_t a = 0; a < dims; ++a) {
      std::uint32_t dim = ctx.schema->dim_order[(p.dim_pos + a) % dims];
      s_raw = p.s_cycle * ratio;
      attempt = try_split_dim(ctx, idx, count, dim, std::max(2.0, s_raw));
      if (!attempt.outcome.codes.empty()) {
        chosen_dim = dim;
        consumed_fresh = true;
        fresh_advance = a + 1;
        have_split = true;
        break;
      }
    }
  }
  if (!have_split) return make_leaf(ctx, idx, count);  // unsplittable region

  // Merge small adjacent leaf-bound segments toward [C/2, C].
  std::vector<std::uint32_t>& bounds = attempt.outcome.bounds;
  std::vector<std::uint64_t>& codes = attempt.outcome.codes;
  {
    std::size_t w = 1;  // bounds write cursor; codes[i] sits between bounds i and i+1
    for (std::size_t r = 1; r + 1 < bounds.size(); ++r) {
      std::uint32_t left = bounds[r] - bounds[w - 1];
      std::uint32_t right = bounds[r + 1] - bounds[r];
      if (std::min(left, right) < cap / 2 && left + right <= cap) {
        continue;  // drop this boundary and its code
      }
      bounds[w] = bounds[r];
      codes[w - 1] = codes[r - 1];
      ++w;
    }
    bounds[w] = bounds.back();
    bounds.resize(w + 1);
    codes.resize(w - 1);
  }

  std::uint32_t nsegs = static_cast<std::uint32_t>(bounds.size() - 1);
  assert(nsegs >= 2);

  auto* node = new InnerNode(attempt.layout, static_cast<std::uint8_t>(chosen_dim),
                             attempt.shift);
  node->slotuse = static_cast<std::uint8_t>(codes.size());
  for (unsigned i = 0; i < codes.size(); ++i) node->set_code(i, codes[i]);
  node->fill_padding(node->slotuse);

  NodeParams child;
  child.dim_pos = consumed_fresh ? p.dim_pos + fresh_advance : p.dim_pos;
  child.dims_used = consumed_fresh ? p.dims_used + fresh_advance : p.dims_used;
  child.s_cycle = p.s_cycle;
  child.m_exp = p.m_exp / nsegs;
  double remaining = s_raw / nsegs;
  if (remaining >= 2.0) {
    child.carry = Carry{chosen_dim, remaining};
  }

  for (std::uint32_t i = 0; i < nsegs; ++i) {
    node->children[i] =
        node_for(ctx, idx + bounds[i], bounds[i + 1] - bounds[i], child);
  }
  return NodeRef::from(node);
}

}  // namespace

SubtreeResult build_subtree(const PointSet& pts, std::vector<std::uint32_t> idx,
                            const Schema& schema, const BuildConfig& cfg,
                            std::uint32_t dim_pos, std::mt19937_64& rng) {
  BuildCtx ctx{&pts, &schema, &cfg, &rng};
  ctx.s_tree = target_splits(idx.size(), schema.leaf_capacity, schema.dims);
  NodeParams p;
  p.dim_pos = dim_pos;
  p.dims_used = 0;
  p.s_cycle = ctx.s_tree;
  p.m_exp = static_cast<double>(idx.size());
  NodeRef root = node_for(ctx, idx.data(), static_cast<std::uint32_t>(idx.size()), p);
  return {root, ctx.leaf_count, ctx.oversized};
}

}  // namespace detail

SkdTree build(PointSet points, const BuildConfig& cfg) {
  if (cfg.leaf_capacity < 2) throw std::invalid_argument("leaf_capacity must be >= 2");
  std::uint32_t dims = points.dims();
  if (!points.empty() && (dims < 1 || dims > kMaxDims)) {
    throw std::invalid_argument("dims must be in [1, 16]");
  }
  if (points.size() >= std::uint64_t{1} << 32) {
    throw std::invalid_argument("row count exceeds 32-bit build indexing");
  }

  SkdTree tree;
  tree.schema_.dims = dims;
  tree.schema_.leaf_capacity = cfg.leaf_capacity;
  tree.cfg_ = cfg;
  tree.rng_.seed(cfg.seed);
  if (points.empty()) {
    tree.schema_.dim_order.resize(dims);
    std::iota(tree.schema_.dim_order.begin(), tree.schema_.dim_order.end(), 0);
    return tree;
  }

  tree.schema_.dim_order = rank_dimensions(points, cfg);

  std::vector<std::uint32_t> idx(points.size());
  std::iota(idx.begin(), idx.end(), 0);
  auto res = detail::build_subtree(points, std::move(idx), tree.schema_, cfg, 0, tree.rng_);
  tree.root_ = res.root;
  tree.count_ = points.size();
  tree.leaf_count_ = res.leaf_count;

  // Classification pass: thresholds need the finished tree's global mean.
  LeafThresholds th = tree.thresholds();
  std::vector<NodeRef> stack{tree.root_};
  while (!stack.empty()) {
    NodeRef n = stack.back();
    stack.pop_back();
    if (n.is_leaf()) {
      LeafNode* leaf = n.leaf();
      if (leaf->slotuse > th.outlier) {
        leaf->type = LeafType::Outlier;
        leaf->promo = 1;
      } else if (leaf->slotuse > th.heavy) {
        leaf->type = LeafType::Heavy;
      } else {
        leaf->type = LeafType::Light;
      }
    } else {
      InnerNode* inner = n.inner();
      for (unsigned i = 0; i <= inner->slotuse; ++i) stack.push_back(inner->children[i]);
    }
  }
  return tree;
}

}  // namespace skd
