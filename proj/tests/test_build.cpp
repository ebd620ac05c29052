#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <vector>

#include "doctest.h"
#include "skd/build.hpp"
#include "skd/node.hpp"
#include "skd/tree.hpp"

using namespace skd;

namespace {

PointSet make_points(std::uint32_t dims, const std::vector<std::vector<CoordKey>>& rows) {
  PointSet pts(dims);
  std::uint64_t id = 0;
  for (const auto& r : rows) pts.push_row(r, id++);
  return pts;
}

PointSet uniform_points(std::size_t n, std::uint32_t dims, std::uint64_t seed) {
  PointSet pts(dims);
  pts.reserve(n);
  std::mt19937_64 rng(seed);
  std::vector<CoordKey> row(dims);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& v : row) v = encode_u64(rng());
    pts.push_row(row, i);
  }
  return pts;
}

// Multiset of (coords, id) reachable from the root.
void collect(NodeRef n, std::uint32_t dims, std::vector<std::vector<CoordKey>>& out) {
  if (!n) return;
  if (n.is_leaf()) {
    const LeafNode* l = n.leaf();
    for (std::uint32_t i = 0; i < l->slotuse; ++i) {
      std::vector<CoordKey> row(dims + 1);
      for (std::uint32_t d = 0; d < dims; ++d) row[d] = l->coord(i, d);
      row[dims] = static_cast<CoordKey>(l->ids[i]);
      out.push_back(std::move(row));
    }
    return;
  }
  const InnerNode* v = n.inner();
  for (unsigned c = 0; c <= v->slotuse; ++c) collect(v->children[c], dims, out);
}

std::uint64_t max_depth(NodeRef n) {
  if (!n) return 0;
  if (n.is_leaf()) return 1;
  const InnerNode* v = n.inner();
  std::uint64_t best = 0;
  for (unsigned c = 0; c <= v->slotuse; ++c) best = std::max(best, max_depth(v->children[c]));
  return best + 1;
}

// Every path visits dimensions in dim_order cyclic order; a node may repeat
// its parent's dimension only when the parent carried it.
void check_dim_cycle(NodeRef n, const Schema& schema, std::uint8_t parent_dim,
                     bool is_root) {
  if (!n || n.is_leaf()) return;
  const InnerNode* v = n.inner();
  if (is_root) {
    CHECK(v->split_dim == schema.dim_order[0]);
  } else {
    std::uint32_t parent_pos = 0;
    while (schema.dim_order[parent_pos] != parent_dim) ++parent_pos;
    std::uint8_t next_dim =
        static_cast<std::uint8_t>(schema.dim_order[(parent_pos + 1) % schema.dims]);
    bool ok = v->split_dim == next_dim || v->split_dim == parent_dim;
    CHECK(ok);
  }
  for (unsigned c = 0; c <= v->slotuse; ++c) {
    check_dim_cycle(v->children[c], schema, v->split_dim, false);
  }
}

}  // namespace

TEST_CASE("compute_thresholds frozen arithmetic") {
  // C-bar = 125.5 (2510 points over 20 leaves), C = 128.
  auto th = compute_thresholds(2510, 20, 128);
  CHECK(th.heavy == 153);
  CHECK(th.outlier == 306);
  // C-bar = 160.
  th = compute_thresholds(3200, 20, 128);
  CHECK(th.heavy == 192);
  CHECK(th.outlier == 384);
  // Single leaf of 100 points: the max picks C.
  th = compute_thresholds(100, 1, 128);
  CHECK(th.heavy == 153);
  CHECK(th.outlier == 306);
  // The mean term is capped at 2C so the outlier trigger stays reachable.
  th = compute_thresholds(100000, 1, 128);
  CHECK(th.heavy == 307);  // floor(1.2 * 256)
  CHECK(th.outlier == 614);
}

TEST_CASE("target_splits frozen arithmetic") {
  CHECK(target_splits(131072, 128, 2) == doctest::Approx(32.0));
  CHECK(target_splits(128, 128, 3) == doctest::Approx(1.0));
  CHECK(target_splits(8192, 128, 3) == doctest::Approx(4.0));
}

TEST_CASE("choose_layout fanout selection") {
  // Class from the tree budget: <= 8 full width, then nearest fanout.
  auto c = choose_layout(4, 4);
  CHECK(c.layout == Layout::N64);
  CHECK(c.splits == 4);
  CHECK_FALSE(c.carry);

  c = choose_layout(32, 32);
  CHECK(c.layout == Layout::N16);
  CHECK(c.splits == 32);
  CHECK_FALSE(c.carry);

  c = choose_layout(12, 12);  // equidistant from 8 and 16; wider fanout wins
  CHECK(c.layout == Layout::N32);
  CHECK(c.splits == 12);

  c = choose_layout(100, 100);
  CHECK(c.layout == Layout::N16);
  CHECK(c.splits == 32);
  CHECK(c.carry);

  c = choose_layout(12, 12, /*n64_only=*/true);
  CHECK(c.layout == Layout::N64);
  CHECK(c.splits == 8);
  CHECK(c.carry);

  // The class sticks with the tree budget even when one node only needs a
  // small residual split; the local target just bounds the child count.
  c = choose_layout(32, 2);
  CHECK(c.layout == Layout::N16);
  CHECK(c.splits == 2);
  CHECK_FALSE(c.carry);

  c = choose_layout(20, 5);
  CHECK(c.layout == Layout::N32);
  CHECK(c.splits == 5);

  // A small tree budget keeps full-width codes even for a large local ask.
  c = choose_layout(6, 20);
  CHECK(c.layout == Layout::N64);
  CHECK(c.splits == 8);
  CHECK(c.carry);
}

TEST_CASE("rank_dimensions scores by uniqueness and spread") {
  // Hand-computed 10-point sample: dim0 has two distinct values
  // (uniqueRatio 0.2, spread 1.0, score 0.2); dim1 is all distinct
  // (uniqueRatio 1.0, q10=vals[0]=0, q90=vals[8]=888, spread 888/999).
  std::vector<std::vector<CoordKey>> rows;
  for (int i = 0; i < 10; ++i) {
    rows.push_back({i % 2 == 0 ? CoordKey{0} : CoordKey{1000},
                    static_cast<CoordKey>(111 * i)});
  }
  auto pts = make_points(2, rows);
  BuildConfig cfg;
  auto order = rank_dimensions(pts, cfg);
  CHECK(order == std::vector<std::uint32_t>{1, 0});

  // Constant dimension ranks last.
  rows.clear();
  for (int i = 0; i < 10; ++i) rows.push_back({static_cast<CoordKey>(i * 7), 42});
  pts = make_points(2, rows);
  order = rank_dimensions(pts, cfg);
  CHECK(order == std::vector<std::uint32_t>{0, 1});

  // Identical profiles tie toward ascending index.
  rows.clear();
  for (int i = 0; i < 10; ++i) {
    rows.push_back({static_cast<CoordKey>(i), static_cast<CoordKey>(i)});
  }
  pts = make_points(2, rows);
  order = rank_dimensions(pts, cfg);
  CHECK(order == std::vector<std::uint32_t>{0, 1});
}

TEST_CASE("recursive_median_split cracks [1..8] into exact quartiles") {
  PointSet pts = make_points(1, {{5}, {2}, {7}, {1}, {8}, {3}, {6}, {4}});
  std::vector<std::uint32_t> idx(8);
  for (std::uint32_t i = 0; i < 8; ++i) idx[i] = i;
  CrackView view{&pts, idx.data(), 8};
  std::mt19937_64 rng(1);
  auto out = recursive_median_split(view, 0, 4, Layout::N64, 0, rng, 4096);
  REQUIRE(out.codes.size() == 3);
  CHECK(out.codes == std::vector<std::uint64_t>{3, 5, 7});
  REQUIRE(out.bounds.size() == 5);
  CHECK(out.bounds == std::vector<std::uint32_t>{0, 2, 4, 6, 8});
  // Each segment holds values in [eff(prev), eff(cur)).
  for (std::size_t s = 0; s + 1 < out.bounds.size(); ++s) {
    for (std::uint32_t i = out.bounds[s]; i < out.bounds[s + 1]; ++i) {
      CoordKey v = pts.row(idx[i])[0];
      if (s > 0) CHECK(v >= out.codes[s - 1]);
      if (s < out.codes.size()) CHECK(v < out.codes[s]);
    }
  }
}

TEST_CASE("recursive_median_split yields nothing on constant values") {
  PointSet pts = make_points(1, {{9}, {9}, {9}, {9}});
  std::vector<std::uint32_t> idx{0, 1, 2, 3};
  CrackView view{&pts, idx.data(), 4};
  std::mt19937_64 rng(2);
  auto out = recursive_median_split(view, 0, 4, Layout::N64, 0, rng, 4096);
  CHECK(out.codes.empty());
  CHECK(out.bounds == std::vector<std::uint32_t>{0, 4});
}

TEST_CASE("recursive_median_split respects quantization") {
  std::vector<std::vector<CoordKey>> rows;
  for (CoordKey v = 0; v < 256; ++v) rows.push_back({v});
  auto pts = make_points(1, rows);
  std::vector<std::uint32_t> idx(256);
  for (std::uint32_t i = 0; i < 256; ++i) idx[i] = i;
  CrackView view{&pts, idx.data(), 256};
  std::mt19937_64 rng(3);
  std::uint8_t shift = 4;
  auto out = recursive_median_split(view, 0, 4, Layout::N64, shift, rng, 4096);
  REQUIRE(!out.codes.empty());
  for (std::size_t i = 0; i < out.codes.size(); ++i) {
    // Codes are quantized values; strictly increasing.
    if (i > 0) CHECK(out.codes[i - 1] < out.codes[i]);
  }
  for (std::size_t s = 0; s + 1 < out.bounds.size(); ++s) {
    for (std::uint32_t i = out.bounds[s]; i < out.bounds[s + 1]; ++i) {
      CoordKey v = pts.row(idx[i])[0];
      if (s > 0) CHECK(v >= effective_value(out.codes[s - 1], shift));
      if (s < out.codes.size()) CHECK(v < effective_value(out.codes[s], shift));
    }
  }
}

TEST_CASE("build handles trivial sizes") {
  // Empty input: empty tree with a null root.
  SkdTree t = build(PointSet(3));
  CHECK(t.size() == 0);
  CHECK(t.empty());
  CHECK(t.leaf_count() == 0);
  CHECK_FALSE(t.root());
  t.check_structure();

  // N == C: a single leaf, no inner nodes.
  BuildConfig cfg;
  cfg.leaf_capacity = 128;
  auto pts = uniform_points(128, 2, 5);
  t = build(std::move(pts), cfg);
  CHECK(t.size() == 128);
  CHECK(t.leaf_count() == 1);
  auto st = t.stats();
  CHECK(st.inner_count == 0);
  CHECK(st.height == 1);
  t.check_structure();

  // One point.
  t = build(uniform_points(1, 4, 6));
  CHECK(t.size() == 1);
  CHECK(t.leaf_count() == 1);
  t.check_structure();
}

TEST_CASE("build rejects invalid configuration") {
  BuildConfig cfg;
  cfg.leaf_capacity = 1;
  CHECK_THROWS_AS(build(uniform_points(10, 2, 7), cfg), std::invalid_argument);

  PointSet zero_dims(0);
  zero_dims.push_row({}, 0);
  CHECK_THROWS_AS(build(std::move(zero_dims)), std::invalid_argument);

  PointSet wide(17);
  wide.push_row(std::vector<CoordKey>(17, 1), 0);
  CHECK_THROWS_AS(build(std::move(wide)), std::invalid_argument);

  // Empty input is not an error regardless of dims.
  CHECK(build(PointSet(17)).empty());
}

TEST_CASE("build conserves the point multiset and satisfies invariants") {
  std::mt19937_64 rng(53);
  for (auto [n, dims, cap] : std::vector<std::tuple<std::size_t, std::uint32_t, std::uint32_t>>{
           {1, 1, 2}, {127, 2, 128}, {129, 2, 128}, {5000, 3, 64},
           {5000, 8, 16}, {20000, 2, 128}, {3000, 1, 8}}) {
    auto pts = uniform_points(n, dims, rng());
    std::vector<std::vector<CoordKey>> want;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<CoordKey> row(dims + 1);
      for (std::uint32_t d = 0; d < dims; ++d) row[d] = pts.row(i)[d];
      row[dims] = static_cast<CoordKey>(pts.id(i));
      want.push_back(std::move(row));
    }
    BuildConfig cfg;
    cfg.leaf_capacity = cap;
    SkdTree t = build(std::move(pts), cfg);
    CHECK(t.size() == n);
    t.check_structure();

    std::vector<std::vector<CoordKey>> got;
    collect(t.root(), dims, got);
    std::sort(got.begin(), got.end());
    std::sort(want.begin(), want.end());
    CHECK(got == want);

    check_dim_cycle(t.root(), t.schema(), 0, true);
  }
}

TEST_CASE("build on duplicate-heavy data stays sound") {
  std::mt19937_64 rng(59);
  PointSet pts(2);
  for (std::size_t i = 0; i < 20000; ++i) {
    // 16 distinct values per dimension; ~78 points per location, so every
    // location still fits a C=128 leaf once the builder isolates it.
    pts.push_row(std::vector<CoordKey>{(rng() % 16) * 1000, (rng() % 16) * 777}, i);
  }
  // One flooded location that no split can break apart.
  for (std::size_t i = 0; i < 5000; ++i) {
    pts.push_row(std::vector<CoordKey>{3000, 2331}, 20000 + i);
  }
  SkdTree t = build(std::move(pts));
  CHECK(t.size() == 25000);
  t.check_structure();
  auto st = t.stats();
  CHECK(st.points == 25000);
  // The flooded location exceeds any leaf bar and is coordinate-identical,
  // so it must surface as at least one outlier leaf.
  CHECK(st.outlier > 0);

  // The flood is still fully queryable.
  auto ids = t.range_query_ids(RangeQuery{{3000, 2331}, {3000, 2331}});
  CHECK(ids.size() >= 5000);
}

TEST_CASE("uniform builds meet the occupancy and height contracts") {
  BuildConfig cfg;
  cfg.leaf_capacity = 128;
  std::size_t n = 100000;
  SkdTree t = build(uniform_points(n, 2, 61), cfg);
  t.check_structure();
  auto st = t.stats();
  CHECK(st.avg_leaf_occupancy >= 64.0);
  CHECK(st.avg_leaf_occupancy <= 128.0);
  // At most 1% of leaves above C (heavy or outlier).
  CHECK(st.heavy + st.outlier <= st.leaf_count / 100);

  // At least 99% of leaves land inside [C/2, C].
  std::uint64_t in_band = 0, total = 0;
  std::vector<NodeRef> stack{t.root()};
  while (!stack.empty()) {
    NodeRef n = stack.back();
    stack.pop_back();
    if (!n) continue;
    if (n.is_leaf()) {
      ++total;
      std::uint32_t occ = n.leaf()->slotuse;
      if (occ >= cfg.leaf_capacity / 2 && occ <= cfg.leaf_capacity) ++in_band;
      continue;
    }
    const InnerNode* v = n.inner();
    for (unsigned c = 0; c <= v->slotuse; ++c) stack.push_back(v->children[c]);
  }
  CHECK(total == st.leaf_count);
  CHECK(in_band * 100 >= total * 99);

  // Height bound on duplicate-free uniform data.
  double leaves_bound = std::ceil(static_cast<double>(n) / (cfg.leaf_capacity / 2));
  std::uint64_t bound =
      2 * static_cast<std::uint64_t>(std::ceil(std::log(leaves_bound) / std::log(8.0)));
  CHECK(st.height <= bound);
  CHECK(st.height == max_depth(t.root()));
}

TEST_CASE("layout budget: split counts never exceed the layout fanout") {
  std::mt19937_64 rng(67);
  for (int t = 0; t < 3; ++t) {
    auto pts = uniform_points(30000, 2, rng());
    BuildConfig cfg;
    cfg.leaf_capacity = t == 0 ? 16 : 128;
    cfg.n64_only = t == 2;
    SkdTree tree = build(std::move(pts), cfg);
    tree.check_structure();
    std::vector<NodeRef> stack{tree.root()};
    while (!stack.empty()) {
      NodeRef n = stack.back();
      stack.pop_back();
      if (!n || n.is_leaf()) continue;
      const InnerNode* v = n.inner();
      CHECK(v->slotuse + 1u <= v->fanout());
      if (cfg.n64_only) CHECK(v->layout == Layout::N64);
      for (unsigned c = 0; c <= v->slotuse; ++c) stack.push_back(v->children[c]);
    }
  }
}

TEST_CASE("48-point micro-instance builds the two-level quartile structure") {
  // 48 points, C=3: the root splits the distinct dimension 4-ways at the
  // x-quartiles; each child splits y 4-ways into 3-point leaves.
  PointSet pts(2);
  for (std::uint64_t i = 0; i < 48; ++i) {
    pts.push_row(std::vector<CoordKey>{1000 + 100 * i, 50 * (i % 12)}, i);
  }
  BuildConfig cfg;
  cfg.leaf_capacity = 3;
  SkdTree t = build(std::move(pts), cfg);
  t.check_structure();
  auto st = t.stats();
  CHECK(st.points == 48);
  CHECK(st.leaf_count == 16);
  CHECK(st.inner_count == 5);
  CHECK(st.height == 3);
  CHECK(st.avg_leaf_occupancy == doctest::Approx(3.0));
}
