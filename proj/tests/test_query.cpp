#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

#include "doctest.h"
#include "skd/build.hpp"
#include "skd/oracle.hpp"
#include "skd/tree.hpp"

using namespace skd;

namespace {

enum class Shape { Uniform, Gaussian, DupHeavy };

PointSet gen(Shape shape, std::size_t n, std::uint32_t dims, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  PointSet pts(dims);
  pts.reserve(n);
  std::vector<CoordKey> row(dims);
  std::vector<CoordKey> pool(dims * 32);
  for (auto& v : pool) v = rng();
  std::normal_distribution<double> gauss(0.0, 0.08);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::uint32_t d = 0; d < dims; ++d) {
      switch (shape) {
        case Shape::Uniform: row[d] = encode_u64(rng()); break;
        case Shape::DupHeavy: row[d] = encode_u64(pool[d * 32 + rng() % 32]); break;
        case Shape::Gaussian: {
          double v = 0.5 + gauss(rng);
          v = std::clamp(v, 0.0, 1.0);
          row[d] = encode_u64(static_cast<CoordKey>(v * 1.8e19));
          break;
        }
      }
    }
    pts.push_row(row, i);
  }
  return pts;
}

RangeQuery random_box(std::uint32_t dims, std::mt19937_64& rng) {
  RangeQuery q;
  q.lo.resize(dims);
  q.hi.resize(dims);
  // Half-widths from tiny to near-domain so selectivities span 0..~1.
  for (std::uint32_t d = 0; d < dims; ++d) {
    CoordKey c = rng();
    int log2w = 40 + static_cast<int>(rng() % 24);
    CoordKey h = CoordKey{1} << log2w;
    q.lo[d] = c > h ? c - h : 0;
    CoordKey hi = c + h;
    q.hi[d] = hi < c ? kMaxCoord - 1 : std::min(hi, kMaxCoord - 1);
  }
  return q;
}

std::vector<CoordKey> random_point(std::uint32_t dims, std::mt19937_64& rng) {
  std::vector<CoordKey> q(dims);
  for (auto& v : q) v = encode_u64(rng());
  return q;
}

std::vector<SqDist> dists_of(const std::vector<Neighbor>& v) {
  std::vector<SqDist> out;
  out.reserve(v.size());
  for (const auto& n : v) out.push_back(n.dist);
  return out;
}

}  // namespace

TEST_CASE("range query whole domain and degenerate point") {
  auto pts = gen(Shape::Uniform, 5000, 2, 71);
  auto probe = pts.point(137);
  FlatStore store(pts);
  SkdTree t = build(std::move(pts));

  RangeQuery all{{0, 0}, {kMaxCoord, kMaxCoord}};
  CHECK(t.range_query_ids(all).size() == 5000);

  RangeQuery point{probe.coords, probe.coords};
  auto got = t.range_query_ids(point);
  REQUIRE(got.size() == 1);
  CHECK(got[0] == probe.id);

  // Full Point materialization agrees with the id variant.
  auto rows = t.range_query(point);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].id == probe.id);
  CHECK(rows[0].coords == probe.coords);
}

TEST_CASE("range queries match the scan oracle across shapes and dims") {
  std::mt19937_64 rng(73);
  for (Shape shape : {Shape::Uniform, Shape::Gaussian, Shape::DupHeavy}) {
    for (std::uint32_t dims : {1u, 2u, 4u, 8u}) {
      auto pts = gen(shape, 20000, dims, rng());
      FlatStore store(pts);
      BuildConfig cfg;
      cfg.leaf_capacity = 64;
      SkdTree t = build(std::move(pts), cfg);
      t.check_structure();
      for (int k = 0; k < 60; ++k) {
        auto q = random_box(dims, rng);
        auto got = t.range_query_ids(q);
        auto want = scan_range_ids(store, q);
        std::sort(got.begin(), got.end());
        std::sort(want.begin(), want.end());
        CHECK(got == want);
      }
    }
  }
}

TEST_CASE("knn exactness: trivial cases") {
  auto pts = gen(Shape::Uniform, 3000, 3, 79);
  auto probe = pts.point(42);
  FlatStore store(pts);
  SkdTree t = build(std::move(pts));

  // k=1 at a stored point.
  auto got = t.knn(probe.coords, 1);
  REQUIRE(got.size() == 1);
  CHECK(got[0].dist == 0);
  CHECK(got[0].point.id == probe.id);

  // k = N returns the whole dataset sorted by distance.
  std::mt19937_64 rng(83);
  auto q = random_point(3, rng);
  auto all = t.knn(q, 3000);
  REQUIRE(all.size() == 3000);
  CHECK(std::is_sorted(all.begin(), all.end(),
                       [](const Neighbor& a, const Neighbor& b) { return a.dist < b.dist; }));
  auto want = scan_knn(store, q, 3000);
  CHECK(dists_of(all) == dists_of(want));

  // k > N returns all points (the short size is the flag).
  CHECK(t.knn(q, 5000).size() == 3000);

  // Empty tree.
  SkdTree empty;
  CHECK(empty.knn(q, 3).empty());
}

TEST_CASE("knn matches the scan oracle across shapes, dims, and k") {
  std::mt19937_64 rng(89);
  for (Shape shape : {Shape::Uniform, Shape::Gaussian, Shape::DupHeavy}) {
    for (std::uint32_t dims : {2u, 6u}) {
      auto pts = gen(shape, 20000, dims, rng());
      FlatStore store(pts);
      BuildConfig cfg;
      cfg.leaf_capacity = 64;
      SkdTree t = build(std::move(pts), cfg);
      for (std::size_t k : {1, 10, 100}) {
        for (int i = 0; i < 25; ++i) {
          std::vector<CoordKey> q;
          if (rng() % 2) {
            q = random_point(dims, rng);
          } else {
            auto r = store.row(rng() % store.size());
            q.assign(r.begin(), r.end());
          }
          auto got = t.knn(q, k);
          auto want = scan_knn(store, q, k);
          REQUIRE(got.size() == want.size());
          CHECK(dists_of(got) == dists_of(want));
        }
      }
    }
  }
}

TEST_CASE("dimension skip and simd mode change no results") {
  std::mt19937_64 rng(97);
  auto pts = gen(Shape::DupHeavy, 15000, 3, 101);
  FlatStore store(pts);
  SkdTree t = build(std::move(pts));

  for (int i = 0; i < 40; ++i) {
    auto q = random_box(3, rng);
    auto qp = random_point(3, rng);

    t.set_dim_skip(true);
    t.set_simd_mode(SimdMode::Auto);
    auto ids_a = t.range_query_ids(q);
    auto knn_a = t.knn(qp, 20);

    t.set_dim_skip(false);
    auto ids_b = t.range_query_ids(q);
    CHECK(ids_a == ids_b);  // same order, not just same set

    t.set_dim_skip(true);
    t.set_simd_mode(SimdMode::Scalar);
    auto ids_c = t.range_query_ids(q);
    auto knn_c = t.knn(qp, 20);
    CHECK(ids_a == ids_c);
    REQUIRE(knn_a.size() == knn_c.size());
    for (std::size_t j = 0; j < knn_a.size(); ++j) {
      CHECK(knn_a[j].point.id == knn_c[j].point.id);
      CHECK(knn_a[j].dist == knn_c[j].dist);
    }
    t.set_simd_mode(SimdMode::Auto);
  }
}

TEST_CASE("query counters move in the right direction") {
  auto pts = gen(Shape::Uniform, 50000, 2, 103);
  FlatStore store(pts);
  SkdTree t = build(std::move(pts));

  RangeQuery all{{0, 0}, {kMaxCoord, kMaxCoord}};
  QueryCounters full;
  auto ids = t.range_query_ids(all, &full);
  CHECK(ids.size() == 50000);
  CHECK(full.leaves_scanned == t.leaf_count());
  CHECK(full.nodes_visited >= 1);
  CHECK(full.points_compared >= 50000);

  // A covering query with dim skip compares fewer coordinates than without.
  t.set_dim_skip(true);
  QueryCounters with_skip;
  t.range_query_ids(all, &with_skip);
  t.set_dim_skip(false);
  QueryCounters no_skip;
  t.range_query_ids(all, &no_skip);
  t.set_dim_skip(true);
  CHECK(with_skip.points_compared <= no_skip.points_compared);

  QueryCounters knn_c;
  t.knn(std::vector<CoordKey>{1, 2}, 5, &knn_c);
  CHECK(knn_c.leaves_scanned >= 1);
  CHECK(knn_c.points_compared >= 5);
}

TEST_CASE("knn on small multi-leaf trees is exhaustively exact") {
  std::mt19937_64 rng(107);
  for (int t = 0; t < 50; ++t) {
    std::size_t n = 2 + rng() % 60;
    auto pts = gen(t % 2 ? Shape::DupHeavy : Shape::Uniform, n, 2, rng());
    FlatStore store(pts);
    BuildConfig cfg;
    cfg.leaf_capacity = 4;
    SkdTree tree = build(std::move(pts), cfg);
    for (std::size_t k = 1; k <= n; ++k) {
      auto q = random_point(2, rng);
      auto got = tree.knn(q, k);
      auto want = scan_knn(store, q, k);
      REQUIRE(got.size() == k);
      CHECK(dists_of(got) == dists_of(want));
    }
  }
}
