#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

#include "doctest.h"
#include "skd/build.hpp"
#include "skd/node.hpp"
#include "skd/oracle.hpp"
#include "skd/tree.hpp"

using namespace skd;

namespace {

PointSet uniform_points(std::size_t n, std::uint32_t dims, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  PointSet pts(dims);
  pts.reserve(n);
  std::vector<CoordKey> row(dims);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& v : row) v = encode_u64(rng());
    pts.push_row(row, i);
  }
  return pts;
}

std::vector<std::uint64_t> sorted_ids(std::vector<std::uint64_t> v) {
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace

TEST_CASE("insert grows boxes and reports plain outcomes") {
  auto pts = uniform_points(500, 2, 11);
  FlatStore mirror(pts);
  SkdTree t = build(std::move(pts));

  // A point outside every current box must still be findable afterwards.
  std::vector<CoordKey> fresh{0, 0};
  auto out = t.insert(fresh, 9000);
  CHECK(out == InsertOutcome::Inserted);
  mirror.insert(fresh, 9000);
  CHECK(t.size() == 501);
  auto got = t.range_query_ids({{0, 0}, {0, 0}});
  REQUIRE(got.size() == 1);
  CHECK(got[0] == 9000);
  t.check_structure();

  // Exact duplicate (coords, id): rejected, size unchanged.
  CHECK(t.insert(fresh, 9000) == InsertOutcome::Duplicate);
  CHECK(t.size() == 501);

  // Same coords, different id: accepted.
  CHECK(t.insert(fresh, 9001) == InsertOutcome::Inserted);
  CHECK(t.size() == 502);
  CHECK(t.range_query_ids({{0, 0}, {0, 0}}).size() == 2);
}

TEST_CASE("leaf split keeps the median predicate") {
  // Tiny capacity so a handful of inserts forces a split through the parent.
  PointSet pts(1);
  for (std::size_t i = 0; i < 8; ++i) pts.push_row({CoordKey{i} * 1000}, i);
  BuildConfig cfg;
  cfg.leaf_capacity = 4;
  SkdTree t = build(std::move(pts), cfg);

  std::size_t leaves_before = t.leaf_count();
  for (std::size_t i = 8; i < 40; ++i) {
    auto out = t.insert({CoordKey{i} * 1000}, i);
    CHECK(out != InsertOutcome::Duplicate);
    t.check_structure();
  }
  CHECK(t.size() == 40);
  CHECK(t.leaf_count() > leaves_before);

  // Every point still answers.
  for (std::size_t i = 0; i < 40; ++i) {
    CoordKey c = CoordKey{i} * 1000;
    auto got = t.range_query_ids({{c}, {c}});
    REQUIRE(got.size() == 1);
    CHECK(got[0] == i);
  }
}

TEST_CASE("identical-coordinate floods climb the outlier ladder, not the tree") {
  PointSet pts(2);
  std::mt19937_64 rng(13);
  for (std::size_t i = 0; i < 600; ++i) pts.push_row({rng(), rng()}, i);
  BuildConfig cfg;
  cfg.leaf_capacity = 16;
  SkdTree t = build(std::move(pts), cfg);

  std::vector<CoordKey> spot{12345, 67890};
  std::size_t grown = 0;
  const std::size_t kFlood = 4000;
  for (std::size_t i = 0; i < kFlood; ++i) {
    auto out = t.insert(spot, 100000 + i);
    CHECK(out != InsertOutcome::Duplicate);
    if (out == InsertOutcome::InsertedOutlierGrown) ++grown;
  }
  t.check_structure();
  CHECK(t.size() == 600 + kFlood);

  // The ladder doubles the bar each time, so promotions are logarithmic in
  // the flood size rather than linear.
  CHECK(grown >= 1);
  CHECK(grown <= 24);
  CHECK(t.stats().outlier >= 1);

  // The flooded point is intact.
  CHECK(t.range_query_ids({spot, spot}).size() == kFlood);
}

TEST_CASE("erase shrinks boundaries and removes empty leaves") {
  PointSet pts(2);
  for (std::size_t i = 0; i < 64; ++i)
    pts.push_row({CoordKey{i} * 100, CoordKey{i} * 7}, i);
  BuildConfig cfg;
  cfg.leaf_capacity = 8;
  SkdTree t = build(std::move(pts), cfg);
  std::size_t leaves = t.leaf_count();
  REQUIRE(leaves > 1);

  // Erase a boundary point; structure must survive the box shrink.
  CHECK(t.erase({0, 0}, 0) == EraseOutcome::Erased);
  t.check_structure();
  CHECK(t.erase({0, 0}, 0) == EraseOutcome::NotFound);
  CHECK(t.size() == 63);

  // Erase an interior point.
  CHECK(t.erase({CoordKey{30} * 100, CoordKey{30} * 7}, 30) == EraseOutcome::Erased);
  t.check_structure();

  // Drain one leaf completely: leaf count must drop.
  for (std::size_t i = 1; i < 16; ++i)
    t.erase({CoordKey{i} * 100, CoordKey{i} * 7}, i);
  t.check_structure();
  CHECK(t.leaf_count() < leaves);
}

TEST_CASE("deplete to empty, then regrow") {
  auto pts = uniform_points(300, 2, 17);
  FlatStore rows(pts);
  SkdTree t = build(std::move(pts));

  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto r = rows.row(i);
    CHECK(t.erase({r.begin(), r.end()}, rows.id(i)) == EraseOutcome::Erased);
  }
  CHECK(t.size() == 0);
  CHECK(t.empty());
  CHECK(!t.root());
  CHECK(t.erase({1, 2}, 99) == EraseOutcome::NotFound);
  CHECK(t.range_query_ids({{0, 0}, {kMaxCoord, kMaxCoord}}).empty());
  CHECK(t.knn({1, 2}, 3).empty());

  // Regrow far past one leaf: the bootstrap thresholds must not wedge the
  // tree into a single ever-growing leaf. Insert-only growth equilibrates
  // with leaves oscillating between the heavy and outlier bars (binary
  // splits fire at the outlier bar), so the mean is bounded by that bar,
  // not by the bulk-build capacity.
  std::mt19937_64 rng(19);
  for (std::size_t i = 0; i < 5000; ++i) {
    std::vector<CoordKey> row{encode_u64(rng()), encode_u64(rng())};
    t.insert(row, 10000 + i);
  }
  t.check_structure();
  CHECK(t.size() == 5000);
  CHECK(t.leaf_count() > 1);
  auto st = t.stats();
  CHECK(st.avg_leaf_occupancy <= static_cast<double>(t.thresholds().outlier));
}

TEST_CASE("update thresholds follow the mean leaf size") {
  // Single fresh leaf: heavy bar well above capacity so early growth is cheap.
  CHECK(compute_thresholds(100, 1, 128).heavy == 153);
  CHECK(compute_thresholds(100, 1, 128).outlier == 306);
  // Large settled tree: bars scale with the observed mean, capped at 2C.
  CHECK(compute_thresholds(100000, 1, 128).heavy == 307);
  CHECK(compute_thresholds(2510, 20, 128).heavy == 153);
  CHECK(compute_thresholds(3200, 20, 128).heavy == 192);
  CHECK(compute_thresholds(3200, 20, 128).outlier == 384);
  // Idempotent for fixed inputs.
  CHECK(compute_thresholds(4096, 32, 128).heavy == compute_thresholds(4096, 32, 128).heavy);
}

TEST_CASE("sorted adversarial inserts trigger rebuilds but stay exact") {
  // One dimension, capacity 2, monotone keys: splits pile onto one flank and
  // the escape hatch is a subtree or full rebuild.
  BuildConfig cfg;
  cfg.leaf_capacity = 2;
  cfg.n64_only = true;
  PointSet pts(1);
  pts.push_row({0}, 0);
  pts.push_row({1}, 1);
  SkdTree t = build(std::move(pts), cfg);

  std::size_t rebuilds = 0;
  for (std::size_t i = 2; i < 600; ++i) {
    auto out = t.insert({CoordKey{i} << 32}, i);
    CHECK(out != InsertOutcome::Duplicate);
    if (out == InsertOutcome::InsertedWithRebuild) ++rebuilds;
  }
  t.check_structure();
  CHECK(t.size() == 600);
  INFO("rebuilds observed: ", rebuilds);

  // Order statistics survive regardless of how many rebuilds fired.
  auto ids = t.range_query_ids({{0}, {kMaxCoord}});
  CHECK(sorted_ids(ids).size() == 600);
  auto nn = t.knn({CoordKey{300} << 32}, 1);
  REQUIRE(nn.size() == 1);
  CHECK(nn[0].point.id == 300);
}

TEST_CASE("randomized update storms stay equivalent to a flat mirror") {
  std::mt19937_64 rng(23);
  for (std::uint32_t dims : {1u, 3u}) {
    for (std::uint32_t cap : {4u, 128u}) {
      PointSet pts(dims);
      std::vector<CoordKey> row(dims);
      std::size_t n0 = 800;
      for (std::size_t i = 0; i < n0; ++i) {
        for (auto& v : row) v = rng() % 2 ? encode_u64(rng()) : CoordKey{rng() % 64} << 40;
        pts.push_row(row, i);
      }
      FlatStore mirror(pts);
      BuildConfig cfg;
      cfg.leaf_capacity = cap;
      SkdTree t = build(std::move(pts), cfg);

      std::uint64_t next_id = n0;
      for (int op = 0; op < 6000; ++op) {
        if (mirror.size() == 0 || rng() % 100 < 60) {
          for (auto& v : row) v = rng() % 2 ? encode_u64(rng()) : CoordKey{rng() % 64} << 40;
          auto out = t.insert(row, next_id);
          CHECK(out != InsertOutcome::Duplicate);
          mirror.insert(row, next_id);
          ++next_id;
        } else {
          std::size_t victim = rng() % mirror.size();
          auto r = mirror.row(victim);
          std::vector<CoordKey> coords(r.begin(), r.end());
          std::uint64_t id = mirror.id(victim);
          CHECK(t.erase(coords, id) == EraseOutcome::Erased);
          CHECK(mirror.erase(coords, id));
        }
        if (op % 1500 == 1499) {
          t.check_structure();
          CHECK(t.size() == mirror.size());
          // Range equivalence.
          for (int q = 0; q < 10; ++q) {
            RangeQuery box;
            box.lo.resize(dims);
            box.hi.resize(dims);
            for (std::uint32_t d = 0; d < dims; ++d) {
              CoordKey a = rng(), b = rng();
              box.lo[d] = std::min(a, b);
              box.hi[d] = std::max(a, b);
            }
            CHECK(sorted_ids(t.range_query_ids(box)) ==
                  sorted_ids(scan_range_ids(mirror, box)));
          }
          // kNN distance equivalence.
          if (mirror.size() > 0) {
            std::vector<CoordKey> q(dims);
            for (auto& v : q) v = encode_u64(rng());
            auto got = t.knn(q, 10);
            auto want = scan_knn(mirror, q, 10);
            REQUIRE(got.size() == want.size());
            for (std::size_t j = 0; j < got.size(); ++j) CHECK(got[j].dist == want[j].dist);
          }
        }
      }
      t.check_structure();
      CHECK(t.size() == mirror.size());
    }
  }
}
