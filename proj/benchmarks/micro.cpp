// Microbenchmarks for the hot paths: splitter location, leaf kernels, and
// end-to-end query throughput at a few selectivities. Not wired into ctest;
// run the binary directly (supports the usual --benchmark_* flags).

#include <benchmark/benchmark.h>

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "datagen.hpp"
#include "skd/build.hpp"
#include "skd/kernels.hpp"
#include "skd/node.hpp"
#include "skd/oracle.hpp"
#include "skd/tree.hpp"

using namespace skd;

namespace {

PointSet uniform(std::size_t n, std::uint32_t dims, std::uint64_t seed) {
  skdbench::GenConfig g;
  g.n = n;
  g.dims = dims;
  g.dist = skdbench::Dist::Uniform;
  g.seed = seed;
  return skdbench::gen_dataset(g);
}

PointSet copy_points(const PointSet& src) {
  PointSet out(src.dims());
  out.reserve(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) out.push_row(src.row(i), src.id(i));
  return out;
}

RangeQuery box_at(std::span<const CoordKey> center, double sel, std::uint32_t dims) {
  const double side = std::pow(sel, 1.0 / dims);
  const CoordKey h = static_cast<CoordKey>(0.5 * side * 18446744073709551616.0);
  RangeQuery q;
  q.lo.resize(dims);
  q.hi.resize(dims);
  for (std::uint32_t d = 0; d < dims; ++d) {
    CoordKey c = center[d];
    q.lo[d] = c > h ? c - h : 0;
    CoordKey hi = c + h;
    q.hi[d] = hi < c ? kMaxCoord : hi;
  }
  return q;
}

// ---- splitter location ------------------------------------------------------

template <Layout L>
void bm_locate_child(benchmark::State& state) {
  const auto mode = state.range(0) ? SimdMode::Auto : SimdMode::Scalar;
  InnerNode node(L, 0, 0);
  const unsigned n = node.max_splitters();
  for (unsigned i = 0; i < n; ++i)
    node.set_code(i, (i + 1) * (layout_max_code(L) / (n + 1)));
  node.slotuse = static_cast<std::uint8_t>(n);

  std::mt19937_64 rng(1);
  std::vector<CoordKey> keys(4096);
  for (auto& k : keys) k = rng();

  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(locate_child(node, keys[i & 4095], mode));
    ++i;
  }
}

// ---- leaf kernels -----------------------------------------------------------

void bm_filter_range(benchmark::State& state) {
  const auto mode = state.range(0) ? SimdMode::Auto : SimdMode::Scalar;
  const std::uint32_t count = 128;
  std::mt19937_64 rng(2);
  std::vector<CoordKey> col(count);
  for (auto& v : col) v = rng();
  std::vector<std::uint8_t> masks(count / kBlockWidth);

  for (auto _ : state) {
    std::fill(masks.begin(), masks.end(), 0xff);
    kernels::filter_range(col.data(), count, CoordKey{1} << 62, CoordKey{3} << 62, masks.data(),
                 mode);
    benchmark::DoNotOptimize(masks.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * count);
}

void bm_count_le(benchmark::State& state) {
  const auto mode = state.range(0) ? SimdMode::Auto : SimdMode::Scalar;
  std::mt19937_64 rng(3);
  alignas(64) std::uint64_t lanes[8];
  for (auto& v : lanes) v = rng();
  std::sort(lanes, lanes + 8);

  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(kernels::count_le_u64(lanes, 7, lanes[i & 7], mode));
    ++i;
  }
}

// ---- whole-tree operations --------------------------------------------------

void bm_build(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const PointSet base = uniform(n, 2, 4);
  for (auto _ : state) {
    state.PauseTiming();
    PointSet pts = copy_points(base);
    state.ResumeTiming();
    SkdTree t = build(std::move(pts));
    benchmark::DoNotOptimize(t.size());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                          static_cast<std::int64_t>(n));
}

void bm_range_query(benchmark::State& state) {
  const double sel = 1.0 / std::pow(10.0, static_cast<double>(state.range(0)));
  const auto mode = state.range(1) ? SimdMode::Auto : SimdMode::Scalar;
  static const PointSet base = uniform(1000000, 2, 5);
  static SkdTree tree = build(copy_points(base));
  tree.set_simd_mode(mode);

  std::mt19937_64 rng(6);
  std::vector<RangeQuery> queries;
  for (int i = 0; i < 256; ++i)
    queries.push_back(box_at(base.row(rng() % base.size()), sel, 2));

  std::size_t i = 0;
  std::uint64_t results = 0;
  for (auto _ : state) {
    results += tree.range_query_ids(queries[i & 255]).size();
    ++i;
  }
  benchmark::DoNotOptimize(results);
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()));
}

void bm_knn(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0));
  static const PointSet base = uniform(1000000, 2, 7);
  static SkdTree tree = build(copy_points(base));

  std::mt19937_64 rng(8);
  std::vector<std::vector<CoordKey>> qs;
  for (int i = 0; i < 256; ++i) {
    auto r = base.row(rng() % base.size());
    qs.emplace_back(r.begin(), r.end());
  }

  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(tree.knn(qs[i & 255], k).size());
    ++i;
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()));
}

void bm_insert(benchmark::State& state) {
  static const PointSet base = uniform(100000, 2, 9);
  SkdTree tree = build(copy_points(base));
  std::mt19937_64 rng(10);
  std::uint64_t id = 1ull << 40;

  for (auto _ : state) {
    benchmark::DoNotOptimize(tree.insert({encode_u64(rng()), encode_u64(rng())}, id++));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()));
}

BENCHMARK(bm_locate_child<Layout::N64>)->Arg(0)->Arg(1);
BENCHMARK(bm_locate_child<Layout::N32>)->Arg(0)->Arg(1);
BENCHMARK(bm_locate_child<Layout::N16>)->Arg(0)->Arg(1);
BENCHMARK(bm_filter_range)->Arg(0)->Arg(1);
BENCHMARK(bm_count_le)->Arg(0)->Arg(1);
BENCHMARK(bm_build)->Arg(100000)->Arg(1000000)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_range_query)->Args({4, 0})->Args({4, 1})->Args({2, 0})->Args({2, 1});
BENCHMARK(bm_knn)->Arg(1)->Arg(10)->Arg(100);
BENCHMARK(bm_insert);

}  // namespace

BENCHMARK_MAIN();
