#include "runner.hpp"

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "skd/dataset.hpp"
#include "skd/oracle.hpp"
#include "skd/tree.hpp"
#include "workload.hpp"

namespace skdbench {

namespace {

using Clock = std::chrono::steady_clock;
using skd::CoordKey;
using skd::FlatStore;
using skd::PointSet;
using skd::RangeQuery;
using skd::SkdTree;

template <typename F>
double timed_once(F&& f) {
  auto t0 = Clock::now();
  f();
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

template <typename F>
double median_of_3(F&& f) {
  double t[3] = {timed_once(f), timed_once(f), timed_once(f)};
  std::sort(t, t + 3);
  return t[1];
}

skd::BuildConfig make_config(const RunOptions& opt) {
  skd::BuildConfig cfg;
  cfg.leaf_capacity = opt.leaf_capacity;
  cfg.n64_only = opt.n64_only;
  cfg.simd = opt.simd;
  cfg.seed = opt.seed;
  return cfg;
}

void add_common(Report& r, const char* kind, const std::filesystem::path& dataset,
                std::uint64_t n, std::uint32_t dims, const RunOptions& opt) {
  r.add("kind", kind);
  r.add("dataset", dataset.filename().string());
  r.add("n", n);
  r.add("dims", dims);
  r.add("leaf_capacity", opt.leaf_capacity);
  r.add("layouts", opt.n64_only ? "n64-only" : "auto");
  r.add("simd", opt.simd == skd::SimdMode::Scalar ? "scalar" : "auto");
  r.add("seed", opt.seed);
}

void add_tree_shape(Report& r, const skd::TreeStats& st) {
  r.add("points", st.points);
  r.add("leaves", st.leaf_count);
  r.add("inner_nodes", st.inner_count);
  r.add("height", st.height);
  r.add("avg_leaf_occupancy", st.avg_leaf_occupancy);
  add_pct_triple(r, "light_pct", "heavy_pct", "outlier_pct", st.light, st.heavy,
                 st.outlier);
  r.add("n64_nodes", st.n64);
  r.add("n32_nodes", st.n32);
  r.add("n16_nodes", st.n16);
}

std::string u128_str(skd::SqDist v) {
  if (v == 0) return "0";
  std::string s;
  while (v > 0) {
    s.push_back(static_cast<char>('0' + static_cast<unsigned>(v % 10)));
    v /= 10;
  }
  std::reverse(s.begin(), s.end());
  return s;
}

void dump_coords(std::ostream& os, std::span<const CoordKey> v) {
  os << '[';
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? " " : "") << v[i];
  os << ']';
}

std::optional<std::string> check_range(const SkdTree& tree, const FlatStore& store,
                                       const RangeQuery& q, std::size_t qi) {
  auto got = tree.range_query_ids(q);
  auto want = skd::scan_range_ids(store, q);
  std::sort(got.begin(), got.end());
  std::sort(want.begin(), want.end());
  if (got == want) return std::nullopt;
  std::ostringstream os;
  os << "range query " << qi << ": expected " << want.size() << " ids, got "
     << got.size() << "\n  lo = ";
  dump_coords(os, q.lo);
  os << "\n  hi = ";
  dump_coords(os, q.hi);
  for (std::size_t i = 0; i < std::max(got.size(), want.size()); ++i) {
    if (i >= got.size() || i >= want.size() || got[i] != want[i]) {
      os << "\n  first divergence at sorted position " << i << ": expected ";
      if (i < want.size()) {
        os << "id " << want[i];
      } else {
        os << "end";
      }
      os << ", got ";
      if (i < got.size()) {
        os << "id " << got[i];
      } else {
        os << "end";
      }
      break;
    }
  }
  return os.str();
}

std::optional<std::string> check_knn(const SkdTree& tree, const FlatStore& store,
                                     const KnnSpec& spec, std::size_t qi) {
  auto got = tree.knn(spec.q, spec.k);
  auto want = skd::scan_knn(store, spec.q, spec.k);
  std::vector<skd::SqDist> gd, wd;
  gd.reserve(got.size());
  wd.reserve(want.size());
  for (const auto& nb : got) gd.push_back(nb.dist);
  for (const auto& nb : want) wd.push_back(nb.dist);
  std::sort(gd.begin(), gd.end());
  std::sort(wd.begin(), wd.end());
  if (gd == wd) return std::nullopt;
  std::ostringstream os;
  os << "knn query " << qi << " (k = " << spec.k << "): expected " << wd.size()
     << " neighbors, got " << gd.size() << "\n  q = ";
  dump_coords(os, spec.q);
  for (std::size_t i = 0; i < std::max(gd.size(), wd.size()); ++i) {
    if (i >= gd.size() || i >= wd.size() || gd[i] != wd[i]) {
      os << "\n  first divergence at rank " << i << ": expected dist ";
      os << (i < wd.size() ? u128_str(wd[i]) : "end") << ", got ";
      os << (i < gd.size() ? u128_str(gd[i]) : "end");
      break;
    }
  }
  return os.str();
}

// Returns 2 and dumps the first failing query on a mismatch, else 0.
int verify_ranges(const SkdTree& tree, const FlatStore& store,
                  const std::vector<RangeSpec>& qs, const char* phase) {
  for (std::size_t i = 0; i < qs.size(); ++i) {
    if (auto fail = check_range(tree, store, qs[i].query, i)) {
      std::cerr << "verification failed (" << phase << "): " << *fail << "\n";
      return 2;
    }
  }
  return 0;
}

int bench_range(Report& r, const SkdTree& tree, const FlatStore* store,
                const std::vector<RangeSpec>& qs, std::uint64_t n, bool timing) {
  std::uint64_t sink = 0;
  auto sweep = [&] {
    sink = 0;
    for (const auto& s : qs) sink += tree.range_query_ids(s.query).size();
  };
  double med = 0;
  if (timing) med = median_of_3(sweep);

  skd::QueryCounters c;
  std::uint64_t total = 0;
  for (const auto& s : qs) total += tree.range_query_ids(s.query, &c).size();

  if (store) {
    if (int rc = verify_ranges(tree, *store, qs, "range"); rc != 0) return rc;
  }

  r.add("queries", qs.size());
  if (timing) {
    r.add("median_sweep_seconds", med);
    r.add("qps", static_cast<double>(qs.size()) / std::max(med, 1e-12));
  }
  r.add("total_results", total);
  double nq = static_cast<double>(std::max<std::size_t>(qs.size(), 1));
  r.add("avg_results_per_query", static_cast<double>(total) / nq);
  if (n > 0) {
    r.add("measured_selectivity",
          static_cast<double>(total) / (nq * static_cast<double>(n)));
  }
  r.add("nodes_visited_per_query", static_cast<double>(c.nodes_visited) / nq);
  r.add("leaves_scanned_per_query", static_cast<double>(c.leaves_scanned) / nq);
  r.add("points_compared_per_query", static_cast<double>(c.points_compared) / nq);
  r.add("verified_queries", store ? qs.size() : std::size_t{0});
  return 0;
}

int bench_knn(Report& r, const SkdTree& tree, const FlatStore* store,
              const std::vector<KnnSpec>& qs, bool timing) {
  std::uint64_t sink = 0;
  auto sweep = [&] {
    sink = 0;
    for (const auto& s : qs) sink += tree.knn(s.q, s.k).size();
  };
  double med = 0;
  if (timing) med = median_of_3(sweep);

  skd::QueryCounters c;
  std::uint64_t total = 0;
  for (const auto& s : qs) total += tree.knn(s.q, s.k, &c).size();

  if (store) {
    for (std::size_t i = 0; i < qs.size(); ++i) {
      if (auto fail = check_knn(tree, *store, qs[i], i)) {
        std::cerr << "verification failed (knn): " << *fail << "\n";
        return 2;
      }
    }
  }

  r.add("queries", qs.size());
  r.add("k", qs.empty() ? std::size_t{0} : qs.front().k);
  if (timing) {
    r.add("median_sweep_seconds", med);
    r.add("qps", static_cast<double>(qs.size()) / std::max(med, 1e-12));
  }
  r.add("total_results", total);
  double nq = static_cast<double>(std::max<std::size_t>(qs.size(), 1));
  r.add("nodes_visited_per_query", static_cast<double>(c.nodes_visited) / nq);
  r.add("leaves_scanned_per_query", static_cast<double>(c.leaves_scanned) / nq);
  r.add("points_compared_per_query", static_cast<double>(c.points_compared) / nq);
  r.add("verified_queries", store ? qs.size() : std::size_t{0});
  return 0;
}

int bench_mixed(Report& r, SkdTree& tree, FlatStore& mirror, const Workload& w,
                bool verify, bool timing) {
  const auto& qs = w.ranges;
  const std::uint64_t n0 = mirror.size();
  std::mt19937_64 rng(w.seed ^ 0x9e3779b97f4a7c15ull);

  std::uint64_t next_id = 0;
  for (std::size_t i = 0; i < mirror.size(); ++i) next_id = std::max(next_id, mirror.id(i) + 1);

  const std::uint64_t ins_per_batch =
      static_cast<std::uint64_t>(w.insert_frac * static_cast<double>(n0)) / w.batches;
  const std::uint64_t del_per_batch =
      static_cast<std::uint64_t>(w.delete_frac * static_cast<double>(n0)) / w.batches;

  std::uint64_t sink = 0;
  auto sweep = [&] {
    sink = 0;
    for (const auto& s : qs) sink += tree.range_query_ids(s.query).size();
  };
  std::vector<double> sweep_sec;
  auto run_sweep = [&](const char* phase) -> int {
    if (timing) {
      sweep_sec.push_back(median_of_3(sweep));
    } else {
      sweep();
    }
    if (verify) {
      if (int rc = verify_ranges(tree, mirror, qs, phase); rc != 0) return rc;
    }
    return 0;
  };

  if (int rc = run_sweep("sweep 0, before updates"); rc != 0) return rc;

  std::uint64_t n_inserted = 0, n_split = 0, n_rebuild = 0, n_outlier_grown = 0,
                n_duplicate = 0, n_erased = 0, n_not_found = 0;
  std::vector<double> upd_sec;
  std::vector<CoordKey> buf(w.dims);

  for (unsigned b = 1; b <= w.batches; ++b) {
    // Operation lists are generated and the oracle mirror updated outside the
    // timed spans; only the tree mutations themselves are timed.
    PointSet ins(w.dims);
    ins.reserve(ins_per_batch);
    for (std::uint64_t i = 0; i < ins_per_batch; ++i) {
      for (auto& v : buf) v = skd::encode_u64(rng());
      ins.push_row(buf, next_id++);
    }
    double t_ins = timed_once([&] {
      for (std::size_t i = 0; i < ins.size(); ++i) {
        switch (tree.insert(ins.row(i), ins.id(i))) {
          case skd::InsertOutcome::Inserted: ++n_inserted; break;
          case skd::InsertOutcome::InsertedWithSplit: ++n_split; break;
          case skd::InsertOutcome::InsertedWithRebuild: ++n_rebuild; break;
          case skd::InsertOutcome::InsertedOutlierGrown: ++n_outlier_grown; break;
          case skd::InsertOutcome::Duplicate: ++n_duplicate; break;
        }
      }
    });
    for (std::size_t i = 0; i < ins.size(); ++i) mirror.insert(ins.row(i), ins.id(i));

    PointSet del(w.dims);
    del.reserve(del_per_batch);
    for (std::uint64_t i = 0; i < del_per_batch && mirror.size() > 0; ++i) {
      std::size_t victim = rng() % mirror.size();
      auto row = mirror.row(victim);
      std::uint64_t id = mirror.id(victim);
      del.push_row(row, id);
      mirror.erase(del.row(del.size() - 1), id);
    }
    double t_del = timed_once([&] {
      for (std::size_t i = 0; i < del.size(); ++i) {
        if (tree.erase(del.row(i), del.id(i)) == skd::EraseOutcome::Erased) {
          ++n_erased;
        } else {
          ++n_not_found;
        }
      }
    });
    upd_sec.push_back(t_ins + t_del);

    std::string phase = "sweep after batch " + std::to_string(b);
    if (int rc = run_sweep(phase.c_str()); rc != 0) return rc;
  }

  r.add("queries_per_sweep", qs.size());
  r.add("batches", w.batches);
  r.add("inserts_per_batch", ins_per_batch);
  r.add("deletes_per_batch", del_per_batch);
  if (timing) {
    for (std::size_t i = 0; i < sweep_sec.size(); ++i) {
      std::string tag = "sweep_" + std::to_string(i);
      r.add(tag + "_seconds", sweep_sec[i]);
      r.add(tag + "_qps",
            static_cast<double>(qs.size()) / std::max(sweep_sec[i], 1e-12));
    }
    if (!sweep_sec.empty() && sweep_sec.front() > 0) {
      r.add("final_over_initial_query_time", sweep_sec.back() / sweep_sec.front());
    }
    for (std::size_t i = 0; i < upd_sec.size(); ++i) {
      r.add("batch_" + std::to_string(i + 1) + "_update_seconds", upd_sec[i]);
    }
  }
  r.add("inserted_clean", n_inserted);
  r.add("inserted_with_split", n_split);
  r.add("inserted_with_rebuild", n_rebuild);
  r.add("inserted_outlier_grown", n_outlier_grown);
  r.add("duplicate_inserts", n_duplicate);
  r.add("erased", n_erased);
  r.add("erase_not_found", n_not_found);
  add_tree_shape(r, tree.stats());
  r.add("verified_queries", verify ? qs.size() * (std::size_t{w.batches} + 1) : 0);
  return 0;
}

int run_bench_impl(const std::filesystem::path& dataset,
                   const std::filesystem::path& workload, const RunOptions& opt,
                   bool timing) {
  PointSet pts = skd::read_dataset(dataset);
  Workload w = read_workload(workload);
  if (w.dims != pts.dims()) {
    throw std::runtime_error("workload dims " + std::to_string(w.dims) +
                             " do not match dataset dims " + std::to_string(pts.dims()));
  }
  const std::uint64_t n = pts.size();
  const std::uint32_t dims = pts.dims();

  const bool need_store = opt.verify || w.kind == WorkloadKind::Mixed;
  FlatStore store;
  if (need_store) store = FlatStore(pts);

  auto cfg = make_config(opt);
  SkdTree tree;
  double build_s = timed_once([&] { tree = skd::build(std::move(pts), cfg); });

  Report r;
  const char* kind = w.kind == WorkloadKind::Range  ? "range"
                     : w.kind == WorkloadKind::Knn ? "knn"
                                                   : "mixed";
  add_common(r, kind, dataset, n, dims, opt);
  if (timing) r.add("build_seconds", build_s);

  int rc = 0;
  switch (w.kind) {
    case WorkloadKind::Range:
      rc = bench_range(r, tree, opt.verify ? &store : nullptr, w.ranges, n, timing);
      break;
    case WorkloadKind::Knn:
      rc = bench_knn(r, tree, opt.verify ? &store : nullptr, w.knns, timing);
      break;
    case WorkloadKind::Mixed:
      rc = bench_mixed(r, tree, store, w, opt.verify, timing);
      break;
  }
  if (rc != 0) return rc;

  write_report(r, opt.format, opt.out);
  return 0;
}

}  // namespace

int run_build(const std::filesystem::path& dataset, const RunOptions& opt) {
  PointSet pts = skd::read_dataset(dataset);
  const std::uint64_t n = pts.size();
  const std::uint32_t dims = pts.dims();
  auto cfg = make_config(opt);
  SkdTree tree;
  double build_s = timed_once([&] { tree = skd::build(std::move(pts), cfg); });

  Report r;
  add_common(r, "build", dataset, n, dims, opt);
  r.add("build_seconds", build_s);
  add_tree_shape(r, tree.stats());
  write_report(r, opt.format, opt.out);
  return 0;
}

int run_bench(const std::filesystem::path& dataset, const std::filesystem::path& workload,
              const RunOptions& opt) {
  return run_bench_impl(dataset, workload, opt, /*timing=*/true);
}

int run_verify(const std::filesystem::path& dataset, const std::filesystem::path& workload,
               RunOptions opt) {
  opt.verify = true;
  return run_bench_impl(dataset, workload, opt, /*timing=*/false);
}

}  // namespace skdbench
