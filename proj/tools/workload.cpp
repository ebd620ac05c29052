#include "workload.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <stdexcept>

#include "json.hpp"

namespace skdbench {

using skd::CoordKey;
using skd::FlatStore;
using skd::RangeQuery;

namespace {

constexpr CoordKey kDomainMax = skd::kMaxCoord - 1;  // all-ones is reserved

RangeQuery box_around(std::span<const CoordKey> center, CoordKey half_width) {
  RangeQuery q;
  q.lo.resize(center.size());
  q.hi.resize(center.size());
  for (std::size_t d = 0; d < center.size(); ++d) {
    q.lo[d] = center[d] > half_width ? center[d] - half_width : 0;
    CoordKey hi = center[d] + half_width;
    if (hi < center[d] || hi > kDomainMax) hi = kDomainMax;  // saturate at the edge
    q.hi[d] = hi;
  }
  return q;
}

std::uint64_t count_in(const FlatStore& store, const RangeQuery& q) {
  std::uint64_t c = 0;
  for (std::size_t i = 0; i < store.size(); ++i) c += q.contains(store.row(i));
  return c;
}

}  // namespace

std::vector<RangeSpec> gen_range_workload(const FlatStore& store, std::size_t count,
                                          double selectivity, std::uint64_t seed) {
  if (store.size() == 0) throw std::invalid_argument("empty dataset");
  if (!(selectivity > 0 && selectivity <= 1)) {
    throw std::invalid_argument("selectivity must be in (0, 1]");
  }
  std::mt19937_64 rng(seed);
  const double target = selectivity * static_cast<double>(store.size());
  const double band_lo = 0.9 * target;
  const double band_hi = 1.1 * target;
  constexpr int kMaxProbes = 48;

  std::vector<RangeSpec> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    auto center = store.row(rng() % store.size());
    CoordKey lo_h = 0, hi_h = kDomainMax;  // the widest box covers the domain
    CoordKey best_h = hi_h;
    std::uint64_t best_cnt = 0;
    double best_err = std::numeric_limits<double>::infinity();

    for (int probe = 0; probe < kMaxProbes && hi_h - lo_h > 1; ++probe) {
      CoordKey h = lo_h + (hi_h - lo_h) / 2;
      std::uint64_t cnt = count_in(store, box_around(center, h));
      double err = std::abs(static_cast<double>(cnt) - target);
      if (err < best_err) {
        best_err = err;
        best_h = h;
        best_cnt = cnt;
      }
      if (static_cast<double>(cnt) >= band_lo && static_cast<double>(cnt) <= band_hi) {
        break;  // inside the ±10% band
      }
      if (static_cast<double>(cnt) < target) {
        lo_h = h;
      } else {
        hi_h = h;
      }
    }
    out.push_back({box_around(center, best_h), best_cnt});
  }
  return out;
}

std::vector<KnnSpec> gen_knn_workload(const FlatStore& store, std::size_t count,
                                      std::size_t k, std::uint64_t seed) {
  if (store.size() == 0) throw std::invalid_argument("empty dataset");
  std::mt19937_64 rng(seed);
  std::vector<KnnSpec> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    KnnSpec spec;
    spec.k = k;
    spec.q.resize(store.dims());
    if (i % 5 == 0) {
      for (auto& v : spec.q) v = skd::encode_u64(rng());
    } else {
      auto row = store.row(rng() % store.size());
      for (std::size_t d = 0; d < row.size(); ++d) {
        CoordKey jitter = rng() & ((CoordKey{1} << 34) - 1);
        auto v = static_cast<__int128>(row[d]) + static_cast<__int128>(jitter) -
                 (__int128{1} << 33);
        v = std::clamp<__int128>(v, 0, static_cast<__int128>(kDomainMax));
        spec.q[d] = static_cast<CoordKey>(v);
      }
    }
    out.push_back(std::move(spec));
  }
  return out;
}

namespace {

const char* kind_name(WorkloadKind k) {
  switch (k) {
    case WorkloadKind::Range: return "range";
    case WorkloadKind::Knn: return "knn";
    case WorkloadKind::Mixed: return "mixed";
  }
  return "?";
}

WorkloadKind parse_kind(const std::string& s) {
  if (s == "range") return WorkloadKind::Range;
  if (s == "knn") return WorkloadKind::Knn;
  if (s == "mixed") return WorkloadKind::Mixed;
  throw std::runtime_error("workload: unknown kind " + s);
}

}  // namespace

void write_workload(const std::filesystem::path& path, const Workload& w) {
  nlohmann::ordered_json j;
  j["kind"] = kind_name(w.kind);
  j["dims"] = w.dims;
  j["seed"] = w.seed;
  if (w.kind != WorkloadKind::Knn) j["target_selectivity"] = w.target_selectivity;
  if (w.kind == WorkloadKind::Mixed) {
    j["insert_frac"] = w.insert_frac;
    j["delete_frac"] = w.delete_frac;
    j["batches"] = w.batches;
  }
  auto& qs = j["queries"] = nlohmann::ordered_json::array();
  if (w.kind == WorkloadKind::Knn) {
    for (const auto& s : w.knns) qs.push_back({{"q", s.q}, {"k", s.k}});
  } else {
    for (const auto& s : w.ranges) {
      qs.push_back({{"lo", s.query.lo}, {"hi", s.query.hi}, {"achieved", s.achieved}});
    }
  }
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f << j.dump(2) << "\n";
}

Workload read_workload(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  nlohmann::json j = nlohmann::json::parse(f);

  Workload w;
  w.kind = parse_kind(j.at("kind").get<std::string>());
  w.dims = j.at("dims").get<std::uint32_t>();
  w.seed = j.value("seed", std::uint64_t{0});
  w.target_selectivity = j.value("target_selectivity", 0.0);
  if (w.kind == WorkloadKind::Mixed) {
    w.insert_frac = j.at("insert_frac").get<double>();
    w.delete_frac = j.at("delete_frac").get<double>();
    w.batches = j.at("batches").get<unsigned>();
    if (w.batches < 1) throw std::runtime_error("workload: batches must be >= 1");
    if (w.insert_frac < 0 || w.insert_frac > 1 || w.delete_frac < 0 || w.delete_frac > 1) {
      throw std::runtime_error("workload: fractions must be in [0, 1]");
    }
  }
  for (const auto& q : j.at("queries")) {
    if (w.kind == WorkloadKind::Knn) {
      KnnSpec s;
      s.q = q.at("q").get<std::vector<CoordKey>>();
      s.k = q.at("k").get<std::size_t>();
      if (s.q.size() != w.dims) throw std::runtime_error("workload: query dims mismatch");
      w.knns.push_back(std::move(s));
    } else {
      RangeSpec s;
      s.query.lo = q.at("lo").get<std::vector<CoordKey>>();
      s.query.hi = q.at("hi").get<std::vector<CoordKey>>();
      s.achieved = q.value("achieved", std::uint64_t{0});
      if (s.query.lo.size() != w.dims || s.query.hi.size() != w.dims) {
        throw std::runtime_error("workload: query dims mismatch");
      }
      w.ranges.push_back(std::move(s));
    }
  }
  return w;
}

}  // namespace skdbench
