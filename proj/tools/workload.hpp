#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "skd/oracle.hpp"
#include "skd/types.hpp"

namespace skdbench {

struct RangeSpec {
  skd::RangeQuery query;
  std::uint64_t achieved = 0;  // oracle row count at generation time
};

struct KnnSpec {
  std::vector<skd::CoordKey> q;
  std::size_t k = 0;
};

enum class WorkloadKind : std::uint8_t { Range, Knn, Mixed };

struct Workload {
  WorkloadKind kind = WorkloadKind::Range;
  std::uint32_t dims = 0;
  std::uint64_t seed = 0;
  double target_selectivity = 0;
  double insert_frac = 0;  // mixed only
  double delete_frac = 0;
  unsigned batches = 5;
  std::vector<RangeSpec> ranges;
  std::vector<KnnSpec> knns;
};

// Hypercube queries centered on sampled data rows. Each half-width comes
// from a bracketed binary search against exact oracle counts until the count
// lands within ±10% of selectivity * N, capped at 48 probes per query; the
// closest probe wins and its count is recorded either way (duplicate-heavy
// data can make the band unreachable).
std::vector<RangeSpec> gen_range_workload(const skd::FlatStore& store, std::size_t count,
                                          double selectivity, std::uint64_t seed);

// Query points: sampled data rows under mild jitter, with every fifth point
// uniform over the domain.
std::vector<KnnSpec> gen_knn_workload(const skd::FlatStore& store, std::size_t count,
                                      std::size_t k, std::uint64_t seed);

void write_workload(const std::filesystem::path& path, const Workload& w);
Workload read_workload(const std::filesystem::path& path);

}  // namespace skdbench
