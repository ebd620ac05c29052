#pragma once

// Benchmark flows behind the CLI subcommands. Timing uses the monotonic
// clock; every repeatable query phase is the median of 3 sweeps; dataset and
// workload file IO and result verification sit outside every timed region.

#include <cstdint>
#include <filesystem>

#include "skd/build.hpp"
#include "report.hpp"

namespace skdbench {

struct RunOptions {
  std::uint32_t leaf_capacity = 128;
  bool n64_only = false;  // --layouts n64-only
  skd::SimdMode simd = skd::SimdMode::Auto;
  bool verify = false;
  std::uint64_t seed = 0x5eed;
  Format format = Format::Csv;
  std::filesystem::path out;  // empty = stdout
};

// Exit codes: 0 success, 2 verification mismatch (first failing query goes to
// stderr and no report is written). File and argument errors throw.
int run_build(const std::filesystem::path& dataset, const RunOptions& opt);
int run_bench(const std::filesystem::path& dataset, const std::filesystem::path& workload,
              const RunOptions& opt);
int run_verify(const std::filesystem::path& dataset, const std::filesystem::path& workload,
               RunOptions opt);

}  // namespace skdbench
