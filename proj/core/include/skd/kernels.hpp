#pragma once

#include <cstddef>
#include <cstdint>

#include "skd/types.hpp"

// Data-parallel primitives with a scalar path and an AVX2 path selected at
// runtime. Both paths return bit-identical results.
namespace skd::kernels {

bool cpu_has_avx2() noexcept;

inline bool use_avx2(SimdMode mode) noexcept {
  return mode == SimdMode::Auto && cpu_has_avx2();
}

// Count of lanes among the first n with lanes[i] <= key. `lanes` points at a
// full 64-byte block (8, 16, or 32 lanes); lanes beyond n are padding and
// ignored regardless of content.
unsigned count_le_u64(const std::uint64_t* lanes, unsigned n, std::uint64_t key,
                      SimdMode mode) noexcept;
unsigned count_le_u32(const std::uint32_t* lanes, unsigned n, std::uint32_t key,
                      SimdMode mode) noexcept;
unsigned count_le_u16(const std::uint16_t* lanes, unsigned n, std::uint16_t key,
                      SimdMode mode) noexcept;

// masks[b] &= per-lane "col[i] in [lo, hi]" bits for every block b. count is
// the padded lane count, a multiple of kBlockWidth.
void filter_range(const CoordKey* col, std::size_t count, CoordKey lo, CoordKey hi,
                  std::uint8_t* masks, SimdMode mode) noexcept;

// out[i] = |col[i] - q| over the padded lane count.
void abs_diff(const CoordKey* col, std::size_t count, CoordKey q, CoordKey* out,
              SimdMode mode) noexcept;

// First index in [0, n) with ids[i] == id, or n if absent.
std::size_t find_id(const std::uint64_t* ids, std::size_t n, std::uint64_t id,
                    SimdMode mode) noexcept;

}  // namespace skd::kernels
