#pragma once

#include <bit>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace skd {

// Coordinates live in an unsigned 64-bit ordinal domain; all comparisons are
// unsigned. The all-ones value is reserved as padding and never stored.
using CoordKey = std::uint64_t;

inline constexpr CoordKey kMaxCoord = std::numeric_limits<CoordKey>::max();

// Lanes per data-parallel block: 64 bytes of 64-bit coordinates.
inline constexpr std::uint32_t kBlockWidth = 8;

inline constexpr std::uint32_t kMaxDims = 16;

// Squared L2 distances: D * diff^2 with |diff| < 2^64 needs up to 132 bits in
// the worst case, so accumulation saturates instead of wrapping. Callers that
// must avoid saturation keep |diff| <= 2^62 / D per dimension.
using SqDist = unsigned __int128;

inline constexpr SqDist kMaxSqDist = ~SqDist{0};

inline SqDist sq_dist_add(SqDist acc, SqDist term, bool& overflow) noexcept {
  if (acc > kMaxSqDist - term) {
    overflow = true;
    return kMaxSqDist;
  }
  return acc + term;
}

// Reserves the padding value: 2^64-1 clamps to 2^64-2.
constexpr CoordKey encode_u64(std::uint64_t v) noexcept {
  return v == kMaxCoord ? kMaxCoord - 1 : v;
}

// Order-preserving map from finite doubles onto the ordinal domain. Callers
// reject non-finite input first.
inline CoordKey encode_f64(double v) noexcept {
  if (v == 0.0) v = 0.0;  // -0.0 == 0.0, so both must land on one key
  auto bits = std::bit_cast<std::uint64_t>(v);
  if (bits & 0x8000'0000'0000'0000ull) {
    bits = ~bits;
  } else {
    bits |= 0x8000'0000'0000'0000ull;
  }
  return encode_u64(bits);
}

struct Point {
  std::vector<CoordKey> coords;
  std::uint64_t id = 0;
};

// Closed box; lo[d] <= hi[d] for every dimension.
struct BoundingBox {
  std::vector<CoordKey> lo;
  std::vector<CoordKey> hi;

  std::uint32_t dims() const noexcept { return static_cast<std::uint32_t>(lo.size()); }

  bool contains(std::span<const CoordKey> p) const noexcept {
    for (std::size_t d = 0; d < lo.size(); ++d) {
      if (p[d] < lo[d] || p[d] > hi[d]) return false;
    }
    return true;
  }
};

// Closed query box [lo[d], hi[d]] per dimension.
struct RangeQuery {
  std::vector<CoordKey> lo;
  std::vector<CoordKey> hi;

  std::uint32_t dims() const noexcept { return static_cast<std::uint32_t>(lo.size()); }

  bool contains(std::span<const CoordKey> p) const noexcept {
    for (std::size_t d = 0; d < lo.size(); ++d) {
      if (p[d] < lo[d] || p[d] > hi[d]) return false;
    }
    return true;
  }

  // True when the query spans the whole box extent in dimension d; the leaf
  // scan may then skip that dimension.
  bool covers_dim(const BoundingBox& box, std::uint32_t d) const noexcept {
    return lo[d] <= box.lo[d] && hi[d] >= box.hi[d];
  }
};

inline SqDist sq_distance(std::span<const CoordKey> a, std::span<const CoordKey> b,
                          bool* overflow = nullptr) noexcept {
  SqDist acc = 0;
  bool ovf = false;
  for (std::size_t d = 0; d < a.size(); ++d) {
    CoordKey diff = a[d] >= b[d] ? a[d] - b[d] : b[d] - a[d];
    acc = sq_dist_add(acc, SqDist{diff} * diff, ovf);
  }
  if (overflow) *overflow = ovf;
  return acc;
}

enum class SimdMode : std::uint8_t { Auto, Scalar };

// dims in [1, kMaxDims]; leaf_capacity >= 2; dim_order is a permutation of
// 0..dims-1 fixed at build time.
struct Schema {
  std::uint32_t dims = 0;
  std::uint32_t leaf_capacity = 128;
  std::vector<std::uint32_t> dim_order;
};

struct QueryCounters {
  std::uint64_t nodes_visited = 0;
  std::uint64_t leaves_scanned = 0;
  std::uint64_t points_compared = 0;
};

enum class InsertOutcome : std::uint8_t {
  Inserted,
  InsertedWithSplit,
  InsertedWithRebuild,
  InsertedOutlierGrown,
  Duplicate,
};

enum class EraseOutcome : std::uint8_t { Erased, NotFound };

struct Neighbor {
  Point point;
  SqDist dist = 0;
};

}  // namespace skd
