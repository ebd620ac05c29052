#include "skd/kernels.hpp"

#include <immintrin.h>

#include <bit>

namespace skd::kernels {

bool cpu_has_avx2() noexcept {
  static const bool has = __builtin_cpu_supports("avx2");
  return has;
}

namespace {

constexpr std::uint64_t kBias64 = 0x8000'0000'0000'0000ull;
constexpr std::uint32_t kBias32 = 0x8000'0000u;

unsigned count_le_u64_scalar(const std::uint64_t* lanes, unsigned n,
                             std::uint64_t key) noexcept {
  unsigned c = 0;
  for (unsigned i = 0; i < n; ++i) c += lanes[i] <= key;
  return c;
}

unsigned count_le_u32_scalar(const std::uint32_t* lanes, unsigned n,
                             std::uint32_t key) noexcept {
  unsigned c = 0;
  for (unsigned i = 0; i < n; ++i) c += lanes[i] <= key;
  return c;
}

unsigned count_le_u16_scalar(const std::uint16_t* lanes, unsigned n,
                             std::uint16_t key) noexcept {
  unsigned c = 0;
  for (unsigned i = 0; i < n; ++i) c += lanes[i] <= key;
  return c;
}

void filter_range_scalar(const CoordKey* col, std::size_t count, CoordKey lo,
                         CoordKey hi, std::uint8_t* masks) noexcept {
  for (std::size_t b = 0; b < count / kBlockWidth; ++b) {
    std::uint8_t m = 0;
    const CoordKey* lane = col + b * kBlockWidth;
    for (unsigned i = 0; i < kBlockWidth; ++i) {
      m |= static_cast<std::uint8_t>(lane[i] >= lo && lane[i] <= hi) << i;
    }
    masks[b] &= m;
  }
}

void abs_diff_scalar(const CoordKey* col, std::size_t count, CoordKey q,
                     CoordKey* out) noexcept {
  for (std::size_t i = 0; i < count; ++i) {
    out[i] = col[i] >= q ? col[i] - q : q - col[i];
  }
}

std::size_t find_id_scalar(const std::uint64_t* ids, std::size_t n,
                           std::uint64_t id) noexcept {
  for (std::size_t i = 0; i < n; ++i) {
    if (ids[i] == id) return i;
  }
  return n;
}

__attribute__((target("avx2"))) unsigned count_le_u64_avx2(
    const std::uint64_t* lanes, unsigned n, std::uint64_t key) noexcept {
  const __m256i bias = _mm256_set1_epi64x(static_cast<long long>(kBias64));
  const __m256i k = _mm256_xor_si256(_mm256_set1_epi64x(static_cast<long long>(key)), bias);
  __m256i a = _mm256_xor_si256(_mm256_loadu_si256(reinterpret_cast<const __m256i*>(lanes)), bias);
  __m256i b = _mm256_xor_si256(_mm256_loadu_si256(reinterpret_cast<const __m256i*>(lanes + 4)), bias);
  unsigned gt = static_cast<unsigned>(_mm256_movemask_pd(_mm256_castsi256_pd(_mm256_cmpgt_epi64(a, k))));
  gt |= static_cast<unsigned>(_mm256_movemask_pd(_mm256_castsi256_pd(_mm256_cmpgt_epi64(b, k)))) << 4;
  unsigned lane_mask = (1u << n) - 1u;
  return n - static_cast<unsigned>(std::popcount(gt & lane_mask));
}

__attribute__((target("avx2"))) unsigned count_le_u32_avx2(
    const std::uint32_t* lanes, unsigned n, std::uint32_t key) noexcept {
  const __m256i bias = _mm256_set1_epi32(static_cast<int>(kBias32));
  const __m256i k = _mm256_xor_si256(_mm256_set1_epi32(static_cast<int>(key)), bias);
  __m256i a = _mm256_xor_si256(_mm256_loadu_si256(reinterpret_cast<const __m256i*>(lanes)), bias);
  __m256i b = _mm256_xor_si256(_mm256_loadu_si256(reinterpret_cast<const __m256i*>(lanes + 8)), bias);
  unsigned gt = static_cast<unsigned>(_mm256_movemask_ps(_mm256_castsi256_ps(_mm256_cmpgt_epi32(a, k))));
  gt |= static_cast<unsigned>(_mm256_movemask_ps(_mm256_castsi256_ps(_mm256_cmpgt_epi32(b, k)))) << 8;
  unsigned lane_mask = (1u << n) - 1u;
  return n - static_cast<unsigned>(std::popcount(gt & lane_mask));
}

__attribute__((target("avx2"))) unsigned count_le_u16_avx2(
    const std::uint16_t* lanes, unsigned n, std::uint16_t key) noexcept {
  const __m256i bias = _mm256_set1_epi16(static_cast<short>(0x8000));
  const __m256i k = _mm256_xor_si256(_mm256_set1_epi16(static_cast<short>(key)), bias);
  __m256i a = _mm256_xor_si256(_mm256_loadu_si256(reinterpret_cast<const __m256i*>(lanes)), bias);
  __m256i b = _mm256_xor_si256(_mm256_loadu_si256(reinterpret_cast<const __m256i*>(lanes + 16)), bias);
  // Two mask bits per 16-bit lane.
  std::uint64_t gt = static_cast<std::uint32_t>(_mm256_movemask_epi8(_mm256_cmpgt_epi16(a, k)));
  gt |= static_cast<std::uint64_t>(static_cast<std::uint32_t>(
            _mm256_movemask_epi8(_mm256_cmpgt_epi16(b, k))))
        << 32;
  std::uint64_t lane_mask = n >= 32 ? ~std::uint64_t{0} : (std::uint64_t{1} << (2 * n)) - 1;
  return n - static_cast<unsigned>(std::popcount(gt & lane_mask) / 2);
}

__attribute__((target("avx2"))) void filter_range_avx2(
    const CoordKey* col, std::size_t count, CoordKey lo, CoordKey hi,
    std::uint8_t* masks) noexcept {
  const __m256i bias = _mm256_set1_epi64x(static_cast<long long>(kBias64));
  const __m256i lov = _mm256_xor_si256(_mm256_set1_epi64x(static_cast<long long>(lo)), bias);
  const __m256i hiv = _mm256_xor_si256(_mm256_set1_epi64x(static_cast<long long>(hi)), bias);
  for (std::size_t b = 0; b < count / kBlockWidth; ++b) {
    const CoordKey* lane = col + b * kBlockWidth;
    __m256i x0 = _mm256_xor_si256(_mm256_loadu_si256(reinterpret_cast<const __m256i*>(lane)), bias);
    __m256i x1 = _mm256_xor_si256(_mm256_loadu_si256(reinterpret_cast<const __m256i*>(lane + 4)), bias);
    __m256i out0 = _mm256_or_si256(_mm256_cmpgt_epi64(lov, x0), _mm256_cmpgt_epi64(x0, hiv));
    __m256i out1 = _mm256_or_si256(_mm256_cmpgt_epi64(lov, x1), _mm256_cmpgt_epi64(x1, hiv));
    unsigned bad = static_cast<unsigned>(_mm256_movemask_pd(_mm256_castsi256_pd(out0)));
    bad |= static_cast<unsigned>(_mm256_movemask_pd(_mm256_castsi256_pd(out1))) << 4;
    masks[b] &= static_cast<std::uint8_t>(~bad);
  }
}

__attribute__((target("avx2"))) void abs_diff_avx2(const CoordKey* col,
                                                   std::size_t count, CoordKey q,
                                                   CoordKey* out) noexcept {
  const __m256i bias = _mm256_set1_epi64x(static_cast<long long>(kBias64));
  const __m256i qv = _mm256_set1_epi64x(static_cast<long long>(q));
  const __m256i qb = _mm256_xor_si256(qv, bias);
  for (std::size_t i = 0; i < count; i += 4) {
    __m256i x = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(col + i));
    __m256i swap = _mm256_cmpgt_epi64(qb, _mm256_xor_si256(x, bias));
    __m256i d = _mm256_blendv_epi8(_mm256_sub_epi64(x, qv), _mm256_sub_epi64(qv, x), swap);
    _mm256_storeu_si256(reinterpret_cast<__m256i*>(out + i), d);
  }
}

__attribute__((target("avx2"))) std::size_t find_id_avx2(const std::uint64_t* ids,
                                                         std::size_t n,
                                                         std::uint64_t id) noexcept {
  const __m256i idv = _mm256_set1_epi64x(static_cast<long long>(id));
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256i x = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(ids + i));
    unsigned m = static_cast<unsigned>(_mm256_movemask_pd(_mm256_castsi256_pd(_mm256_cmpeq_epi64(x, idv))));
    if (m) return i + static_cast<unsigned>(std::countr_zero(m));
  }
  for (; i < n; ++i) {
    if (ids[i] == id) return i;
  }
  return n;
}

}  // namespace

unsigned count_le_u64(const std::uint64_t* lanes, unsigned n, std::uint64_t key,
                      SimdMode mode) noexcept {
  if (use_avx2(mode)) return count_le_u64_avx2(lanes, n, key);
  return count_le_u64_scalar(lanes, n, key);
}

unsigned count_le_u32(const std::uint32_t* lanes, unsigned n, std::uint32_t key,
                      SimdMode mode) noexcept {
  if (use_avx2(mode)) return count_le_u32_avx2(lanes, n, key);
  return count_le_u32_scalar(lanes, n, key);
}

unsigned count_le_u16(const std::uint16_t* lanes, unsigned n, std::uint16_t key,
                      SimdMode mode) noexcept {
  if (use_avx2(mode)) return count_le_u16_avx2(lanes, n, key);
  return count_le_u16_scalar(lanes, n, key);
}

void filter_range(const CoordKey* col, std::size_t count, CoordKey lo, CoordKey hi,
                  std::uint8_t* masks, SimdMode mode) noexcept {
  if (use_avx2(mode)) return filter_range_avx2(col, count, lo, hi, masks);
  return filter_range_scalar(col, count, lo, hi, masks);
}

void abs_diff(const CoordKey* col, std::size_t count, CoordKey q, CoordKey* out,
              SimdMode mode) noexcept {
  if (use_avx2(mode)) return abs_diff_avx2(col, count, q, out);
  return abs_diff_scalar(col, count, q, out);
}

std::size_t find_id(const std::uint64_t* ids, std::size_t n, std::uint64_t id,
                    SimdMode mode) noexcept {
  if (use_avx2(mode)) return find_id_avx2(ids, n, id);
  return find_id_scalar(ids, n, id);
}

}  // namespace skd::kernels
