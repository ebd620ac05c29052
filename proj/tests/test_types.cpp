#include <cstdint>
#include <random>
#include <vector>

#include "doctest.h"
#include "skd/types.hpp"

using namespace skd;

TEST_CASE("encode_u64 passes values through and clamps the padding value") {
  CHECK(encode_u64(42) == 42);
  CHECK(encode_u64(0) == 0);
  CHECK(encode_u64(kMaxCoord) == kMaxCoord - 1);
  CHECK(encode_u64(kMaxCoord - 1) == kMaxCoord - 1);
}

TEST_CASE("encode_f64 preserves order across the double line") {
  std::vector<double> vals = {-1e300, -5.5, -1.0, -0.0, 0.0, 1e-300, 1.0, 2.5, 1e300};
  for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
    CAPTURE(vals[i]);
    CHECK(encode_f64(vals[i]) <= encode_f64(vals[i + 1]));
    if (vals[i] < vals[i + 1]) CHECK(encode_f64(vals[i]) < encode_f64(vals[i + 1]));
  }
  std::mt19937_64 rng(11);
  for (int t = 0; t < 20000; ++t) {
    double a = std::bit_cast<double>(rng());
    double b = std::bit_cast<double>(rng());
    if (std::isnan(a) || std::isnan(b)) continue;
    if (a < b) {
      CHECK(encode_f64(a) < encode_f64(b));
    } else if (a > b) {
      CHECK(encode_f64(a) > encode_f64(b));
    } else {
      CHECK(encode_f64(a) == encode_f64(b));
    }
  }
}

TEST_CASE("bounding box containment") {
  BoundingBox b{{0, 0}, {10, 10}};
  CHECK(b.contains(std::vector<CoordKey>{5, 5}));
  CHECK_FALSE(b.contains(std::vector<CoordKey>{5, 11}));
  BoundingBox degenerate{{3, 3}, {3, 3}};
  CHECK(degenerate.contains(std::vector<CoordKey>{3, 3}));
}

TEST_CASE("range query covers_dim") {
  BoundingBox b{{2}, {9}};
  CHECK(RangeQuery{{0}, {10}}.covers_dim(b, 0));
  CHECK_FALSE(RangeQuery{{3}, {10}}.covers_dim(b, 0));
  CHECK(RangeQuery{{2}, {9}}.covers_dim(b, 0));
}

TEST_CASE("sq_distance is exact and saturates instead of wrapping") {
  std::vector<CoordKey> a{3, 4}, o{0, 0};
  CHECK(sq_distance(a, o) == 25);

  // 8 dimensions of the maximal diff exceed 2^128 and must saturate.
  std::vector<CoordKey> far(8, kMaxCoord - 1), origin(8, 0);
  bool ovf = false;
  CHECK(sq_distance(far, origin, &ovf) == kMaxSqDist);
  CHECK(ovf);

  // One max diff alone fits: (2^64-2)^2 < 2^128.
  ovf = false;
  std::vector<CoordKey> one{kMaxCoord - 1}, z{0};
  CHECK(sq_distance(one, z, &ovf) == SqDist{kMaxCoord - 1} * (kMaxCoord - 1));
  CHECK_FALSE(ovf);
}

TEST_CASE("quantized compare equivalence on random triples") {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 100000; ++t) {
    unsigned s = static_cast<unsigned>(rng() % 49);
    CoordKey q = rng();
    CoordKey tcode = rng() >> s;  // t << s cannot overflow
    bool quantized = (q >> s) >= tcode;
    bool raw = q >= (tcode << s);
    CHECK(quantized == raw);
  }
  // Edges: zero shift, zero code, all-ones query.
  CHECK(((kMaxCoord >> 48) >= 0xffffu) == (kMaxCoord >= (CoordKey{0xffff} << 48)));
  CHECK(((CoordKey{0} >> 7) >= 0) == (CoordKey{0} >= 0));
}
