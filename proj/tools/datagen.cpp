#include "datagen.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace skdbench {

using skd::CoordKey;
using skd::PointSet;

Dist parse_dist(const std::string& name) {
  if (name == "uniform") return Dist::Uniform;
  if (name == "gaussian") return Dist::Gaussian;
  if (name == "dup-heavy") return Dist::DupHeavy;
  throw std::invalid_argument("unknown distribution: " + name);
}

const char* dist_name(Dist d) noexcept {
  switch (d) {
    case Dist::Uniform: return "uniform";
    case Dist::Gaussian: return "gaussian";
    case Dist::DupHeavy: return "dup-heavy";
  }
  return "?";
}

namespace {

double u01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1p-53;
}

// Own Box-Muller keeps the stream identical across standard libraries.
double gauss(std::mt19937_64& rng) {
  double u1 = u01(rng);
  double u2 = u01(rng);
  if (u1 < 0x1p-60) u1 = 0x1p-60;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

CoordKey clamp_to_domain(double v) {
  if (!(v > 0.0)) return 0;
  if (v >= 0x1p64) return skd::kMaxCoord - 1;
  return skd::encode_u64(static_cast<CoordKey>(v));
}

}  // namespace

PointSet gen_dataset(const GenConfig& cfg) {
  std::mt19937_64 rng(cfg.seed);
  PointSet pts(cfg.dims);
  pts.reserve(cfg.n);
  std::vector<CoordKey> row(cfg.dims);

  switch (cfg.dist) {
    case Dist::Uniform: {
      for (std::uint64_t i = 0; i < cfg.n; ++i) {
        for (auto& v : row) v = skd::encode_u64(rng());
        pts.push_row(row, i);
      }
      break;
    }
    case Dist::Gaussian: {
      std::vector<double> mean(cfg.dims), sigma(cfg.dims);
      for (std::uint32_t d = 0; d < cfg.dims; ++d) {
        mean[d] = static_cast<double>(rng());
        sigma[d] = (0.05 + 0.25 * u01(rng)) * 0x1p64;
      }
      for (std::uint64_t i = 0; i < cfg.n; ++i) {
        for (std::uint32_t d = 0; d < cfg.dims; ++d) {
          row[d] = clamp_to_domain(mean[d] + sigma[d] * gauss(rng));
        }
        pts.push_row(row, i);
      }
      break;
    }
    case Dist::DupHeavy: {
      constexpr std::size_t kPool = 64;
      std::vector<CoordKey> pool(std::size_t{cfg.dims} * kPool);
      for (auto& v : pool) v = skd::encode_u64(rng());
      for (std::uint64_t i = 0; i < cfg.n; ++i) {
        for (std::uint32_t d = 0; d < cfg.dims; ++d) {
          row[d] = pool[d * kPool + rng() % kPool];
        }
        pts.push_row(row, i);
      }
      break;
    }
  }
  return pts;
}

}  // namespace skdbench
