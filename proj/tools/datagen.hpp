#pragma once

#include <cstdint>
#include <string>

#include "skd/dataset.hpp"

namespace skdbench {

enum class Dist : std::uint8_t { Uniform, Gaussian, DupHeavy };

// "uniform" | "gaussian" | "dup-heavy"; throws std::invalid_argument otherwise.
Dist parse_dist(const std::string& name);
const char* dist_name(Dist d) noexcept;

struct GenConfig {
  std::uint64_t n = 0;
  std::uint32_t dims = 2;
  Dist dist = Dist::Uniform;
  std::uint64_t seed = 1;
};

// Deterministic synthetic datasets over the full 64-bit ordinal domain.
// Uniform: i.i.d. coordinates. Gaussian: one random center per dimension,
// sigma between 5% and 30% of the domain, clamped at the edges. DupHeavy:
// coordinates drawn from a 64-value pool per dimension, so quantized codes
// (and for low D whole tuples) collide heavily. Ids number rows from 0.
skd::PointSet gen_dataset(const GenConfig& cfg);

}  // namespace skdbench
