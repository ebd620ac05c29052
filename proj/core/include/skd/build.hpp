#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "skd/dataset.hpp"
#include "skd/node.hpp"
#include "skd/types.hpp"

namespace skd {

class SkdTree;

struct BuildConfig {
  std::uint32_t leaf_capacity = 128;
  std::uint32_t sample_size = 4096;  // rows sampled for medians and ranking
  double unique_weight = 1.0;        // exponent on the unique-ratio factor
  double spread_weight = 1.0;        // exponent on the interquantile-spread factor
  std::uint64_t seed = 0x5eed;
  bool n64_only = false;  // restrict inner nodes to the 64-bit layout
  SimdMode simd = SimdMode::Auto;
  bool dim_skip = true;  // leaf scans may skip fully covered dimensions
};

struct LeafThresholds {
  double mean_occupancy = 0;  // C-bar
  std::uint64_t heavy = 0;    // T_h; light iff occupancy <= heavy
  std::uint64_t outlier = 0;  // T_o = 2 * T_h
};

// C-bar = points/leaves; T_h = floor(1.2 * max(min(C-bar, 2C), C));
// T_o = 2 * T_h. The 2C cap keeps the split trigger reachable when a handful
// of leaves hold most of the tree (see compute_thresholds in build.cpp).
LeafThresholds compute_thresholds(std::uint64_t total_points, std::uint64_t leaf_count,
                                  std::uint32_t leaf_capacity) noexcept;

// Dimensions sorted descending by uniqueRatio^uw * spreadScore^sw, computed
// on a deterministic sample of at most sample_size rows; spreadScore is the
// (q90 - q10) interquantile span normalized by the full extent, 0 when the
// dimension is constant. Ties break toward the lower dimension index.
std::vector<std::uint32_t> rank_dimensions(const PointSet& pts, const BuildConfig& cfg);

// Tree-wide per-dimension split budget: (ceil(n/c))^(1/d).
double target_splits(std::uint64_t n, std::uint32_t c, std::uint32_t d) noexcept;

struct LayoutChoice {
  Layout layout = Layout::N64;
  unsigned splits = 0;  // children to aim for; at most the layout's fanout
  bool carry = false;   // dimension stays eligible for re-splitting below
};

// The tree-wide budget s_tree fixes the layout class: s_tree <= 8 keeps
// full-width codes (N64); otherwise the layout whose fanout lies closest to
// s_tree wins, ties toward the wider fanout. Every node of one build uses the
// same class, so small residual splits deep in the tree stay compressed
// instead of reverting to N64. s_local only sets how many children this node
// aims for, clamped to the class fanout; the overflow carries the dimension.
LayoutChoice choose_layout(double s_tree, double s_local, bool n64_only = false) noexcept;

// Mutable view over a slice of rows, indirected through an index permutation
// that cracking rearranges in place.
struct CrackView {
  const PointSet* pts = nullptr;
  std::uint32_t* idx = nullptr;
  std::uint32_t count = 0;

  CoordKey coord(std::uint32_t i, std::uint32_t dim) const noexcept {
    return pts->row(idx[i])[dim];
  }
};

struct SplitOutcome {
  std::vector<std::uint64_t> codes;    // strictly increasing stored codes
  std::vector<std::uint32_t> bounds;   // codes.size()+2 offsets, 0 and count included
};

// Cracks the largest remaining segment around the quantized median of a
// sample of min(sample_size, segment) values until target_splits-1 unique
// splitters exist or no segment is splittable. A sampled median whose
// effective value falls outside (segment min, segment max] is replaced by
// the tightest valid splitter found by scan; if none exists the segment is
// skipped. Fewer-than-target splitters is a valid outcome.
SplitOutcome recursive_median_split(CrackView view, std::uint32_t dim,
                                    unsigned target_splits, Layout layout,
                                    std::uint8_t shift, std::mt19937_64& rng,
                                    std::uint32_t sample_size);

// Bulk-loads a tree. Empty input yields an empty tree with a null root (dims
// taken from the point set). Throws std::invalid_argument on dims outside
// [1, kMaxDims] or leaf_capacity < 2.
SkdTree build(PointSet points, const BuildConfig& cfg = {});

namespace detail {

struct SubtreeResult {
  NodeRef root;
  std::uint64_t leaf_count = 0;
  std::uint64_t oversized = 0;  // leaves left above capacity (unsplittable)
};

// Builds one subtree over the rows selected by idx, starting the dimension
// cycle at dim_order[dim_pos % D]. Leaves are created Light; callers
// classify afterwards.
SubtreeResult build_subtree(const PointSet& pts, std::vector<std::uint32_t> idx,
                            const Schema& schema, const BuildConfig& cfg,
                            std::uint32_t dim_pos, std::mt19937_64& rng);

}  // namespace detail

}  // namespace skd
