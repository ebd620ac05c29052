#include "skd/node.hpp"

#include <algorithm>

#include "skd/kernels.hpp"

namespace skd {

void LeafNode::reserve_lanes(std::uint32_t n) {
  std::uint32_t want = std::max(n, kBlockWidth);
  want = (want + kBlockWidth - 1) / kBlockWidth * kBlockWidth;
  if (want <= cap) return;
  std::vector<CoordKey> ncols(std::size_t{dims} * want);
  for (std::uint32_t d = 0; d < dims; ++d) {
    std::copy_n(column(d), slotuse, ncols.data() + std::size_t{d} * want);
  }
  cols = std::move(ncols);
  ids.resize(want);
  cap = want;
  repad();
}

void LeafNode::append(std::span<const CoordKey> coords, std::uint64_t id) {
  if (slotuse == cap) reserve_lanes(std::max(slotuse + 1, cap + cap / 2));
  for (std::uint32_t d = 0; d < dims; ++d) {
    column(d)[slotuse] = coords[d];
    box.lo[d] = std::min(box.lo[d], coords[d]);
    box.hi[d] = std::max(box.hi[d], coords[d]);
  }
  ids[slotuse] = id;
  ++slotuse;
  repad();
}

void LeafNode::remove_swap(std::uint32_t slot) noexcept {
  assert(slot < slotuse);
  std::uint32_t last = slotuse - 1;
  for (std::uint32_t d = 0; d < dims; ++d) column(d)[slot] = column(d)[last];
  ids[slot] = ids[last];
  --slotuse;
  repad();
}

void LeafNode::repad() noexcept {
  if (slotuse == 0) return;
  std::uint32_t last = slotuse - 1;
  for (std::uint32_t d = 0; d < dims; ++d) {
    CoordKey v = column(d)[last];
    for (std::uint32_t i = slotuse; i < padded_count(); ++i) column(d)[i] = v;
  }
}

void LeafNode::recompute_box() noexcept {
  box.lo.assign(dims, kMaxCoord);
  box.hi.assign(dims, 0);
  for (std::uint32_t d = 0; d < dims; ++d) {
    const CoordKey* col = column(d);
    for (std::uint32_t i = 0; i < slotuse; ++i) {
      box.lo[d] = std::min(box.lo[d], col[i]);
      box.hi[d] = std::max(box.hi[d], col[i]);
    }
  }
}

bool LeafNode::on_box_boundary(std::uint32_t slot) const noexcept {
  for (std::uint32_t d = 0; d < dims; ++d) {
    CoordKey v = coord(slot, d);
    if (v == box.lo[d] || v == box.hi[d]) return true;
  }
  return false;
}

void destroy_subtree(NodeRef n) noexcept {
  if (!n) return;
  if (n.is_leaf()) {
    delete n.leaf();
    return;
  }
  InnerNode* inner = n.inner();
  for (unsigned i = 0; i <= inner->slotuse; ++i) destroy_subtree(inner->children[i]);
  delete inner;
}

unsigned locate_child(const InnerNode& n, CoordKey x, SimdMode mode) noexcept {
  std::uint64_t c = quantize(x, n.shift);
  c = std::min(c, layout_max_code(n.layout));
  switch (n.layout) {
    case Layout::N64:
      return kernels::count_le_u64(n.splitters.w64.data(), n.slotuse, c, mode);
    case Layout::N32:
      return kernels::count_le_u32(n.splitters.w32.data(), n.slotuse,
                                   static_cast<std::uint32_t>(c), mode);
    case Layout::N16:
      return kernels::count_le_u16(n.splitters.w16.data(), n.slotuse,
                                   static_cast<std::uint16_t>(c), mode);
  }
  return 0;
}

std::pair<unsigned, unsigned> locate_children(const InnerNode& n, CoordKey lo,
                                              CoordKey hi, SimdMode mode) noexcept {
  return {locate_child(n, lo, mode), locate_child(n, hi, mode)};
}

namespace {

// Scratch sized for typical leaves; oversized leaves fall back to the heap.
constexpr std::uint32_t kScratchLanes = 1024;

}  // namespace

void leaf_collect_range(const LeafNode& leaf, const RangeQuery& q, bool dim_skip,
                        SimdMode mode, std::vector<std::uint32_t>& out,
                        QueryCounters* counters) {
  if (leaf.slotuse == 0) return;
  std::uint32_t padded = leaf.padded_count();
  std::uint32_t nblocks = padded / kBlockWidth;

  std::array<std::uint8_t, kScratchLanes / kBlockWidth> stack_masks;
  std::vector<std::uint8_t> heap_masks;
  std::uint8_t* masks = stack_masks.data();
  if (nblocks > stack_masks.size()) {
    heap_masks.resize(nblocks);
    masks = heap_masks.data();
  }
  std::fill_n(masks, nblocks, std::uint8_t{0xFF});
  if (std::uint32_t tail = leaf.slotuse % kBlockWidth; tail != 0) {
    masks[nblocks - 1] = static_cast<std::uint8_t>((1u << tail) - 1);
  }

  for (std::uint32_t d = 0; d < leaf.dims; ++d) {
    if (dim_skip && q.covers_dim(leaf.box, d)) continue;
    kernels::filter_range(leaf.column(d), padded, q.lo[d], q.hi[d], masks, mode);
  }
  if (counters) counters->points_compared += leaf.slotuse;

  for (std::uint32_t b = 0; b < nblocks; ++b) {
    std::uint32_t bits = masks[b];
    while (bits) {
      out.push_back(b * kBlockWidth + static_cast<std::uint32_t>(std::countr_zero(bits)));
      bits &= bits - 1;
    }
  }
}

void leaf_sq_distances(const LeafNode& leaf, std::span<const CoordKey> q,
                       SimdMode mode, SqDist* out, bool& overflow) {
  std::uint32_t padded = leaf.padded_count();
  std::array<CoordKey, kScratchLanes> stack_diffs;
  std::vector<CoordKey> heap_diffs;
  CoordKey* diffs = stack_diffs.data();
  if (padded > stack_diffs.size()) {
    heap_diffs.resize(padded);
    diffs = heap_diffs.data();
  }
  std::fill_n(out, leaf.slotuse, SqDist{0});
  for (std::uint32_t d = 0; d < leaf.dims; ++d) {
    kernels::abs_diff(leaf.column(d), padded, q[d], diffs, mode);
    for (std::uint32_t i = 0; i < leaf.slotuse; ++i) {
      out[i] = sq_dist_add(out[i], SqDist{diffs[i]} * diffs[i], overflow);
    }
  }
}

std::uint32_t leaf_find_exact(const LeafNode& leaf, std::span<const CoordKey> coords,
                              std::uint64_t id, SimdMode mode) noexcept {
  std::uint32_t pos = 0;
  while (pos < leaf.slotuse) {
    std::size_t hit = kernels::find_id(leaf.ids.data() + pos, leaf.slotuse - pos, id, mode);
    if (hit == leaf.slotuse - pos) return leaf.slotuse;
    std::uint32_t slot = pos + static_cast<std::uint32_t>(hit);
    bool eq = true;
    for (std::uint32_t d = 0; d < leaf.dims && eq; ++d) {
      eq = leaf.coord(slot, d) == coords[d];
    }
    if (eq) return slot;
    pos = slot + 1;
  }
  return leaf.slotuse;
}

}  // namespace skd
