#pragma once

#include <array>
#include <bit>
#include <cassert>
#include <cstdint>
#include <cstring>
#include <span>
#include <vector>

#include "skd/types.hpp"

namespace skd {

// Inner-node splitter layouts. Every layout fills exactly one 64-byte block:
// 8 x 64-bit, 16 x 32-bit, or 32 x 16-bit physical slots, holding at most
// fanout-1 real splitters; unused slots are padded with the layout's max code.
enum class Layout : std::uint8_t { N64 = 0, N32 = 1, N16 = 2 };

constexpr unsigned layout_fanout(Layout l) noexcept {
  switch (l) {
    case Layout::N64: return 8;
    case Layout::N32: return 16;
    case Layout::N16: return 32;
  }
  return 0;
}

constexpr unsigned layout_max_splitters(Layout l) noexcept { return layout_fanout(l) - 1; }

constexpr unsigned layout_width_bits(Layout l) noexcept {
  switch (l) {
    case Layout::N64: return 64;
    case Layout::N32: return 32;
    case Layout::N16: return 16;
  }
  return 0;
}

// The padding code: all ones at the layout's width.
constexpr std::uint64_t layout_max_code(Layout l) noexcept {
  return layout_width_bits(l) == 64 ? ~std::uint64_t{0}
                                    : (std::uint64_t{1} << layout_width_bits(l)) - 1;
}

// Right-shift so that every coordinate <= anchor fits the layout's width.
// anchor is an upper bound on every splitter the node may store.
constexpr std::uint8_t compute_shift(CoordKey anchor, Layout l) noexcept {
  unsigned width = layout_width_bits(l);
  unsigned bits = static_cast<unsigned>(std::bit_width(anchor));
  return static_cast<std::uint8_t>(bits > width ? bits - width : 0);
}

constexpr std::uint64_t quantize(CoordKey v, std::uint8_t shift) noexcept {
  return v >> shift;
}

// The value a stored code represents; low `shift` bits are zero.
constexpr CoordKey effective_value(std::uint64_t code, std::uint8_t shift) noexcept {
  return code << shift;
}

struct InnerNode;
struct LeafNode;

// Tagged pointer to either node kind; the low bit marks leaves. Inner nodes
// are 64-byte aligned and leaves at least 8-byte aligned, so the bit is free.
class NodeRef {
 public:
  NodeRef() = default;
  static NodeRef from(InnerNode* n) noexcept {
    return NodeRef{reinterpret_cast<std::uintptr_t>(n)};
  }
  static NodeRef from(LeafNode* l) noexcept {
    return NodeRef{reinterpret_cast<std::uintptr_t>(l) | kLeafTag};
  }

  explicit operator bool() const noexcept { return bits_ != 0; }
  bool is_leaf() const noexcept { return bits_ & kLeafTag; }
  bool is_inner() const noexcept { return bits_ && !(bits_ & kLeafTag); }

  InnerNode* inner() const noexcept {
    assert(is_inner());
    return reinterpret_cast<InnerNode*>(bits_);
  }
  LeafNode* leaf() const noexcept {
    assert(is_leaf());
    return reinterpret_cast<LeafNode*>(bits_ & ~kLeafTag);
  }

  bool operator==(const NodeRef&) const = default;

 private:
  static constexpr std::uintptr_t kLeafTag = 1;
  explicit NodeRef(std::uintptr_t bits) : bits_(bits) {}
  std::uintptr_t bits_ = 0;
};

// One multiway inner node: a sorted run of quantized splitters over a single
// dimension plus slotuse+1 children. Child i covers values whose quantized
// code is >= code(i-1)'s effective value and < code(i)'s; equal keys route
// right.
struct alignas(64) InnerNode {
  union SplitterBlock {
    std::array<std::uint64_t, 8> w64;
    std::array<std::uint32_t, 16> w32;
    std::array<std::uint16_t, 32> w16;
  };

  SplitterBlock splitters;
  std::array<NodeRef, 32> children{};
  Layout layout = Layout::N64;
  std::uint8_t split_dim = 0;
  std::uint8_t shift = 0;
  std::uint8_t slotuse = 0;  // real splitters; children in use = slotuse + 1

  InnerNode() { reset(Layout::N64, 0, 0); }
  InnerNode(Layout l, std::uint8_t dim, std::uint8_t s) { reset(l, dim, s); }

  void reset(Layout l, std::uint8_t dim, std::uint8_t s) noexcept {
    layout = l;
    split_dim = dim;
    shift = s;
    slotuse = 0;
    fill_padding(0);
    children.fill(NodeRef{});
  }

  unsigned fanout() const noexcept { return layout_fanout(layout); }
  unsigned max_splitters() const noexcept { return layout_max_splitters(layout); }

  std::uint64_t code(unsigned i) const noexcept {
    switch (layout) {
      case Layout::N64: return splitters.w64[i];
      case Layout::N32: return splitters.w32[i];
      case Layout::N16: return splitters.w16[i];
    }
    return 0;
  }

  void set_code(unsigned i, std::uint64_t c) noexcept {
    assert(c <= layout_max_code(layout));
    switch (layout) {
      case Layout::N64: splitters.w64[i] = c; break;
      case Layout::N32: splitters.w32[i] = static_cast<std::uint32_t>(c); break;
      case Layout::N16: splitters.w16[i] = static_cast<std::uint16_t>(c); break;
    }
  }

  CoordKey effective_splitter(unsigned i) const noexcept {
    return effective_value(code(i), shift);
  }

  // Pads slots [from, fanout) with the layout's max code.
  void fill_padding(unsigned from) noexcept {
    for (unsigned i = from; i < fanout(); ++i) set_code(i, layout_max_code(layout));
  }

  // Inserts splitter code c at slot pos, shifting codes and the child entries
  // right of pos. children[pos] and children[pos+1] become the caller's to
  // set. Requires slotuse < max_splitters().
  void insert_splitter(unsigned pos, std::uint64_t c) noexcept {
    assert(slotuse < max_splitters());
    for (unsigned i = slotuse; i > pos; --i) set_code(i, code(i - 1));
    set_code(pos, c);
    for (unsigned i = slotuse + 1; i > pos; --i) children[i] = children[i - 1];
    ++slotuse;
  }

  // Removes child at slot pos and the splitter between it and its neighbor:
  // splitter pos for pos < slotuse, else splitter pos-1. Requires slotuse > 0.
  void remove_child(unsigned pos) noexcept {
    assert(slotuse > 0 && pos <= slotuse);
    unsigned split_pos = pos < slotuse ? pos : pos - 1;
    for (unsigned i = split_pos; i + 1 < slotuse; ++i) set_code(i, code(i + 1));
    for (unsigned i = pos; i < slotuse; ++i) children[i] = children[i + 1];
    children[slotuse] = NodeRef{};
    --slotuse;
    fill_padding(slotuse);
  }
};

static_assert(sizeof(InnerNode::SplitterBlock) == 64);
static_assert(alignof(InnerNode) == 64);

enum class LeafType : std::uint8_t { Light, Heavy, Outlier };

// Leaf storage is columnar: one contiguous lane array per dimension plus an
// id array, physically padded to a multiple of kBlockWidth lanes. Padding
// lanes replicate the last real row so kernels can run whole blocks.
struct LeafNode {
  std::uint32_t dims = 0;
  std::uint32_t slotuse = 0;
  std::uint32_t cap = 0;  // physical lanes per column, multiple of kBlockWidth
  LeafType type = LeafType::Light;
  std::uint8_t promo = 0;  // outlier split-retry exponent
  std::vector<CoordKey> cols;
  std::vector<std::uint64_t> ids;
  BoundingBox box;

  explicit LeafNode(std::uint32_t d) : dims(d) {
    box.lo.assign(d, kMaxCoord);
    box.hi.assign(d, 0);
  }

  CoordKey* column(std::uint32_t d) noexcept { return cols.data() + std::size_t{d} * cap; }
  const CoordKey* column(std::uint32_t d) const noexcept {
    return cols.data() + std::size_t{d} * cap;
  }

  CoordKey coord(std::uint32_t slot, std::uint32_t d) const noexcept {
    return column(d)[slot];
  }

  std::uint32_t padded_count() const noexcept {
    return (slotuse + kBlockWidth - 1) / kBlockWidth * kBlockWidth;
  }

  Point point(std::uint32_t slot) const {
    Point p;
    p.coords.resize(dims);
    for (std::uint32_t d = 0; d < dims; ++d) p.coords[d] = coord(slot, d);
    p.id = ids[slot];
    return p;
  }

  void reserve_lanes(std::uint32_t n);
  void append(std::span<const CoordKey> coords, std::uint64_t id);
  // Removes a slot by swapping the last row in; does not touch the box.
  void remove_swap(std::uint32_t slot) noexcept;
  // Rewrites padding lanes from the last real row.
  void repad() noexcept;
  void recompute_box() noexcept;
  bool on_box_boundary(std::uint32_t slot) const noexcept;
};

void destroy_subtree(NodeRef n) noexcept;

// Child index for key x: the count of splitters whose effective value is
// <= x, evaluated at the stored width via the quantized compare.
unsigned locate_child(const InnerNode& n, CoordKey x, SimdMode mode) noexcept;

// Inclusive child range [first, last] overlapping [lo, hi] in the node's
// split dimension.
std::pair<unsigned, unsigned> locate_children(const InnerNode& n, CoordKey lo,
                                              CoordKey hi, SimdMode mode) noexcept;

// Appends slots of points inside q to out. dim_skip allows skipping
// dimensions whose query interval covers the leaf box. Counts one
// points_compared per scanned lane per evaluated dimension.
void leaf_collect_range(const LeafNode& leaf, const RangeQuery& q, bool dim_skip,
                        SimdMode mode, std::vector<std::uint32_t>& out,
                        QueryCounters* counters);

// Squared distances from q to every real slot; out has slotuse entries.
void leaf_sq_distances(const LeafNode& leaf, std::span<const CoordKey> q,
                       SimdMode mode, SqDist* out, bool& overflow);

// Slot holding exactly (coords, id), or slotuse if absent.
std::uint32_t leaf_find_exact(const LeafNode& leaf, std::span<const CoordKey> coords,
                              std::uint64_t id, SimdMode mode) noexcept;

}  // namespace skd
