#pragma once

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "skd/types.hpp"

namespace skd {

// Row-major point container; coordinates are already in the ordinal domain.
class PointSet {
 public:
  PointSet() = default;
  explicit PointSet(std::uint32_t dims) : dims_(dims) {}

  std::uint32_t dims() const noexcept { return dims_; }
  std::size_t size() const noexcept { return ids_.size(); }
  bool empty() const noexcept { return ids_.empty(); }

  void reserve(std::size_t n) {
    coords_.reserve(n * dims_);
    ids_.reserve(n);
  }

  void push_row(std::span<const CoordKey> coords, std::uint64_t id) {
    coords_.insert(coords_.end(), coords.begin(), coords.end());
    ids_.push_back(id);
  }
  void push_row(std::initializer_list<CoordKey> coords, std::uint64_t id) {
    push_row(std::span<const CoordKey>(coords.begin(), coords.size()), id);
  }

  std::span<const CoordKey> row(std::size_t i) const noexcept {
    return {coords_.data() + i * dims_, dims_};
  }
  std::uint64_t id(std::size_t i) const noexcept { return ids_[i]; }

  Point point(std::size_t i) const {
    auto r = row(i);
    return Point{{r.begin(), r.end()}, ids_[i]};
  }

  const std::vector<CoordKey>& coords() const noexcept { return coords_; }
  const std::vector<std::uint64_t>& ids() const noexcept { return ids_; }

 private:
  std::uint32_t dims_ = 0;
  std::vector<CoordKey> coords_;
  std::vector<std::uint64_t> ids_;
};

// Carries the 0-based row that failed ingestion.
class EncodeError : public std::runtime_error {
 public:
  EncodeError(const std::string& what, std::size_t row)
      : std::runtime_error(what), row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

// Order-preserving ingestion. The double overload rejects non-finite values
// with the offending row; the unsigned overload clamps 2^64-1 to 2^64-2.
// An empty ids span numbers rows from 0.
PointSet encode_rows(std::span<const double> row_major, std::uint32_t dims,
                     std::span<const std::uint64_t> ids = {});
PointSet encode_rows(std::span<const std::uint64_t> row_major, std::uint32_t dims,
                     std::span<const std::uint64_t> ids = {});

// Binary dataset file, little-endian: magic "SKD1", u32 dims, u64 count, then
// count records of dims u64 coordinates followed by one u64 id.
void write_dataset(const std::filesystem::path& path, const PointSet& pts);
PointSet read_dataset(const std::filesystem::path& path);

// CSV: one row per point, dims numeric columns plus an optional trailing id
// column. A column whose every cell is a plain base-10 unsigned integer
// passes through as u64; otherwise it parses as double. Missing id column
// numbers rows from 0.
PointSet read_csv(const std::filesystem::path& path, std::uint32_t dims);

}  // namespace skd
