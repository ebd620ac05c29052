#include "skd/dataset.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>

namespace skd {

namespace {

constexpr std::array<char, 4> kMagic = {'S', 'K', 'D', '1'};

void put_u32(std::ostream& os, std::uint32_t v) {
  std::array<char, 4> b;
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>(v >> (8 * i));
  os.write(b.data(), b.size());
}

void put_u64(std::ostream& os, std::uint64_t v) {
  std::array<char, 8> b;
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>(v >> (8 * i));
  os.write(b.data(), b.size());
}

std::uint32_t get_u32(std::istream& is) {
  std::array<unsigned char, 4> b;
  is.read(reinterpret_cast<char*>(b.data()), b.size());
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t{b[i]} << (8 * i);
  return v;
}

std::uint64_t get_u64(std::istream& is) {
  std::array<unsigned char, 8> b;
  is.read(reinterpret_cast<char*>(b.data()), b.size());
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t{b[i]} << (8 * i);
  return v;
}

}  // namespace

PointSet encode_rows(std::span<const double> row_major, std::uint32_t dims,
                     std::span<const std::uint64_t> ids) {
  std::size_t n = dims == 0 ? 0 : row_major.size() / dims;
  PointSet out(dims);
  out.reserve(n);
  std::vector<CoordKey> buf(dims);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::uint32_t d = 0; d < dims; ++d) {
      double v = row_major[r * dims + d];
      if (!std::isfinite(v)) throw EncodeError("non-finite coordinate", r);
      buf[d] = encode_f64(v);
    }
    out.push_row(buf, ids.empty() ? r : ids[r]);
  }
  return out;
}

PointSet encode_rows(std::span<const std::uint64_t> row_major, std::uint32_t dims,
                     std::span<const std::uint64_t> ids) {
  std::size_t n = dims == 0 ? 0 : row_major.size() / dims;
  PointSet out(dims);
  out.reserve(n);
  std::vector<CoordKey> buf(dims);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::uint32_t d = 0; d < dims; ++d) buf[d] = encode_u64(row_major[r * dims + d]);
    out.push_row(buf, ids.empty() ? r : ids[r]);
  }
  return out;
}

void write_dataset(const std::filesystem::path& path, const PointSet& pts) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
  os.write(kMagic.data(), kMagic.size());
  put_u32(os, pts.dims());
  put_u64(os, pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (CoordKey c : pts.row(i)) put_u64(os, c);
    put_u64(os, pts.id(i));
  }
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

PointSet read_dataset(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path.string());
  std::array<char, 4> magic;
  is.read(magic.data(), magic.size());
  if (!is || magic != kMagic) throw std::runtime_error("bad dataset magic: " + path.string());
  std::uint32_t dims = get_u32(is);
  std::uint64_t n = get_u64(is);
  if (!is || dims == 0 || dims > kMaxDims) {
    throw std::runtime_error("bad dataset header: " + path.string());
  }
  PointSet out(dims);
  out.reserve(n);
  std::vector<CoordKey> buf(dims);
  for (std::uint64_t i = 0; i < n; ++i) {
    for (std::uint32_t d = 0; d < dims; ++d) buf[d] = get_u64(is);
    std::uint64_t id = get_u64(is);
    if (!is) throw std::runtime_error("truncated dataset: " + path.string());
    out.push_row(buf, id);
  }
  return out;
}

namespace {

bool parse_u64(std::string_view cell, std::uint64_t& out) {
  if (cell.empty()) return false;
  auto [p, ec] = std::from_chars(cell.begin(), cell.end(), out, 10);
  return ec == std::errc{} && p == cell.end();
}

bool parse_f64(std::string_view cell, double& out) {
  if (cell.empty()) return false;
  auto [p, ec] = std::from_chars(cell.begin(), cell.end(), out);
  return ec == std::errc{} && p == cell.end();
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

}  // namespace

PointSet read_csv(const std::filesystem::path& path, std::uint32_t dims) {
  if (dims == 0 || dims > kMaxDims) throw std::runtime_error("bad dims for CSV ingestion");
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open: " + path.string());

  std::vector<std::vector<std::string>> cells;  // per row: dims (+ optional id)
  std::string line;
  bool has_id_col = false;
  while (std::getline(is, line)) {
    std::string_view lv = trim(line);
    if (lv.empty()) continue;
    std::vector<std::string> row;
    std::size_t start = 0;
    while (true) {
      std::size_t comma = lv.find(',', start);
      std::string_view cell =
          comma == std::string_view::npos ? lv.substr(start) : lv.substr(start, comma - start);
      row.emplace_back(trim(cell));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (row.size() != dims && row.size() != dims + 1) {
      throw EncodeError("unexpected column count", cells.size());
    }
    if (row.size() == dims + 1) has_id_col = true;
    cells.push_back(std::move(row));
  }
  for (std::size_t r = 0; r < cells.size(); ++r) {
    if (has_id_col && cells[r].size() != dims + 1) {
      throw EncodeError("inconsistent id column", r);
    }
  }

  // A column is u64 iff every cell parses as a plain unsigned integer.
  std::vector<bool> col_is_u64(dims, true);
  for (const auto& row : cells) {
    for (std::uint32_t d = 0; d < dims; ++d) {
      std::uint64_t u;
      if (!parse_u64(row[d], u)) col_is_u64[d] = false;
    }
  }

  PointSet out(dims);
  out.reserve(cells.size());
  std::vector<CoordKey> buf(dims);
  for (std::size_t r = 0; r < cells.size(); ++r) {
    for (std::uint32_t d = 0; d < dims; ++d) {
      if (col_is_u64[d]) {
        std::uint64_t u;
        parse_u64(cells[r][d], u);
        buf[d] = encode_u64(u);
      } else {
        double v;
        if (!parse_f64(cells[r][d], v) || !std::isfinite(v)) {
          throw EncodeError("unparseable or non-finite cell", r);
        }
        buf[d] = encode_f64(v);
      }
    }
    std::uint64_t id = r;
    if (has_id_col && !parse_u64(cells[r][dims], id)) {
      throw EncodeError("unparseable id", r);
    }
    out.push_row(buf, id);
  }
  return out;
}

}  // namespace skd
