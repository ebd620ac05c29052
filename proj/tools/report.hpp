#pragma once

// Ordered metric reports for the bench CLI. Key order is insertion order and
// identical between CSV and JSON; floats render with 6 significant digits in
// both, so reruns of the same measurement produce byte-identical files.

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

namespace skdbench {

enum class Format : std::uint8_t { Csv, Json };

Format parse_format(const std::string& s);

using MetricValue = std::variant<std::uint64_t, double, std::string>;

class Report {
 public:
  void add(std::string key, std::uint64_t v) { rows_.emplace_back(std::move(key), v); }
  void add(std::string key, double v) { rows_.emplace_back(std::move(key), v); }
  void add(std::string key, std::string v) {
    rows_.emplace_back(std::move(key), std::move(v));
  }
  void add(std::string key, const char* v) { add(std::move(key), std::string(v)); }
  template <typename T>
    requires(std::is_integral_v<T> && !std::is_same_v<T, std::uint64_t>)
  void add(std::string key, T v) {
    add(std::move(key), static_cast<std::uint64_t>(v));
  }

  const std::vector<std::pair<std::string, MetricValue>>& rows() const { return rows_; }

 private:
  std::vector<std::pair<std::string, MetricValue>> rows_;
};

// 6 significant digits, shortest form ("%.6g").
std::string format_double(double v);

// Percentage triple over the total a+b+c that sums to exactly 100 at 4
// decimal places: integer shares by largest remainder, so no float rounding
// can break the sum. All three values are 0 when the total is 0.
void add_pct_triple(Report& r, const char* ka, const char* kb, const char* kc,
                    std::uint64_t a, std::uint64_t b, std::uint64_t c);

void emit_report(const Report& r, Format fmt, std::ostream& os);

// Writes to `out`, or stdout when `out` is empty.
void write_report(const Report& r, Format fmt, const std::filesystem::path& out);

}  // namespace skdbench
