#include "report.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <stdexcept>

#include "json.hpp"

namespace skdbench {

Format parse_format(const std::string& s) {
  if (s == "csv") return Format::Csv;
  if (s == "json") return Format::Json;
  throw std::invalid_argument("unknown format: " + s + " (expected csv or json)");
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

void add_pct_triple(Report& r, const char* ka, const char* kb, const char* kc,
                    std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  const std::uint64_t n = a + b + c;
  double out[3] = {0.0, 0.0, 0.0};
  if (n > 0) {
    constexpr std::uint64_t kScale = 10000;
    const std::uint64_t cnt[3] = {a, b, c};
    std::uint64_t unit[3], rem[3], used = 0;
    for (int i = 0; i < 3; ++i) {
      std::uint64_t num = 100 * kScale * cnt[i];
      unit[i] = num / n;
      rem[i] = num % n;
      used += unit[i];
    }
    for (std::uint64_t left = 100 * kScale - used; left > 0; --left) {
      int best = 0;
      for (int i = 1; i < 3; ++i) {
        if (rem[i] > rem[best]) best = i;
      }
      ++unit[best];
      rem[best] = 0;
    }
    for (int i = 0; i < 3; ++i) out[i] = static_cast<double>(unit[i]) / kScale;
  }
  r.add(ka, out[0]);
  r.add(kb, out[1]);
  r.add(kc, out[2]);
}

namespace {

void emit_csv(const Report& r, std::ostream& os) {
  os << "metric,value\n";
  for (const auto& [key, val] : r.rows()) {
    os << key << ',';
    std::visit(
        [&](const auto& v) {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, double>) {
            os << format_double(v);
          } else {
            os << v;
          }
        },
        val);
    os << '\n';
  }
}

void emit_json(const Report& r, std::ostream& os) {
  nlohmann::ordered_json j;
  for (const auto& [key, val] : r.rows()) {
    std::visit(
        [&](const auto& v) {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, double>) {
            // Round-trip through the 6-digit form so the JSON text matches CSV.
            j[key] = std::stod(format_double(v));
          } else {
            j[key] = v;
          }
        },
        val);
  }
  os << j.dump(2) << '\n';
}

}  // namespace

void emit_report(const Report& r, Format fmt, std::ostream& os) {
  if (fmt == Format::Csv) {
    emit_csv(r, os);
  } else {
    emit_json(r, os);
  }
}

void write_report(const Report& r, Format fmt, const std::filesystem::path& out) {
  if (out.empty()) {
    emit_report(r, fmt, std::cout);
    return;
  }
  std::ofstream f(out);
  if (!f) throw std::runtime_error("cannot open " + out.string() + " for writing");
  emit_report(r, fmt, f);
}

}  // namespace skdbench
