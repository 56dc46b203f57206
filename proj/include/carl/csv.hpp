#pragma once

// Minimal CSV output: header row, comma separator, locale-independent
// floating point with 15 significant digits.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <ostream>
#include <string>
#include <string_view>
#include <stdexcept>
#include <vector>

#include "carl/ensemble.hpp"
#include "carl/fpmodes.hpp"

namespace carl::csv {

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 15);
  return std::string(buf, res.ptr);
}

/// Quotes a field when it contains a separator, quote or newline.
inline std::string escape(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

class Row {
 public:
  Row& operator<<(double v) { return push(format_double(v)); }
  Row& operator<<(int v) { return push(std::to_string(v)); }
  Row& operator<<(long v) { return push(std::to_string(v)); }
  Row& operator<<(long long v) { return push(std::to_string(v)); }
  Row& operator<<(unsigned v) { return push(std::to_string(v)); }
  Row& operator<<(unsigned long v) { return push(std::to_string(v)); }
  Row& operator<<(unsigned long long v) { return push(std::to_string(v)); }
  Row& operator<<(bool v) { return push(v ? "1" : "0"); }
  Row& operator<<(std::string_view s) { return push(escape(s)); }
  Row& operator<<(const char* s) { return push(escape(s)); }

  const std::vector<std::string>& fields() const { return fields_; }

 private:
  Row& push(std::string s) {
    fields_.push_back(std::move(s));
    return *this;
  }
  std::vector<std::string> fields_;
};

class Writer {
 public:
  Writer(std::ostream& os, std::initializer_list<std::string_view> header)
      : os_(os), columns_(header.size()) {
    bool first = true;
    for (auto h : header) {
      if (!first) os_ << ',';
      os_ << h;
      first = false;
    }
    os_ << '\n';
  }

  void write(const Row& row) {
    if (row.fields().size() != columns_)
      throw std::logic_error("csv row has " + std::to_string(row.fields().size()) +
                             " fields, header has " + std::to_string(columns_));
    for (std::size_t i = 0; i < row.fields().size(); ++i) {
      if (i) os_ << ',';
      os_ << row.fields()[i];
    }
    os_ << '\n';
  }

 private:
  std::ostream& os_;
  std::size_t columns_;
};

inline void write_trajectory(std::ostream& os, const Trajectory& traj) {
  Writer w(os, {"tau", "re_a", "im_a", "abs_a_sq", "bunching", "mean_p", "omega_inst"});
  for (const auto& s : traj.samples) {
    Row r;
    r << s.tau << s.field.real() << s.field.imag() << s.abs_a_sq << s.bunching << s.mean_p
      << s.omega_inst;
    w.write(r);
  }
}

inline void write_ensemble_trajectory(std::ostream& os, const EnsembleTrajectory& traj) {
  Writer w(os, {"tau", "re_a", "im_a", "abs_a_sq", "bunching", "mean_p", "omega_inst", "var_p",
                "var_theta", "n_particles", "seed"});
  for (const auto& s : traj.samples) {
    Row r;
    r << s.tau << s.field.real() << s.field.imag() << s.abs_a_sq() << s.b() << s.mean_p
      << s.omega_inst << s.var_p << s.var_theta << traj.n_particles
      << static_cast<std::uint64_t>(traj.seed);
    w.write(r);
  }
}

}  // namespace carl::csv
