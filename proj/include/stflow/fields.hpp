#pragma once

// Cell-valued property fields: the plain-text file format and deterministic
// synthetic generators standing in for layered benchmark data.
//
// File format: first line "nx ny", then nx*ny values, row-major with i
// fastest, whitespace separated.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "stflow/error.hpp"
#include "stflow/field.hpp"

namespace stflow {

inline Field2D read_field(std::istream& in, const std::string& what = "field") {
  long nx = 0, ny = 0;
  if (!(in >> nx >> ny)) throw IoError(what + ": missing 'nx ny' header");
  if (nx < 1 || ny < 1 || nx > (1 << 20) || ny > (1 << 20)) throw IoError(what + ": bad dimensions");
  Field2D f(static_cast<int>(nx), static_cast<int>(ny));
  for (auto& v : f.values)
    if (!(in >> v)) throw IoError(what + ": expected " + std::to_string(f.size()) + " values");
  std::string extra;
  if (in >> extra) throw IoError(what + ": more than " + std::to_string(f.size()) + " values");
  return f;
}

/// Reads a field and checks that every value is positive and finite.
inline Field2D load_field(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open field file '" + path + "'");
  Field2D f = read_field(in, path);
  for (double v : f.values)
    if (!(v > 0) || !std::isfinite(v)) throw IoError(path + ": values must be positive");
  return f;
}

inline std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline void write_field(std::ostream& out, const Field2D& f) {
  out << f.nx << ' ' << f.ny << '\n';
  for (int j = 0; j < f.ny; ++j) {
    for (int i = 0; i < f.nx; ++i) out << (i ? " " : "") << format_double(f(i, j));
    out << '\n';
  }
}

inline void save_field(const std::string& path, const Field2D& f) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write field file '" + path + "'");
  write_field(out, f);
  if (!out) throw IoError("error writing '" + path + "'");
}

enum class FieldKind { Gaussian, Channel };

inline FieldKind parse_field_kind(const std::string& s) {
  if (s == "gaussian") return FieldKind::Gaussian;
  if (s == "channel") return FieldKind::Channel;
  throw ConfigError("unknown synthetic field kind '" + s + "' (gaussian, channel)");
}

inline std::string to_string(FieldKind k) { return k == FieldKind::Gaussian ? "gaussian" : "channel"; }

struct SyntheticSpec {
  FieldKind kind = FieldKind::Gaussian;
  std::uint64_t seed = 1;
  double mean = 100.0;             // md; geometric mean (gaussian) or background (channel)
  double log_variance = 1.0;       // variance of ln k (gaussian)
  double correlation_length = 4;   // cells (gaussian)
  double contrast = 1000.0;        // channel / background (channel)
  double channel_width = 6.0;      // cells
  double amplitude = 0.2;          // sinuosity, fraction of nx
  double wavelength = 0.5;         // fraction of ny

  void validate() const {
    if (!(mean > 0)) throw ConfigError("synthetic mean must be positive");
    if (!(log_variance >= 0)) throw ConfigError("synthetic log_variance must be non-negative");
    if (!(correlation_length >= 0)) throw ConfigError("synthetic correlation_length must be non-negative");
    if (!(contrast >= 1)) throw ConfigError("synthetic contrast must be at least 1");
    if (!(channel_width > 0)) throw ConfigError("synthetic channel_width must be positive");
    if (!(wavelength > 0)) throw ConfigError("synthetic wavelength must be positive");
    if (!(amplitude >= 0)) throw ConfigError("synthetic amplitude must be non-negative");
  }

  bool operator==(const SyntheticSpec&) const = default;
};

namespace detail {

/// Separable Gaussian smoothing with reflecting edges.
inline Field2D smooth_gaussian(const Field2D& f, double sigma) {
  if (sigma <= 0) return f;
  const int r = std::max(1, static_cast<int>(std::ceil(3 * sigma)));
  std::vector<double> w(2 * r + 1);
  for (int k = -r; k <= r; ++k) w[k + r] = std::exp(-0.5 * k * k / (sigma * sigma));
  auto reflect = [](int i, int n) {
    while (i < 0 || i >= n) i = i < 0 ? -i - 1 : 2 * n - i - 1;
    return i;
  };
  Field2D tmp(f.nx, f.ny), out(f.nx, f.ny);
  for (int j = 0; j < f.ny; ++j)
    for (int i = 0; i < f.nx; ++i) {
      double s = 0;
      for (int k = -r; k <= r; ++k) s += w[k + r] * f(reflect(i + k, f.nx), j);
      tmp(i, j) = s;
    }
  for (int j = 0; j < f.ny; ++j)
    for (int i = 0; i < f.nx; ++i) {
      double s = 0;
      for (int k = -r; k <= r; ++k) s += w[k + r] * tmp(i, reflect(j + k, f.ny));
      out(i, j) = s;
    }
  return out;
}

}  // namespace detail

/// Deterministic per seed (the generator is std::mt19937_64; normal deviates
/// come from a Box-Muller transform so the stream does not depend on the
/// standard library's distribution implementation).
inline Field2D generate_synthetic_field(const SyntheticSpec& spec, int nx, int ny) {
  spec.validate();
  if (nx < 1 || ny < 1) throw ConfigError("synthetic field dimensions must be positive");
  std::mt19937_64 rng(spec.seed);
  auto uniform = [&] { return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53; };
  Field2D f(nx, ny);
  if (spec.kind == FieldKind::Gaussian) {
    for (std::size_t k = 0; k < f.size(); k += 2) {
      const double a = std::sqrt(-2 * std::log(uniform())), b = 2 * std::numbers::pi * uniform();
      f.values[k] = a * std::cos(b);
      if (k + 1 < f.size()) f.values[k + 1] = a * std::sin(b);
    }
    Field2D z = detail::smooth_gaussian(f, spec.correlation_length);
    double m = 0, v = 0;
    for (double x : z.values) m += x;
    m /= static_cast<double>(z.size());
    for (double x : z.values) v += (x - m) * (x - m);
    v /= static_cast<double>(z.size());
    const double scale = v > 0 ? std::sqrt(spec.log_variance / v) : 0.0;
    for (std::size_t k = 0; k < z.size(); ++k) f.values[k] = spec.mean * std::exp((z.values[k] - m) * scale);
    return f;
  }
  const double phase = 2 * std::numbers::pi * uniform();
  const double center = nx * (0.5 + 0.3 * (uniform() - 0.5));
  for (int j = 0; j < ny; ++j) {
    const double xc = center + spec.amplitude * nx * std::sin(2 * std::numbers::pi * (j + 0.5) / (spec.wavelength * ny) + phase);
    for (int i = 0; i < nx; ++i)
      f(i, j) = std::abs(i + 0.5 - xc) <= 0.5 * spec.channel_width ? spec.mean * spec.contrast : spec.mean;
  }
  return f;
}

}  // namespace stflow
