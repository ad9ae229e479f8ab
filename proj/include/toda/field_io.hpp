#ifndef TODA_FIELD_IO_HPP
#define TODA_FIELD_IO_HPP

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "toda/grid.hpp"

namespace toda {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// TODA1: one JSON header line, then n_r*n_theta little-endian binary64 values.

inline void write_toda1(std::ostream& os, const ScalarField& f, const std::string& name) {
  nlohmann::json header = {{"format", "TODA1"},
                           {"n_r", f.grid.n_r},
                           {"n_theta", f.grid.n_theta},
                           {"outer_radius", f.grid.outer_radius},
                           {"name", name}};
  os << header.dump() << '\n';
  for (double v : f.values) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    char bytes[8];
    for (int b = 0; b < 8; ++b) bytes[b] = static_cast<char>((bits >> (8 * b)) & 0xffu);
    os.write(bytes, 8);
  }
  if (!os) throw FormatError("failed writing TODA1 payload");
}

struct NamedField {
  ScalarField field;
  std::string name;
};

inline NamedField read_toda1(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw FormatError("missing TODA1 header line");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad TODA1 header: ") + e.what());
  }
  if (header.value("format", "") != "TODA1") throw FormatError("not a TODA1 file");
  PolarGrid g{header.at("n_r").get<std::size_t>(), header.at("n_theta").get<std::size_t>(),
              header.at("outer_radius").get<double>()};
  NamedField out{ScalarField(g), header.value("name", "")};
  for (double& v : out.field.values) {
    unsigned char bytes[8];
    is.read(reinterpret_cast<char*>(bytes), 8);
    if (is.gcount() != 8) throw FormatError("truncated TODA1 payload");
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[b]) << (8 * b);
    v = std::bit_cast<double>(bits);
  }
  return out;
}

inline void save_toda1(const std::filesystem::path& path, const ScalarField& f,
                       const std::string& name) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path.string());
  write_toda1(os, f, name);
}

inline NamedField load_toda1(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path.string());
  return read_toda1(is);
}

inline void write_csv(std::ostream& os, const ScalarField& f) {
  os << "rho,theta,value\n" << std::setprecision(17);
  for (std::size_t i = 0; i < f.grid.n_r; ++i)
    for (std::size_t k = 0; k < f.grid.n_theta; ++k)
      os << f.grid.rho(i) << ',' << f.grid.theta(k) << ',' << f(i, k) << '\n';
}

enum class ColorScale { Linear, Log };

/// Binary PPM heatmap of a polar field rendered onto a square image of the
/// disc |z| <= outer_radius; pixels outside the disc are white.
inline void write_ppm(std::ostream& os, const ScalarField& f, std::size_t pixels,
                      ColorScale scale = ColorScale::Linear) {
  const PolarGrid& g = f.grid;
  auto transform = [scale](double v) {
    if (scale == ColorScale::Log) return v > 0.0 ? std::log(v) : -std::numeric_limits<double>::infinity();
    return v;
  };
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double v : f.values) {
    const double t = transform(v);
    if (std::isfinite(t)) {
      lo = std::min(lo, t);
      hi = std::max(hi, t);
    }
  }
  if (!(hi > lo)) hi = lo + 1.0;
  os << "P6\n" << pixels << ' ' << pixels << "\n255\n";
  for (std::size_t py = 0; py < pixels; ++py) {
    for (std::size_t px = 0; px < pixels; ++px) {
      const double x = (2.0 * (static_cast<double>(px) + 0.5) / static_cast<double>(pixels) - 1.0) * g.outer_radius;
      const double y = (1.0 - 2.0 * (static_cast<double>(py) + 0.5) / static_cast<double>(pixels)) * g.outer_radius;
      const double rho = std::hypot(x, y);
      unsigned char rgb[3] = {255, 255, 255};
      if (rho < g.outer_radius) {
        double th = std::atan2(y, x);
        if (th < 0.0) th += 2.0 * std::numbers::pi;
        const auto i = std::min(g.n_r - 1, static_cast<std::size_t>(rho / g.dr()));
        const auto k = static_cast<std::size_t>(std::lround(th / g.dtheta())) % g.n_theta;
        double t = transform(f(i, k));
        t = std::isfinite(t) ? std::clamp((t - lo) / (hi - lo), 0.0, 1.0) : 0.0;
        // blue -> red ramp through white-ish green
        rgb[0] = static_cast<unsigned char>(255.0 * t);
        rgb[1] = static_cast<unsigned char>(255.0 * (1.0 - std::abs(2.0 * t - 1.0)));
        rgb[2] = static_cast<unsigned char>(255.0 * (1.0 - t));
      }
      os.write(reinterpret_cast<const char*>(rgb), 3);
    }
  }
}

}  // namespace toda

#endif  // TODA_FIELD_IO_HPP
