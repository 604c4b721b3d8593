#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>

#include "choquard/grid.hpp"

namespace choquard {

/// Raised for unreadable or malformed field files.
class FieldIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::uint64_t to_little_endian(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  std::uint64_t r = 0;
  for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xffu) << (8 * (7 - i));
  return r;
}

inline std::string format_exact(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace detail

// CHQF1 layout:
//   "CHQF1\n" "dim=<d>\n" "m=<m>\n" "L=<decimal>\n" "end\n"
//   followed by m^dim little-endian IEEE-754 doubles, row-major.

inline void write_chqf(std::ostream& os, const Field& u) {
  const Grid& g = u.grid;
  os << "CHQF1\n"
     << "dim=" << g.dim() << "\n"
     << "m=" << g.points_per_axis() << "\n"
     << "L=" << detail::format_exact(g.box()) << "\n"
     << "end\n";
  for (double v : u.values) {
    const std::uint64_t bits = detail::to_little_endian(std::bit_cast<std::uint64_t>(v));
    char buf[8];
    std::memcpy(buf, &bits, 8);
    os.write(buf, 8);
  }
  if (!os) throw FieldIoError("write_chqf: stream write failed");
}

inline Field read_chqf(std::istream& is) {
  std::string line;
  auto next = [&](const char* what) {
    if (!std::getline(is, line)) throw FieldIoError(std::string("read_chqf: missing ") + what);
    return line;
  };
  if (next("magic") != "CHQF1") throw FieldIoError("read_chqf: bad magic (expected CHQF1)");

  auto value_of = [&](const std::string& key) {
    const std::string l = next(key.c_str());
    if (l.rfind(key + "=", 0) != 0) throw FieldIoError("read_chqf: expected header line '" + key + "=...'");
    return l.substr(key.size() + 1);
  };
  int dim = 0;
  int m = 0;
  double box = 0.0;
  try {
    dim = std::stoi(value_of("dim"));
    m = std::stoi(value_of("m"));
    box = std::stod(value_of("L"));
  } catch (const std::logic_error& e) {
    throw FieldIoError(std::string("read_chqf: malformed header value: ") + e.what());
  }
  if (next("end marker") != "end") throw FieldIoError("read_chqf: header not terminated by 'end'");

  Grid grid = [&] {
    try {
      return Grid(dim, m, box);
    } catch (const std::invalid_argument& e) {
      throw FieldIoError(std::string("read_chqf: invalid grid in header: ") + e.what());
    }
  }();
  Field u(grid);
  for (double& v : u.values) {
    char buf[8];
    if (!is.read(buf, 8)) throw FieldIoError("read_chqf: truncated payload");
    std::uint64_t bits = 0;
    std::memcpy(&bits, buf, 8);
    v = std::bit_cast<double>(detail::to_little_endian(bits));
  }
  return u;
}

/// Writes via a temporary sibling file and renames it into place.
inline void save_chqf(const std::filesystem::path& path, const Field& u) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw FieldIoError("save_chqf: cannot open " + tmp.string());
    write_chqf(os, u);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw FieldIoError("save_chqf: rename to " + path.string() + " failed: " + ec.message());
}

inline Field load_chqf(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FieldIoError("load_chqf: cannot open " + path.string());
  return read_chqf(is);
}

}  // namespace choquard
