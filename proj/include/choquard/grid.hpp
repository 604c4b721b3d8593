#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "choquard/fft.hpp"

namespace choquard {

/// Uniform periodic cube [-L/2, L/2)^dim with m points per axis.
///
/// Node i on an axis sits at -L/2 + i*L/m, so the origin is node m/2.
/// Values are stored row-major with axis 0 slowest.
class Grid {
 public:
  /// Upper bound on m^dim; 256^3 fields are 128 MiB each.
  static constexpr std::size_t default_point_budget = std::size_t{1} << 24;

  Grid(int dim, int m, double box, std::size_t point_budget = default_point_budget)
      : dim_(dim), m_(m), box_(box) {
    if (dim < 1 || dim > 3) {
      throw std::invalid_argument("Grid: dim must be 1, 2 or 3 (got " + std::to_string(dim) + ")");
    }
    if (m < 8 || (m & (m - 1)) != 0) {
      throw std::invalid_argument("Grid: m must be a power of two >= 8 (got " + std::to_string(m) + ")");
    }
    if (!(box > 0.0) || !std::isfinite(box)) {
      throw std::invalid_argument("Grid: box length L must be positive and finite");
    }
    size_ = 1;
    for (int d = 0; d < dim; ++d) size_ *= static_cast<std::size_t>(m);
    if (size_ > point_budget) {
      throw std::invalid_argument("Grid: m^dim = " + std::to_string(size_) + " exceeds the point budget " +
                                  std::to_string(point_budget));
    }
  }

  int dim() const { return dim_; }
  int points_per_axis() const { return m_; }
  double box() const { return box_; }
  double spacing() const { return box_ / m_; }
  std::size_t size() const { return size_; }
  /// Volume of one lattice cell, spacing^dim.
  double cell_volume() const { return std::pow(spacing(), dim_); }
  double coordinate(int i) const { return -0.5 * box_ + i * spacing(); }
  /// Wavenumber of signed Fourier index n.
  double wavenumber(int n) const { return 2.0 * std::numbers::pi * n / box_; }
  /// Signed Fourier index of storage index j on a full axis.
  int signed_mode(int j) const { return j <= m_ / 2 ? j : j - m_; }

  std::array<int, 3> unravel(std::size_t idx) const {
    std::array<int, 3> ijk{0, 0, 0};
    for (int d = dim_ - 1; d >= 0; --d) {
      ijk[static_cast<std::size_t>(d)] = static_cast<int>(idx % static_cast<std::size_t>(m_));
      idx /= static_cast<std::size_t>(m_);
    }
    return ijk;
  }

  std::array<double, 3> position(std::size_t idx) const {
    const auto ijk = unravel(idx);
    std::array<double, 3> x{0.0, 0.0, 0.0};
    for (int d = 0; d < dim_; ++d) x[static_cast<std::size_t>(d)] = coordinate(ijk[static_cast<std::size_t>(d)]);
    return x;
  }

  RealFft& workspace() const { return fft_workspace(dim_, m_); }

  friend bool operator==(const Grid& a, const Grid& b) {
    return a.dim_ == b.dim_ && a.m_ == b.m_ && a.box_ == b.box_;
  }

 private:
  int dim_;
  int m_;
  double box_;
  std::size_t size_ = 0;
};

/// Real samples of a function on a Grid.
struct Field {
  Grid grid;
  std::vector<double> values;

  explicit Field(const Grid& g) : grid(g), values(g.size(), 0.0) {}
  Field(const Grid& g, std::vector<double> v) : grid(g), values(std::move(v)) {
    if (values.size() != grid.size()) throw std::invalid_argument("Field: value count does not match m^dim");
  }

  std::size_t size() const { return values.size(); }
  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }

  Field& operator*=(double c) {
    for (double& v : values) v *= c;
    return *this;
  }
};

inline void require_same_grid(const Field& a, const Field& b, const char* where) {
  if (!(a.grid == b.grid)) throw std::invalid_argument(std::string(where) + ": fields live on different grids");
}

/// Fills a field with f(x) where x is the node position (unused axes are 0).
template <class Fn>
Field sample(const Grid& grid, Fn&& f) {
  Field out(grid);
  for (std::size_t i = 0; i < grid.size(); ++i) out[i] = f(grid.position(i));
  return out;
}

/// Visits every stored mode of the half spectrum produced by RealFft.
///
/// fn(index, n, weight) receives the flat spectral index, the signed integer
/// frequency per axis, and the multiplicity of that mode in the full
/// spectrum (2 for last-axis modes that have a conjugate partner, else 1).
template <class Fn>
void for_each_mode(const Grid& grid, Fn&& fn) {
  const int m = grid.points_per_axis();
  const int half = m / 2 + 1;
  const int dim = grid.dim();
  const int outer_m1 = dim >= 2 ? m : 1;
  const int outer_m0 = dim >= 3 ? m : 1;
  std::size_t idx = 0;
  for (int a = 0; a < outer_m0; ++a) {
    for (int b = 0; b < outer_m1; ++b) {
      for (int c = 0; c < half; ++c, ++idx) {
        std::array<int, 3> n{0, 0, 0};
        if (dim == 3) n = {grid.signed_mode(a), grid.signed_mode(b), c};
        else if (dim == 2) n = {grid.signed_mode(b), c, 0};
        else n = {c, 0, 0};
        const double weight = (c == 0 || c == m / 2) ? 1.0 : 2.0;
        fn(idx, n, weight);
      }
    }
  }
}

/// Physical |k|^2 for a signed frequency triple.
inline double wavenumber_sq(const Grid& grid, const std::array<int, 3>& n) {
  const double k0 = grid.wavenumber(1);
  return k0 * k0 * static_cast<double>(n[0] * n[0] + n[1] * n[1] + n[2] * n[2]);
}

/// Periodic rectangle rule: spacing^dim * sum(values).
inline double integrate(const Field& u) {
  double s = 0.0;
  for (double v : u.values) s += v;
  return s * u.grid.cell_volume();
}

/// Integral of u*v.
inline double inner(const Field& u, const Field& v) {
  require_same_grid(u, v, "inner");
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
  return s * u.grid.cell_volume();
}

/// ||u||_2 in physical space.
inline double mass(const Field& u) { return std::sqrt(inner(u, u)); }

/// ||u||_2^2 evaluated from the spectrum (Parseval form).
inline double spectral_norm_sq(const Field& u) {
  auto& fft = u.grid.workspace();
  std::copy(u.values.begin(), u.values.end(), fft.real().begin());
  fft.forward();
  const auto spec = fft.spectrum();
  double s = 0.0;
  for_each_mode(u.grid, [&](std::size_t idx, const std::array<int, 3>&, double w) { s += w * std::norm(spec[idx]); });
  return s * u.grid.cell_volume() / static_cast<double>(u.size());
}

/// ||grad u||_2^2 from the spectrum: sum_k |k|^2 |u_k|^2 with the same
/// normalization as integrate().
inline double grad_norm_sq(const Field& u) {
  auto& fft = u.grid.workspace();
  std::copy(u.values.begin(), u.values.end(), fft.real().begin());
  fft.forward();
  const auto spec = fft.spectrum();
  double s = 0.0;
  for_each_mode(u.grid, [&](std::size_t idx, const std::array<int, 3>& n, double w) {
    s += w * wavenumber_sq(u.grid, n) * std::norm(spec[idx]);
  });
  return s * u.grid.cell_volume() / static_cast<double>(u.size());
}

/// Spectral -Laplacian. Consistent with grad_norm_sq: inner(u, neg_laplacian(u)) == grad_norm_sq(u).
inline Field neg_laplacian(const Field& u) {
  auto& fft = u.grid.workspace();
  std::copy(u.values.begin(), u.values.end(), fft.real().begin());
  fft.forward();
  auto spec = fft.spectrum();
  const double norm = 1.0 / static_cast<double>(u.size());
  for_each_mode(u.grid, [&](std::size_t idx, const std::array<int, 3>& n, double) {
    spec[idx] *= wavenumber_sq(u.grid, n) * norm;
  });
  fft.backward();
  Field out(u.grid);
  std::copy(fft.real().begin(), fft.real().end(), out.values.begin());
  return out;
}

/// Applies the Fourier multiplier symbol(|k|^2) to u.
template <class Symbol>
Field apply_radial_multiplier(const Field& u, Symbol&& symbol) {
  auto& fft = u.grid.workspace();
  std::copy(u.values.begin(), u.values.end(), fft.real().begin());
  fft.forward();
  auto spec = fft.spectrum();
  const double norm = 1.0 / static_cast<double>(u.size());
  for_each_mode(u.grid, [&](std::size_t idx, const std::array<int, 3>& n, double) {
    spec[idx] *= symbol(wavenumber_sq(u.grid, n)) * norm;
  });
  fft.backward();
  Field out(u.grid);
  std::copy(fft.real().begin(), fft.real().end(), out.values.begin());
  return out;
}

/// (target / mass(u)) * u.
inline Field rescale_mass(const Field& u, double target) {
  const double current = mass(u);
  if (!(current > 0.0)) throw std::invalid_argument("rescale_mass: field has zero mass");
  Field out = u;
  out *= target / current;
  return out;
}

}  // namespace choquard
