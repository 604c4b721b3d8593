#pragma once

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <stdexcept>
#include <utility>

namespace choquard {

namespace detail {

// FFTW planning is not thread-safe; execution with a plan's own buffers is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace detail

/// Unnormalized real-to-complex transform pair on an m^rank periodic lattice.
///
/// Owns its buffers and plans. The complex side holds the half spectrum
/// (last axis m/2+1). backward() overwrites the spectrum buffer, and
/// backward(forward(x)) == m^rank * x.
class RealFft {
 public:
  RealFft(int rank, int m) : rank_(rank), m_(m) {
    if (rank < 1 || rank > 3) throw std::invalid_argument("RealFft: rank must be 1, 2 or 3");
    real_size_ = 1;
    for (int d = 0; d < rank; ++d) real_size_ *= static_cast<std::size_t>(m);
    spectral_size_ = real_size_ / static_cast<std::size_t>(m) * static_cast<std::size_t>(m / 2 + 1);

    real_ = static_cast<double*>(fftw_malloc(sizeof(double) * real_size_));
    spec_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * spectral_size_));
    if (real_ == nullptr || spec_ == nullptr) {
      release();
      throw std::bad_alloc();
    }

    int n[3] = {m, m, m};
    std::lock_guard lock(detail::fftw_planner_mutex());
    // ESTIMATE planning picks the same algorithm on every run, which keeps
    // results bit-reproducible.
    fwd_ = fftw_plan_dft_r2c(rank, n, real_, spec_, FFTW_ESTIMATE);
    bwd_ = fftw_plan_dft_c2r(rank, n, spec_, real_, FFTW_ESTIMATE);
    if (fwd_ == nullptr || bwd_ == nullptr) {
      release();
      throw std::runtime_error("RealFft: FFTW planning failed");
    }
  }

  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  ~RealFft() { release(); }

  int rank() const { return rank_; }
  int points_per_axis() const { return m_; }
  std::size_t real_size() const { return real_size_; }
  std::size_t spectral_size() const { return spectral_size_; }

  std::span<double> real() { return {real_, real_size_}; }
  std::span<std::complex<double>> spectrum() {
    return {reinterpret_cast<std::complex<double>*>(spec_), spectral_size_};
  }

  void forward() { fftw_execute(fwd_); }
  void backward() { fftw_execute(bwd_); }

 private:
  void release() {
    std::lock_guard lock(detail::fftw_planner_mutex());
    if (fwd_ != nullptr) fftw_destroy_plan(fwd_);
    if (bwd_ != nullptr) fftw_destroy_plan(bwd_);
    if (real_ != nullptr) fftw_free(real_);
    if (spec_ != nullptr) fftw_free(spec_);
    fwd_ = bwd_ = nullptr;
    real_ = nullptr;
    spec_ = nullptr;
  }

  int rank_;
  int m_;
  std::size_t real_size_ = 0;
  std::size_t spectral_size_ = 0;
  double* real_ = nullptr;
  fftw_complex* spec_ = nullptr;
  fftw_plan fwd_ = nullptr;
  fftw_plan bwd_ = nullptr;
};

/// Per-thread transform workspace for a lattice shape. Each worker thread
/// gets its own buffers, so concurrent callers never share mutable state.
inline RealFft& fft_workspace(int rank, int m) {
  thread_local std::map<std::pair<int, int>, std::unique_ptr<RealFft>> cache;
  auto& slot = cache[{rank, m}];
  if (!slot) slot = std::make_unique<RealFft>(rank, m);
  return *slot;
}

}  // namespace choquard
