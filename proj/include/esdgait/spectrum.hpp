#pragma once

// Thin RAII wrapper over an FFTW real-to-complex plan plus window helpers.

#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <fftw3.h>

#include "error.hpp"

namespace esdgait {

namespace detail {
// FFTW's planner is not thread-safe; plan execution on fresh arrays is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex mu;
  return mu;
}
}  // namespace detail

/// Forward real DFT of a fixed length n, producing n/2 + 1 bins.
class RealFft {
public:
  explicit RealFft(std::size_t n) : n_(n) {
    if (n == 0) throw ValidationError("FFT length must be > 0");
    std::vector<double> in(n);
    std::vector<std::complex<double>> out(n / 2 + 1);
    std::lock_guard lock(detail::fftw_planner_mutex());
    plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.data(), reinterpret_cast<fftw_complex*>(out.data()),
                                 FFTW_ESTIMATE | FFTW_UNALIGNED | FFTW_PRESERVE_INPUT);
    if (!plan_) throw ConfigError("failed to create FFT plan of length " + std::to_string(n));
  }

  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  ~RealFft() {
    std::lock_guard lock(detail::fftw_planner_mutex());
    fftw_destroy_plan(plan_);
  }

  std::size_t size() const { return n_; }
  std::size_t bins() const { return n_ / 2 + 1; }

  void forward(std::span<const double> in, std::span<std::complex<double>> out) const {
    if (in.size() != n_ || out.size() != bins()) throw ValidationError("FFT buffer size mismatch");
    fftw_execute_dft_r2c(plan_, const_cast<double*>(in.data()), reinterpret_cast<fftw_complex*>(out.data()));
  }

private:
  std::size_t n_;
  fftw_plan plan_ = nullptr;
};

enum class WindowFunction { hann, hamming, rectangular };

inline std::string to_string(WindowFunction w) {
  switch (w) {
    case WindowFunction::hann: return "hann";
    case WindowFunction::hamming: return "hamming";
    case WindowFunction::rectangular: return "rectangular";
  }
  return "hann";
}

inline WindowFunction parse_window(const std::string& s) {
  if (s == "hann") return WindowFunction::hann;
  if (s == "hamming") return WindowFunction::hamming;
  if (s == "rectangular") return WindowFunction::rectangular;
  throw ValidationError("unknown window function '" + s + "'");
}

/// Periodic (DFT-even) window coefficients.
inline std::vector<double> make_window(WindowFunction w, std::size_t n) {
  std::vector<double> out(n, 1.0);
  const double step = 2.0 * std::numbers::pi / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double c = std::cos(step * static_cast<double>(i));
    if (w == WindowFunction::hann) out[i] = 0.5 - 0.5 * c;
    if (w == WindowFunction::hamming) out[i] = 0.54 - 0.46 * c;
  }
  return out;
}

}  // namespace esdgait
