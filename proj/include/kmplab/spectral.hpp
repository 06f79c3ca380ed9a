#pragma once

#include <fftw3.h>

#include <complex>
#include <map>
#include <mutex>
#include <stdexcept>
#include <vector>

#include "kmplab/common.hpp"

namespace kmplab {

using cplx = std::complex<double>;

namespace detail {

struct PlanPair {
  fftw_plan fwd = nullptr;
  fftw_plan bwd = nullptr;
};

inline std::mutex& plan_mutex() {
  static std::mutex m;
  return m;
}

// In-place plans, created once per (d, n) and never destroyed; execution through
// the new-array interface is thread safe.
inline const PlanPair& plan_for(int d, int n) {
  static std::map<std::pair<int, int>, PlanPair> cache;
  std::lock_guard<std::mutex> lock(plan_mutex());
  auto key = std::make_pair(d, n);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  std::vector<int> dims(d, n);
  std::size_t total = ipow(static_cast<std::size_t>(n), d);
  std::vector<cplx> a(total);
  auto* pa = reinterpret_cast<fftw_complex*>(a.data());
  PlanPair p;
  unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  p.fwd = fftw_plan_dft(d, dims.data(), pa, pa, FFTW_FORWARD, flags);
  p.bwd = fftw_plan_dft(d, dims.data(), pa, pa, FFTW_BACKWARD, flags);
  if (!p.fwd || !p.bwd) throw std::runtime_error("fftw planning failed");
  return cache.emplace(key, p).first->second;
}

}  // namespace detail

// Unnormalized forward transform: out(k) = sum_x in(x) exp(-2 pi i k.x / n).
inline void fft_forward(int d, int n, std::vector<cplx>& data) {
  const auto& p = detail::plan_for(d, n);
  auto* ptr = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(p.fwd, ptr, ptr);
}

// Unnormalized backward transform (no 1/n^d factor).
inline void fft_backward(int d, int n, std::vector<cplx>& data) {
  const auto& p = detail::plan_for(d, n);
  auto* ptr = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(p.bwd, ptr, ptr);
}

// Signed frequency of FFT index i on n points.
inline int wavenumber(int i, int n) { return i <= n / 2 ? i : i - n; }

// Frequency for first derivatives: the Nyquist mode is dropped.
inline int derivative_wavenumber(int i, int n) {
  if (n % 2 == 0 && i == n / 2) return 0;
  return wavenumber(i, n);
}

// Decompose a flat index (coordinate 0 fastest) into per-axis indices.
inline std::array<int, 3> unflatten(std::size_t idx, int d, int n) {
  std::array<int, 3> c{0, 0, 0};
  for (int i = 0; i < d; ++i) {
    c[i] = static_cast<int>(idx % static_cast<std::size_t>(n));
    idx /= static_cast<std::size_t>(n);
  }
  return c;
}

inline std::size_t flatten(const std::array<int, 3>& c, int d, int n) {
  std::size_t idx = 0;
  for (int i = d - 1; i >= 0; --i) idx = idx * static_cast<std::size_t>(n) + static_cast<std::size_t>(c[i]);
  return idx;
}

}  // namespace kmplab
