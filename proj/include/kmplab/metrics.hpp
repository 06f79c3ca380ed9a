#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <stdexcept>
#include <vector>

#include "kmplab/common.hpp"
#include "kmplab/grid_field.hpp"
#include "kmplab/quadrature.hpp"

namespace kmplab {

using Mode = std::array<int, 3>;

// Fourier modes in the cube |k|_inf <= kmax with W~ weights:
// 1 for k = 0 and 1/(2 pi |k|) otherwise. Index 0 is always k = 0.
struct ModeSet {
  int d = 1;
  int kmax = 0;
  std::vector<Mode> k;
  std::vector<double> weight;

  std::size_t size() const { return k.size(); }
};

inline int default_kmax(int d) {
  switch (d) {
    case 1: return 64;
    case 2: return 32;
    case 3: return 16;
    default: throw std::invalid_argument("dimension must be 1, 2 or 3");
  }
}

inline ModeSet make_modes(int d, int kmax) {
  if (d < 1 || d > 3) throw std::invalid_argument("dimension must be 1, 2 or 3");
  if (kmax < 0) throw std::invalid_argument("kmax must be nonnegative");
  ModeSet m;
  m.d = d;
  m.kmax = kmax;
  m.k.push_back({0, 0, 0});
  m.weight.push_back(1.0);
  const int side = 2 * kmax + 1;
  const std::size_t count = ipow(static_cast<std::size_t>(side), d);
  for (std::size_t j = 0; j < count; ++j) {
    auto c = unflatten(j, d, side);
    Mode k{0, 0, 0};
    double k2 = 0.0;
    for (int a = 0; a < d; ++a) {
      k[a] = c[a] - kmax;
      k2 += static_cast<double>(k[a]) * k[a];
    }
    if (k2 == 0.0) continue;
    m.k.push_back(k);
    m.weight.push_back(1.0 / (kTwoPi * std::sqrt(k2)));
  }
  return m;
}

inline double mode_norm(const Mode& k, int d) {
  double s = 0.0;
  for (int a = 0; a < d; ++a) s += static_cast<double>(k[a]) * k[a];
  return std::sqrt(s);
}

// e^{-2 pi i k.x}
inline cplx plane_wave(const Mode& k, const Point& x, int d) {
  double ph = 0.0;
  for (int a = 0; a < d; ++a) ph += k[a] * x[a];
  return std::polar(1.0, -kTwoPi * ph);
}

using Spectrum = std::vector<cplx>;

inline Spectrum spectrum_of_atoms(const std::vector<Atom>& atoms, const ModeSet& m) {
  Spectrum s(m.size(), cplx(0.0, 0.0));
  for (const auto& at : atoms)
    for (std::size_t j = 0; j < m.size(); ++j) s[j] += at.w * plane_wave(m.k[j], at.x, m.d);
  return s;
}

// Grid densities: discrete coefficients for |k_a| < n/2, zero beyond.
inline Spectrum spectrum_of_grid(const GridField& f, const ModeSet& m) {
  if (f.d() != m.d) throw std::invalid_argument("dimension mismatch");
  auto c = to_spectrum(f);
  const int n = f.n();
  const double scale = 1.0 / static_cast<double>(f.nodes());
  Spectrum s(m.size(), cplx(0.0, 0.0));
  for (std::size_t j = 0; j < m.size(); ++j) {
    std::array<int, 3> idx{0, 0, 0};
    bool ok = true;
    for (int a = 0; a < m.d; ++a) {
      int ka = m.k[j][a];
      if (2 * std::abs(ka) >= n) ok = false;
      idx[a] = ka < 0 ? ka + n : ka;
    }
    if (ok) s[j] = c[flatten(idx, m.d, n)] * scale;
  }
  return s;
}

inline Spectrum spectrum_of(const MeasureState& mu, const ModeSet& m) {
  Spectrum s = spectrum_of_atoms(mu.atoms, m);
  if (!mu.density.empty()) {
    Spectrum g = spectrum_of_grid(mu.density, m);
    for (std::size_t j = 0; j < s.size(); ++j) s[j] += g[j];
  }
  return s;
}

// W~ = |mu(0) - nu(0)| + sum_{k != 0} |mu(k) - nu(k)| / (2 pi |k|)
inline double flat_metric(const Spectrum& a, const Spectrum& b, const ModeSet& m) {
  if (a.size() != m.size() || b.size() != m.size()) throw std::invalid_argument("spectrum does not match mode set");
  double s = 0.0;
  for (std::size_t j = 0; j < m.size(); ++j) s += m.weight[j] * std::abs(a[j] - b[j]);
  return s;
}

inline double flat_metric(const MeasureState& mu, const MeasureState& nu, int kmax = -1) {
  if (mu.d != nu.d) throw std::invalid_argument("measures live in different dimensions");
  ModeSet m = make_modes(mu.d, kmax < 0 ? default_kmax(mu.d) : kmax);
  return flat_metric(spectrum_of(mu, m), spectrum_of(nu, m), m);
}

// Space-time modes exp(2 pi i (k0 t / T + k.x)), |k0| <= k0max, weighted by
// 1 / (1 + 2 pi |k| + 2 pi |k0|).
struct SpaceTimeModes {
  ModeSet space;
  int k0max = 0;
  double T = 1.0;
  std::vector<double> weight;  // [(k0 + k0max) * space.size() + j]

  std::size_t size() const { return weight.size(); }
};

inline SpaceTimeModes make_space_time_modes(int d, int kmax, int k0max, double T) {
  SpaceTimeModes st;
  st.space = make_modes(d, kmax);
  st.k0max = k0max;
  st.T = T;
  for (int k0 = -k0max; k0 <= k0max; ++k0)
    for (std::size_t j = 0; j < st.space.size(); ++j)
      st.weight.push_back(1.0 / (1.0 + kTwoPi * mode_norm(st.space.k[j], d) + kTwoPi * std::abs(k0)));
  return st;
}

using SliceSpectrum = std::function<Spectrum(double)>;

// int_0^T slice(t)(k) e^{-2 pi i k0 t / T} dt by composite Gauss rules on segments.
inline Spectrum space_time_spectrum(const SliceSpectrum& slice, const SpaceTimeModes& st,
                                    const std::vector<double>& breaks = {}, int nodes = 16, int panels = 8) {
  auto segs = make_segments(0.0, st.T, breaks, {});
  const GaussRule& g = gauss_legendre(nodes);
  const std::size_t ns = st.space.size();
  Spectrum out(st.size(), cplx(0.0, 0.0));
  for (const auto& s : segs) {
    double h = (s.b - s.a) / panels;
    for (int p = 0; p < panels; ++p) {
      double mid = s.a + (p + 0.5) * h;
      for (std::size_t q = 0; q < g.x.size(); ++q) {
        double t = mid + 0.5 * h * g.x[q];
        double w = 0.5 * h * g.w[q];
        Spectrum c = slice(t);
        for (int k0 = -st.k0max; k0 <= st.k0max; ++k0) {
          cplx e = w * std::polar(1.0, -kTwoPi * k0 * t / st.T);
          std::size_t base = static_cast<std::size_t>(k0 + st.k0max) * ns;
          for (std::size_t j = 0; j < ns; ++j) out[base + j] += e * c[j];
        }
      }
    }
  }
  return out;
}

inline double space_time_distance(const Spectrum& a, const Spectrum& b, const SpaceTimeModes& st) {
  if (a.size() != st.size() || b.size() != st.size()) throw std::invalid_argument("spectrum does not match mode set");
  double s = 0.0;
  for (std::size_t j = 0; j < st.size(); ++j) s += st.weight[j] * std::abs(a[j] - b[j]);
  return s;
}

}  // namespace kmplab
