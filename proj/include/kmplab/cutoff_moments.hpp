#pragma once

#include <cmath>
#include <stdexcept>

namespace kmplab {

// Truncated moments of X ~ Exp(rho) and pairs of independent copies, with
// energies capped at K. All vanish at rho = 0.

inline void check_moment_args(double rho, double K) {
  if (!(rho >= 0.0) || !(K > 0.0)) throw std::invalid_argument("moments need rho >= 0 and K > 0");
}

// E[X ^ K] = rho (1 - e^{-K/rho})
inline double m1K(double rho, double K) {
  check_moment_args(rho, K);
  if (rho == 0.0) return 0.0;
  return -rho * std::expm1(-K / rho);
}

// E[X (X ^ K)] = 2 rho^2 - (K rho + 2 rho^2) e^{-K/rho}
inline double m11K(double rho, double K) {
  check_moment_args(rho, K);
  if (rho == 0.0) return 0.0;
  return 2.0 * rho * rho - (K * rho + 2.0 * rho * rho) * std::exp(-K / rho);
}

// E[(X ^ K)^2] = 2 rho^2 - 2 (K rho + rho^2) e^{-K/rho}
inline double m2K(double rho, double K) {
  check_moment_args(rho, K);
  if (rho == 0.0) return 0.0;
  return 2.0 * rho * rho - 2.0 * (K * rho + rho * rho) * std::exp(-K / rho);
}

// Theta_K = (2 m11 - rho m1)/3, evaluated in the cancellation-free form
// rho^2 [1 - (1 + 2K/(3 rho)) e^{-K/rho}].
inline double thetaK(double rho, double K) {
  check_moment_args(rho, K);
  if (rho == 0.0) return 0.0;
  double q = K / rho;
  // 1 - (1 + 2q/3) e^{-q} = -expm1(-q) - (2q/3) e^{-q}
  return rho * rho * (-std::expm1(-q) - (2.0 * q / 3.0) * std::exp(-q));
}

// Theta_K from the moment combination as displayed.
inline double thetaK_combination(double rho, double K) {
  return (2.0 * m11K(rho, K) - rho * m1K(rho, K)) / 3.0;
}

// Gamma_K = (2/3) m2 - (1/3) m1^2
inline double gammaK(double rho, double K) {
  double m1 = m1K(rho, K);
  return (2.0 / 3.0) * m2K(rho, K) - m1 * m1 / 3.0;
}

inline double aK(double rho, double K) {
  if (!(rho > 0.0)) throw std::domain_error("A_K is undefined at rho = 0");
  return rho * rho / thetaK(rho, K);
}

inline double rK(double rho, double K) {
  if (!(rho > 0.0)) throw std::domain_error("R_K is undefined at rho = 0");
  double th = thetaK(rho, K);
  return gammaK(rho, K) * rho * rho / (th * th);
}

// Limit of Theta_K(rho)/rho as rho -> infinity.
inline double thetaK_infinity(double K) { return K / 3.0; }

// d Theta_K / d rho, by differentiating the closed form.
inline double thetaK_prime(double rho, double K) {
  if (rho <= 0.0) return 0.0;
  double q = K / rho;
  double e = std::exp(-q);
  // Theta = rho^2 - (rho^2 + 2K rho/3) e^{-q}
  // dTheta = 2 rho - (2 rho + 2K/3) e^{-q} - (rho^2 + 2K rho/3) e^{-q} q/rho
  return 2.0 * rho - (2.0 * rho + 2.0 * K / 3.0) * e - (rho * rho + 2.0 * K * rho / 3.0) * e * q / rho;
}

inline double truncate(double r, double K) { return r < K ? r : K; }

}  // namespace kmplab
