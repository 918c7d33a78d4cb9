#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <type_traits>

namespace randsemi {

using cdouble = std::complex<double>;

template <typename T>
inline constexpr bool is_complex_v = false;
template <typename U>
inline constexpr bool is_complex_v<std::complex<U>> = true;

template <typename T>
concept Scalar = std::is_same_v<T, double> || std::is_same_v<T, cdouble>;

inline double conj_value(double x) { return x; }
inline cdouble conj_value(const cdouble& x) { return std::conj(x); }

inline double real_part(double x) { return x; }
inline double real_part(const cdouble& x) { return x.real(); }

inline bool is_finite_value(double x) { return std::isfinite(x); }
inline bool is_finite_value(const cdouble& x) {
  return std::isfinite(x.real()) && std::isfinite(x.imag());
}

inline constexpr double inf = std::numeric_limits<double>::infinity();

// Conjugate exponent: 1/p + 1/q = 1.  p=1 maps to infinity and back.
inline double conjugate_exponent(double p) {
  if (p == 1.0) return inf;
  if (p == inf) return 1.0;
  return p / (p - 1.0);
}

inline bool conjugate_pair(double p, double q, double tol = 1e-9) {
  double ip = (p == inf) ? 0.0 : 1.0 / p;
  double iq = (q == inf) ? 0.0 : 1.0 / q;
  return std::abs(ip + iq - 1.0) <= tol;
}

}  // namespace randsemi
