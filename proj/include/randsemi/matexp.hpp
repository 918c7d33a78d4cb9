#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "randsemi/operator.hpp"

namespace randsemi {

// Numerical non-convergence (Taylor series, power iteration, norm cap).
// The CLI maps this to its own exit code, distinct from config errors.
class convergence_error : public std::runtime_error {
 public:
  explicit convergence_error(const std::string& msg) : std::runtime_error(msg) {}
};

namespace detail {

constexpr int kMaxTaylorTerms = 64;
constexpr double kMatexpNormCap = 256.0;

// Taylor sum of e^B with ||B||_1 <= 1/2, terminating when the next term
// is below tol relative to the running sum.
template <Scalar T>
trunc_operator<T> taylor_exp_small(const trunc_operator<T>& b, double tol) {
  trunc_operator<T> sum = trunc_operator<T>::identity(b.dim()).to_dense();
  trunc_operator<T> term = trunc_operator<T>::identity(b.dim()).to_dense();
  for (int k = 1; k <= kMaxTaylorTerms; ++k) {
    term = T{1.0 / k} * compose(term, b);
    sum = sum + term;
    if (opnorm_l1_exact(term) <= tol * opnorm_l1_exact(sum)) return sum;
  }
  throw convergence_error("matexp: Taylor series did not reach tolerance");
}

}  // namespace detail

// Matrix exponential e^{At} by scaling and squaring around a Taylor core.
// Diagonal operators take an exact entrywise path (no norm cap applies).
// Requires t >= 0; throws convergence_error when ||A||_1 * t exceeds the
// supported range or the series fails to converge.
template <Scalar T>
trunc_operator<T> matexp(const trunc_operator<T>& a, double t, double tol = 1e-12) {
  if (!(t >= 0.0)) throw std::invalid_argument("matexp: t must be >= 0");
  if (!(tol > 0.0)) throw std::invalid_argument("matexp: tol must be positive");
  if (!a.all_finite()) throw std::invalid_argument("matexp: non-finite entry");
  if (a.is_banded() && a.bandwidth() == 0) {
    trunc_operator<T> r = trunc_operator<T>::banded(a.dim(), 0);
    for (int i = 0; i < a.dim(); ++i) r.set(i, i, std::exp(a.entry(i, i) * T{t}));
    return r;
  }
  double scale = opnorm_l1_exact(a) * t;
  if (scale > detail::kMatexpNormCap)
    throw convergence_error("matexp: ||A||_1 * t = " + std::to_string(scale) +
                            " exceeds supported range");
  if (scale == 0.0 || t == 0.0) return trunc_operator<T>::identity(a.dim()).to_dense();
  int s = 0;
  while (scale > 0.5) {
    scale *= 0.5;
    ++s;
  }
  trunc_operator<T> b = T{t / std::ldexp(1.0, s)} * a.to_dense();
  trunc_operator<T> r = detail::taylor_exp_small(b, tol);
  for (int k = 0; k < s; ++k) r = compose(r, r);
  return r;
}

// Action y = e^{At} x without forming the exponential, by segmented Taylor
// series.  Same domain restrictions as matexp.
template <Scalar T>
trunc_vector<T> expmv(const trunc_operator<T>& a, double t, const trunc_vector<T>& x,
                      double tol = 1e-12) {
  if (!(t >= 0.0)) throw std::invalid_argument("expmv: t must be >= 0");
  if (a.dim() != x.dim()) throw std::invalid_argument("expmv: dim mismatch");
  if (a.is_banded() && a.bandwidth() == 0) {
    trunc_vector<T> y(x.dim());
    for (int i = 0; i < x.dim(); ++i) y[i] = std::exp(a.entry(i, i) * T{t}) * x[i];
    return y;
  }
  double scale = opnorm_l1_exact(a) * t;
  if (scale > detail::kMatexpNormCap)
    throw convergence_error("expmv: ||A||_1 * t exceeds supported range");
  if (scale == 0.0 || t == 0.0) return x;
  int segments = static_cast<int>(std::ceil(scale / 0.5));
  double h = t / segments;
  trunc_vector<T> y = x;
  for (int seg = 0; seg < segments; ++seg) {
    trunc_vector<T> term = y, sum = y;
    bool done = false;
    for (int k = 1; k <= detail::kMaxTaylorTerms; ++k) {
      term = T{h / k} * matvec(a, term);
      sum = sum + term;
      if (lp_norm(term, 1.0) <= tol * lp_norm(sum, 1.0)) {
        done = true;
        break;
      }
    }
    if (!done) throw convergence_error("expmv: Taylor series did not reach tolerance");
    y = sum;
  }
  return y;
}

// Integer operator power by binary exponentiation.  n = 0 gives identity.
template <Scalar T>
trunc_operator<T> matrix_power(const trunc_operator<T>& u, long n) {
  if (n < 0) throw std::invalid_argument("matrix_power: negative exponent");
  trunc_operator<T> result = trunc_operator<T>::identity(u.dim());
  trunc_operator<T> base = u;
  while (n > 0) {
    if (n & 1) result = compose(result, base);
    base = (n >>= 1) ? compose(base, base) : base;
  }
  return result;
}

}  // namespace randsemi
