#pragma once

#include <cmath>
#include <complex>
#include <vector>

#include "randsemi/ensembles.hpp"
#include "randsemi/rng.hpp"
#include "randsemi/vector.hpp"

namespace randsemi {

// Closed forms for the three analytically solvable ensembles.  Each mirrors
// the generic matrix machinery exactly: the draw functions consume the same
// stream addresses as generator_ensemble::sample, so a closed-form run and
// a matrix run with the same seed see identical randomness.

struct geometric_draws {
  std::vector<int> xi;  // storage indices in [1, dim-1]
  long clamp_events = 0;
};

// One geometric draw per generator stream, matching the rank-one ensembles.
inline geometric_draws draw_geometric(long n, int dim, const rng_stream& trial_base) {
  geometric_draws d;
  d.xi.reserve(static_cast<size_t>(n));
  for (long i = 0; i < n; ++i) {
    philox4x32 g = trial_base.with_generator(static_cast<uint32_t>(i)).engine();
    int xi = g.next_geometric_half();
    if (xi > dim - 1) {
      xi = dim - 1;
      ++d.clamp_events;
    }
    d.xi.push_back(xi);
  }
  return d;
}

// One sign per generator stream, matching diagonal_imaginary.
inline std::vector<int> draw_signs(long n, const rng_stream& trial_base) {
  std::vector<int> s;
  s.reserve(static_cast<size_t>(n));
  for (long i = 0; i < n; ++i)
    s.push_back(trial_base.with_generator(static_cast<uint32_t>(i)).engine().next_sign());
  return s;
}

// E x_xi and var x_xi under the truncated geometric law.
inline double geometric_value_mean(const trunc_vector<double>& x, const std::vector<double>& w) {
  double m = 0.0;
  for (int k = 1; k < x.dim(); ++k) m += w[static_cast<size_t>(k)] * x[k];
  return m;
}

inline double geometric_value_variance(const trunc_vector<double>& x,
                                       const std::vector<double>& w) {
  double m = 0.0, m2 = 0.0;
  for (int k = 1; k < x.dim(); ++k) {
    m += w[static_cast<size_t>(k)] * x[k];
    m2 += w[static_cast<size_t>(k)] * x[k] * x[k];
  }
  return m2 - m * m;
}

// The same moments for the value xi * x_xi (the scaled rank-one model).
inline double geometric_scaled_mean(const trunc_vector<double>& x, const std::vector<double>& w) {
  double m = 0.0;
  for (int k = 1; k < x.dim(); ++k) m += w[static_cast<size_t>(k)] * k * x[k];
  return m;
}

inline double geometric_scaled_variance(const trunc_vector<double>& x,
                                        const std::vector<double>& w) {
  double m = 0.0, m2 = 0.0;
  for (int k = 1; k < x.dim(); ++k) {
    double v = static_cast<double>(k) * x[k];
    m += w[static_cast<size_t>(k)] * v;
    m2 += w[static_cast<size_t>(k)] * v * v;
  }
  return m2 - m * m;
}

// Rank-one model: A_i = |e_0><e_xi_i| is square-zero, so the whole
// composition collapses to W_n(t) = I + (t/n) sum_i A_i and the deviation
// from e^{EAt} lives in coordinate 0 alone:
//   ||(W_n(t) - e^{EAt}) x|| = t |avg_i x_{xi_i} - E x_xi|.
inline double rank_one_deviation(const trunc_vector<double>& x, double t,
                                 const std::vector<int>& xi, const std::vector<double>& w) {
  double s = 0.0;
  for (int k : xi) s += x[k];
  double avg = s / static_cast<double>(xi.size());
  return t * std::abs(avg - geometric_value_mean(x, w));
}

// Scaled model: the sampled value is xi x_xi instead of x_xi.
inline double scaled_rank_one_deviation(const trunc_vector<double>& x, double t,
                                        const std::vector<int>& xi,
                                        const std::vector<double>& w) {
  double s = 0.0;
  for (int k : xi) s += static_cast<double>(k) * x[k];
  double avg = s / static_cast<double>(xi.size());
  return t * std::abs(avg - geometric_scaled_mean(x, w));
}

// Scalar Chebyshev tail for the models above: T^2 var / (n eps^2), clipped.
inline double scalar_tail_bound(double horizon, double variance, long n, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("scalar_tail_bound: eps must be positive");
  if (n < 1) throw std::invalid_argument("scalar_tail_bound: n must be >= 1");
  return std::min(1.0, horizon * horizon * variance / (static_cast<double>(n) * eps * eps));
}

// Imaginary-diagonal model with shared sign sum S = sum_i xi_i:
//   W_n(t) = diag(e^{i k t S / n}),   E W_n(t) = diag(cos(k t / n)^n).
// Entry k of the difference:
inline cdouble unimodular_minus_iterate(int k, double t, long sum_signs, long n) {
  double theta = static_cast<double>(k) * t * static_cast<double>(sum_signs) / static_cast<double>(n);
  double c = std::pow(std::cos(k * t / static_cast<double>(n)), static_cast<double>(n));
  return std::exp(cdouble(0.0, theta)) - c;
}

// Weak pairing <z, (W_n(t) - E W_n(t)) x> truncated to coordinates <= K.
inline double diag_imag_wot_pairing(const trunc_vector<double>& z, const trunc_vector<double>& x,
                                    double t, long sum_signs, long n, int K) {
  if (z.dim() != x.dim()) throw std::invalid_argument("wot_pairing: dim mismatch");
  if (K < 0 || K >= z.dim()) throw std::invalid_argument("wot_pairing: K out of range");
  cdouble s{};
  for (int k = 1; k <= K; ++k) {
    double zx = z[k] * x[k];
    if (zx != 0.0) s += zx * unimodular_minus_iterate(k, t, sum_signs, n);
  }
  return std::abs(s);
}

// Tail of the pairing beyond K: every entry difference has modulus <= 2.
inline double diag_imag_wot_tail(const trunc_vector<double>& z, const trunc_vector<double>& x,
                                 int K) {
  if (z.dim() != x.dim()) throw std::invalid_argument("wot_tail: dim mismatch");
  double s = 0.0;
  for (int k = K + 1; k < z.dim(); ++k) s += 2.0 * std::abs(z[k] * x[k]);
  return s;
}

// Exact l_2 -> l_2 distance between W_n(t) and E W_n(t) restricted to
// coordinates <= K, maximized over the grid: for diagonal operators this
// is the largest entry modulus.  Whenever some k t / n hits pi/2 the
// iterate entry vanishes while the W entry stays unimodular, so the gap
// cannot drop below 1 there.
inline double diag_imag_norm_gap(const std::vector<double>& t_grid, long sum_signs, long n,
                                 int K) {
  double gap = 0.0;
  for (double t : t_grid)
    for (int k = 1; k <= K; ++k)
      gap = std::max(gap, std::abs(unimodular_minus_iterate(k, t, sum_signs, n)));
  return gap;
}

// Matrix-route builders sharing the closed-form draw values.
template <Scalar T>
std::vector<trunc_operator<T>> build_rank_one_ops(const std::vector<int>& xi, int dim,
                                                  bool scaled) {
  std::vector<trunc_operator<T>> ops;
  ops.reserve(xi.size());
  for (int k : xi) {
    trunc_operator<T> a = trunc_operator<T>::unit(dim, 0, k);
    if (scaled) a = T{static_cast<double>(k)} * a;
    ops.push_back(std::move(a));
  }
  return ops;
}

inline std::vector<trunc_operator<cdouble>> build_diag_imag_ops(const std::vector<int>& signs,
                                                                int dim) {
  std::vector<trunc_operator<cdouble>> ops;
  ops.reserve(signs.size());
  for (int s : signs) {
    trunc_operator<cdouble> a = trunc_operator<cdouble>::banded(dim, 0);
    for (int k = 0; k < dim; ++k) a.set(k, k, cdouble(0.0, s * static_cast<double>(k)));
    ops.push_back(std::move(a));
  }
  return ops;
}

}  // namespace randsemi
