#pragma once

#include <algorithm>
#include <cmath>

#include "randsemi/matexp.hpp"
#include "randsemi/operator.hpp"
#include "randsemi/rng.hpp"

namespace randsemi {

struct norm_estimate {
  double value = 0.0;
  bool exact = false;        // closed-form norm (p=q=1)
  bool converged = false;    // power iteration reached tolerance (p=q=2)
  bool lower_bound = false;  // probe maximum only (all other pairs)
  int iterations = 0;
};

namespace detail {

template <Scalar T>
trunc_vector<T> random_probe(int dim, philox4x32& g) {
  trunc_vector<T> x(dim);
  for (int k = 0; k < dim; ++k) {
    if constexpr (is_complex_v<T>) {
      x[k] = cdouble(g.next_symmetric(), g.next_symmetric());
    } else {
      x[k] = g.next_symmetric();
    }
  }
  return x;
}

}  // namespace detail

// Operator norm l_p -> l_q.
//  * p=q=1: exact (largest absolute column sum).
//  * p=q=2: power iteration on U*U; the returned value is a certified lower
//    bound that converges to the spectral norm.  Non-convergence within the
//    iteration cap is reported, not hidden.
//  * anything else: maximum of ||Ux||_q / ||x||_p over random and basis
//    probes; a lower bound only.
template <Scalar T>
norm_estimate opnorm_estimate(const trunc_operator<T>& u, double p, double q,
                              const rng_stream& stream, int probes = 64, double tol = 1e-10,
                              int max_iterations = 5000) {
  if (!(p >= 1.0) || !(q >= 1.0)) throw std::invalid_argument("opnorm_estimate: p,q must be >= 1");
  if (p == 1.0 && q == 1.0) return {opnorm_l1_exact(u), true, false, false, 0};
  int n = u.dim();
  if (p == 2.0 && q == 2.0) {
    trunc_operator<T> us = adjoint(u);
    // Deterministic start with all coordinates active avoids a start vector
    // orthogonal to the top singular space in structured cases.
    trunc_vector<T> v(n);
    for (int k = 0; k < n; ++k) v[k] = T{1.0 / (k + 1)};
    double nv = lp_norm(v, 2.0);
    for (int k = 0; k < n; ++k) v[k] = v[k] * T{1.0 / nv};
    double sigma = 0.0;
    for (int it = 1; it <= max_iterations; ++it) {
      trunc_vector<T> uv = matvec(u, v);
      double s = lp_norm(uv, 2.0);
      if (s == 0.0) return {0.0, false, true, false, it};
      trunc_vector<T> w = matvec(us, uv);
      double nw = lp_norm(w, 2.0);
      if (nw == 0.0) return {s, false, true, false, it};
      for (int k = 0; k < n; ++k) v[k] = w[k] * T{1.0 / nw};
      if (it > 1 && std::abs(s - sigma) <= tol * std::max(s, 1e-300)) {
        return {s, false, true, false, it};
      }
      sigma = s;
    }
    return {sigma, false, false, false, max_iterations};
  }
  // Probe path: certified lower bound.
  double best = 0.0;
  philox4x32 g = stream.engine();
  for (int r = 0; r < probes; ++r) {
    trunc_vector<T> x = detail::random_probe<T>(n, g);
    double np = lp_norm(x, p);
    if (np == 0.0) continue;
    best = std::max(best, lp_norm(matvec(u, x), q) / np);
  }
  for (int k = 0; k < n; ++k) {
    trunc_vector<T> e = trunc_vector<T>::basis(n, k);
    best = std::max(best, lp_norm(matvec(u, e), q));
  }
  return {best, false, false, true, probes};
}

// Spectral norm convenience wrapper; throws on power-iteration stall.
template <Scalar T>
double opnorm_l2(const trunc_operator<T>& u, double tol = 1e-10) {
  norm_estimate est = opnorm_estimate(u, 2.0, 2.0, rng_stream{}, 0, tol);
  if (!est.converged)
    throw convergence_error("opnorm_l2: power iteration did not converge");
  return est.value;
}

}  // namespace randsemi
