#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>

#include "randsemi/lln.hpp"
#include "randsemi/opnorm.hpp"

namespace randsemi {

// Conjugation by the diagonal map M e_k = e_k / k (1-based coefficient,
// weight 1/(k+1) at storage index k): {U}_M = M^{-1} U M scales entry
// (i, j) by (i+1)/(j+1).  It is an algebra homomorphism, so it commutes
// with exp and with semigroup composition.

template <Scalar T>
trunc_vector<T> apply_m(const trunc_vector<T>& x) {
  trunc_vector<T> y(x.dim());
  for (int k = 0; k < x.dim(); ++k) y[k] = x[k] * T{1.0 / (k + 1)};
  return y;
}

template <Scalar T>
trunc_vector<T> apply_m_inv(const trunc_vector<T>& x) {
  trunc_vector<T> y(x.dim());
  for (int k = 0; k < x.dim(); ++k) y[k] = x[k] * T{static_cast<double>(k + 1)};
  return y;
}

template <Scalar T>
trunc_operator<T> m_conjugate(const trunc_operator<T>& u) {
  int n = u.dim();
  if (u.is_banded()) {
    int d = u.bandwidth();
    trunc_operator<T> r = trunc_operator<T>::banded(n, d);
    for (int i = 0; i < n; ++i) {
      int jlo = std::max(0, i - d), jhi = std::min(n - 1, i + d);
      for (int j = jlo; j <= jhi; ++j)
        r.set(i, j, u.entry(i, j) * T{static_cast<double>(i + 1) / (j + 1)});
    }
    return r;
  }
  trunc_operator<T> r = trunc_operator<T>::dense(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      r.set(i, j, u.entry(i, j) * T{static_cast<double>(i + 1) / (j + 1)});
  return r;
}

enum class conjugation_rule { series, d_diagonal };

inline std::string to_string(conjugation_rule r) {
  return r == conjugation_rule::series ? "series" : "d_diagonal";
}

// A sample fails the hypothesis of its membership rule.
class certification_error : public std::runtime_error {
 public:
  explicit certification_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct membership_certificate {
  conjugation_rule rule = conjugation_rule::d_diagonal;
  double d = 0.0;         // rule parameter
  double constant = 0.0;  // certified ||{U}_M||_2 <= constant * ||U||_1
  double measured_ratio = 0.0;
  bool premise_checked = false;
  int dim = 0;
};

// sum_{m} 1/m^2 = pi^2/6 drives the series rule constant.
inline double series_rule_constant(double d) {
  if (!(d > 0.0)) throw std::invalid_argument("series_rule_constant: d must be positive");
  return std::numbers::pi * d / std::sqrt(6.0);
}

inline double d_diagonal_rule_constant(int d) {
  if (d < 0) throw std::invalid_argument("d_diagonal_rule_constant: d must be >= 0");
  double w = 2.0 * d + 1.0;
  return std::sqrt(w * w * w);
}

namespace detail {

template <Scalar T>
double measured_conjugation_ratio(const trunc_operator<T>& u) {
  double n1 = opnorm_l1_exact(u);
  if (n1 == 0.0) return 0.0;
  norm_estimate est = opnorm_estimate(m_conjugate(u), 2.0, 2.0, rng_stream{});
  if (!est.converged)
    throw convergence_error("membership certificate: power iteration did not converge");
  return est.value / n1;
}

}  // namespace detail

// Series rule: if every column of M^{-1} U weighs at most d ||U||_1, i.e.
// sum_i (i+1) |u_{im}| <= d ||U||_1 for all m, then ||{U}_M||_2 is at most
// (pi d / sqrt 6) ||U||_1.
template <Scalar T>
membership_certificate series_certificate(const trunc_operator<T>& u, double d,
                                          bool measure = true) {
  if (!(d > 0.0)) throw std::invalid_argument("series_certificate: d must be positive");
  double n1 = opnorm_l1_exact(u);
  double cap = d * n1 * (1.0 + 1e-12);
  for (int m = 0; m < u.dim(); ++m) {
    double s = 0.0;
    for (int i = 0; i < u.dim(); ++i) s += (i + 1) * std::abs(u.entry(i, m));
    if (s > cap)
      throw certification_error("series premise fails at column " + std::to_string(m) +
                                ": weighted sum " + std::to_string(s) + " exceeds d ||U||_1 = " +
                                std::to_string(d * n1));
  }
  membership_certificate c;
  c.rule = conjugation_rule::series;
  c.d = d;
  c.constant = series_rule_constant(d);
  c.premise_checked = true;
  c.dim = u.dim();
  if (measure) c.measured_ratio = detail::measured_conjugation_ratio(u);
  return c;
}

// d-diagonal rule: a bandwidth-d operator satisfies
// ||{U}_M||_2 <= sqrt((2d+1)^3) ||U||_1.
template <Scalar T>
membership_certificate d_diagonal_certificate(const trunc_operator<T>& u, int d,
                                              bool measure = true) {
  if (d < 0) throw std::invalid_argument("d_diagonal_certificate: d must be >= 0");
  // A banded operator inside the band is certified by construction; any
  // other storage is scanned (wider bands may still have vanishing tails).
  if (!(u.is_banded() && u.bandwidth() <= d)) {
    for (int i = 0; i < u.dim(); ++i)
      for (int j = 0; j < u.dim(); ++j)
        if (std::abs(i - j) > d && u.entry(i, j) != T{})
          throw certification_error("d_diagonal premise fails: nonzero entry at (" +
                                    std::to_string(i) + "," + std::to_string(j) +
                                    ") outside bandwidth " + std::to_string(d));
  }
  membership_certificate c;
  c.rule = conjugation_rule::d_diagonal;
  c.d = d;
  c.constant = d_diagonal_rule_constant(d);
  c.premise_checked = true;
  c.dim = u.dim();
  if (measure) c.measured_ratio = detail::measured_conjugation_ratio(u);
  return c;
}

template <Scalar T>
membership_certificate certify(const trunc_operator<T>& u, conjugation_rule rule, double d,
                               bool measure = true) {
  if (rule == conjugation_rule::series) return series_certificate(u, d, measure);
  return d_diagonal_certificate(u, static_cast<int>(d), measure);
}

// Every column equals the geometric vector (1, 1/2, 1/4, ...).  Bounded
// l_1 -> l_1 with norm 2 (up to the truncation tail) but with l_2 norm
// growing like sqrt(dim); its conjugation satisfies the series rule with
// d = 2 and stays l_2-bounded uniformly in the truncation.
template <Scalar T>
trunc_operator<T> geometric_columns_operator(int dim) {
  trunc_operator<T> u = trunc_operator<T>::dense(dim);
  for (int i = 0; i < dim; ++i) {
    double v = std::ldexp(1.0, -i);
    for (int j = 0; j < dim; ++j) u.set(i, j, T{v});
  }
  return u;
}

template <Scalar T>
struct conjugated_run_result {
  deviation_run run;
  membership_certificate certificate;  // rule data shared by all samples
  double base_radius = 0.0;            // l_1 radius of the base ensemble
  double effective_radius = 0.0;       // constant * base_radius, an l_2 radius
};

// LLN for the conjugated process: draw B from the base ensemble, certify
// membership, and compose the semigroups generated by {B}_M.  The limit is
// e^{{EB}_M t}; the deviation bound uses the certified l_2 radius.
template <Scalar T>
conjugated_run_result<T> conjugated_lln_run(const generator_ensemble<T>& base,
                                            conjugation_rule rule, double d,
                                            const trunc_vector<T>& x,
                                            const lln_experiment_params<T>& prm) {
  std::optional<double> rho = base.certified_radius(1.0);
  if (!rho)
    throw std::invalid_argument("conjugated_lln_run: base ensemble has no certified l_1 radius");
  conjugated_run_result<T> out;
  out.base_radius = *rho;
  out.certificate.rule = rule;
  out.certificate.d = d;
  out.certificate.dim = base.dim();
  out.certificate.constant = (rule == conjugation_rule::series)
                                 ? series_rule_constant(d)
                                 : d_diagonal_rule_constant(static_cast<int>(d));
  out.certificate.premise_checked = true;
  out.effective_radius = out.certificate.constant * out.base_radius;

  std::vector<double> grid = uniform_grid(prm.horizon, prm.grid_points);
  trunc_operator<T> conj_mean = m_conjugate(base.mean());
  std::vector<trunc_vector<T>> target;
  target.reserve(grid.size());
  for (double t : grid) target.push_back(matvec(matexp(conj_mean, t, prm.tol), x));

  auto draw = [&base, rule, d](rng_stream s, long* clamp) {
    trunc_operator<T> b = base.sample(s, clamp);
    certify(b, rule, d, /*measure=*/false);
    return m_conjugate(b);
  };
  out.run = run_deviation_trials<T>(draw, base.dim(), prm.n, prm.trials, grid, target, x,
                                    prm.dev_norm_p, prm.tol, prm.seed, prm.experiment_id,
                                    prm.workers);
  score_deviation_rows(out.run, prm.n, prm.horizon, prm.epsilons, out.effective_radius,
                       lp_norm(x, 2.0));
  return out;
}

}  // namespace randsemi
