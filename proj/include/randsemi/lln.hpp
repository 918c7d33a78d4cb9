#pragma once

#include <cmath>
#include <exception>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <thread>
#include <vector>

#include "randsemi/ensembles.hpp"
#include "randsemi/matexp.hpp"
#include "randsemi/operator.hpp"
#include "randsemi/rng.hpp"
#include "randsemi/stats.hpp"

namespace randsemi {

// Uniform time grid 0 = t_0 < ... < t_{points-1} = horizon.
inline std::vector<double> uniform_grid(double horizon, int points) {
  if (!(horizon >= 0.0)) throw std::invalid_argument("uniform_grid: horizon must be >= 0");
  if (points < 1) throw std::invalid_argument("uniform_grid: points must be >= 1");
  std::vector<double> g(static_cast<size_t>(points), 0.0);
  for (int j = 1; j < points; ++j)
    g[static_cast<size_t>(j)] = horizon * static_cast<double>(j) / (points - 1);
  return g;
}

// W_n(t) = e^{A_1 t/n} e^{A_2 t/n} ... e^{A_n t/n}, factors composed in the
// order written (sample 1 is the leftmost factor).
template <Scalar T>
trunc_operator<T> composition_w_n(std::span<const trunc_operator<T>> gens, double t,
                                  double tol = 1e-12) {
  if (gens.empty()) throw std::invalid_argument("composition_w_n: no generators");
  double s = t / static_cast<double>(gens.size());
  trunc_operator<T> w = matexp(gens.front(), s, tol);
  for (size_t i = 1; i < gens.size(); ++i) w = compose(w, matexp(gens[i], s, tol));
  return w;
}

// W_n(t) x without forming the product: the rightmost factor acts first.
template <Scalar T>
trunc_vector<T> composition_w_n_apply(std::span<const trunc_operator<T>> gens, double t,
                                      const trunc_vector<T>& x, double tol = 1e-12) {
  if (gens.empty()) throw std::invalid_argument("composition_w_n_apply: no generators");
  double s = t / static_cast<double>(gens.size());
  trunc_vector<T> y = x;
  for (size_t i = gens.size(); i-- > 0;) y = expmv(gens[i], s, y, tol);
  return y;
}

// Delta(t) = e^{At} - E e^{At} for one realized generator.
template <Scalar T>
trunc_operator<T> delta_term_with(const trunc_operator<T>& mean_sg, const trunc_operator<T>& a,
                                  double t, double tol = 1e-12) {
  return matexp(a, t, tol).to_dense() - mean_sg.to_dense();
}

template <Scalar T>
trunc_operator<T> delta_term(const generator_ensemble<T>& e, const trunc_operator<T>& a, double t,
                             double tol = 1e-12) {
  return delta_term_with(e.mean_semigroup(t, tol), a, t, tol);
}

// Bracket F_{n;k;a_1..a_k}(t): the product of n step factors at step t/n
// where positions a_1 < ... < a_k (1-based) carry Delta factors and every
// other position carries F(t/n).
template <Scalar T>
trunc_operator<T> f_term(const trunc_operator<T>& f_step,
                         std::span<const trunc_operator<T>> deltas,
                         const std::vector<int>& positions, int n) {
  int k = static_cast<int>(positions.size());
  if (k == 0 || k > n) throw std::invalid_argument("f_term: need 1..n positions");
  if (deltas.size() != positions.size())
    throw std::invalid_argument("f_term: one delta per position");
  int prev = 0;
  for (int a : positions) {
    if (a <= prev || a > n) throw std::invalid_argument("f_term: positions must increase in [1,n]");
    prev = a;
  }
  trunc_operator<T> w = matrix_power(f_step, positions.front() - 1);
  for (int j = 0; j < k; ++j) {
    w = compose(w, deltas[static_cast<size_t>(j)]);
    long gap = (j + 1 < k) ? positions[static_cast<size_t>(j + 1)] - positions[static_cast<size_t>(j)] - 1
                           : n - positions[static_cast<size_t>(j)];
    if (gap > 0) w = compose(w, matrix_power(f_step, gap));
  }
  return w;
}

namespace detail {

// Visit all strictly increasing k-subsets of {1..n}.
inline void for_each_combination(int n, int k, const std::function<void(const std::vector<int>&)>& fn) {
  std::vector<int> c(static_cast<size_t>(k));
  for (int i = 0; i < k; ++i) c[static_cast<size_t>(i)] = i + 1;
  while (true) {
    fn(c);
    int i = k - 1;
    while (i >= 0 && c[static_cast<size_t>(i)] == n - k + i + 1) --i;
    if (i < 0) return;
    ++c[static_cast<size_t>(i)];
    for (int j = i + 1; j < k; ++j) c[static_cast<size_t>(j)] = c[static_cast<size_t>(j - 1)] + 1;
  }
}

// Visit all tuples in {0..base-1}^len.
inline void for_each_tuple(int base, int len, const std::function<void(const std::vector<int>&)>& fn) {
  std::vector<int> idx(static_cast<size_t>(len), 0);
  while (true) {
    fn(idx);
    int i = len - 1;
    while (i >= 0 && idx[static_cast<size_t>(i)] == base - 1) idx[static_cast<size_t>(i--)] = 0;
    if (i < 0) return;
    ++idx[static_cast<size_t>(i)];
  }
}

}  // namespace detail

template <Scalar T>
struct bracket_reconstruction_result {
  trunc_operator<T> direct;
  trunc_operator<T> reconstructed;
  double max_diff = 0.0;
};

// Per-realization identity: W_n(t) = sum over all subsets of positions of
// the bracket with realized Deltas, the empty subset contributing F(t/n)^n.
// Exact up to matexp tolerance; n is capped to keep 2^n enumeration small.
template <Scalar T>
bracket_reconstruction_result<T> bracket_reconstruction(const generator_ensemble<T>& e,
                                                        std::span<const trunc_operator<T>> samples,
                                                        double t, double tol = 1e-12) {
  int n = static_cast<int>(samples.size());
  if (n < 1 || n > 6) throw std::invalid_argument("bracket_reconstruction: n must be in [1,6]");
  double s = t / n;
  trunc_operator<T> f_step = e.mean_semigroup(s, tol).to_dense();
  std::vector<trunc_operator<T>> deltas;
  deltas.reserve(samples.size());
  for (const auto& a : samples) deltas.push_back(delta_term_with(f_step, a, s, tol));

  trunc_operator<T> sum = matrix_power(f_step, n).to_dense();
  for (int k = 1; k <= n; ++k) {
    detail::for_each_combination(n, k, [&](const std::vector<int>& pos) {
      std::vector<trunc_operator<T>> dsel;
      dsel.reserve(pos.size());
      for (int a : pos) dsel.push_back(deltas[static_cast<size_t>(a - 1)]);
      sum = sum + f_term<T>(f_step, dsel, pos, n).to_dense();
    });
  }
  trunc_operator<T> direct = composition_w_n<T>(samples, t, tol).to_dense();
  double diff = max_abs_diff(direct, sum);
  return {std::move(direct), std::move(sum), diff};
}

class oracle_mismatch_error : public std::runtime_error {
 public:
  oracle_mismatch_error(const std::string& what, double diff)
      : std::runtime_error(what), max_diff(diff) {}
  double max_diff;
};

template <Scalar T>
struct variance_oracle_result {
  trunc_operator<T> direct;       // E[W*W] - (EW)*(EW) by tuple enumeration
  trunc_operator<T> bracket_sum;  // sum over position sets of E[F* F]
  double max_diff = 0.0;
};

// var W_n(t) computed two independent ways on an enumerable ensemble.
// The bracket route has no cross terms between different position sets:
// that cancellation is the identity the comparison certifies.
template <Scalar T>
variance_oracle_result<T> variance_w_n_oracle(const generator_ensemble<T>& e, double t, int n,
                                              double tol = 1e-12, double assert_tol = 1e-10) {
  if (n < 1 || n > 3) throw std::invalid_argument("variance_w_n_oracle: n must be in [1,3]");
  std::vector<weighted_atom<T>> atoms = e.atoms();
  int m = static_cast<int>(atoms.size());
  double s = t / n;
  std::vector<trunc_operator<T>> step_exp;
  step_exp.reserve(atoms.size());
  for (const auto& a : atoms) step_exp.push_back(matexp(a.op, s, tol).to_dense());

  int dim = e.dim();
  trunc_operator<T> eww = trunc_operator<T>::dense(dim);
  trunc_operator<T> ew = trunc_operator<T>::dense(dim);
  detail::for_each_tuple(m, n, [&](const std::vector<int>& idx) {
    double prob = 1.0;
    trunc_operator<T> w = step_exp[static_cast<size_t>(idx[0])];
    prob *= atoms[static_cast<size_t>(idx[0])].prob;
    for (int i = 1; i < n; ++i) {
      w = compose(w, step_exp[static_cast<size_t>(idx[static_cast<size_t>(i)])]);
      prob *= atoms[static_cast<size_t>(idx[static_cast<size_t>(i)])].prob;
    }
    eww = eww + T{prob} * compose(adjoint(w), w);
    ew = ew + T{prob} * w;
  });
  trunc_operator<T> direct = eww - compose(adjoint(ew), ew);

  trunc_operator<T> f_step = e.mean_semigroup(s, tol).to_dense();
  std::vector<trunc_operator<T>> deltas;
  deltas.reserve(atoms.size());
  for (int a = 0; a < m; ++a) deltas.push_back(step_exp[static_cast<size_t>(a)] - f_step);
  trunc_operator<T> brackets = trunc_operator<T>::dense(dim);
  for (int k = 1; k <= n; ++k) {
    detail::for_each_combination(n, k, [&](const std::vector<int>& pos) {
      detail::for_each_tuple(m, k, [&](const std::vector<int>& assign) {
        double prob = 1.0;
        std::vector<trunc_operator<T>> dsel;
        dsel.reserve(static_cast<size_t>(k));
        for (int j = 0; j < k; ++j) {
          prob *= atoms[static_cast<size_t>(assign[static_cast<size_t>(j)])].prob;
          dsel.push_back(deltas[static_cast<size_t>(assign[static_cast<size_t>(j)])]);
        }
        trunc_operator<T> f = f_term<T>(f_step, dsel, pos, n);
        brackets = brackets + T{prob} * compose(adjoint(f), f);
      });
    });
  }
  double diff = max_abs_diff(direct, brackets);
  if (diff > assert_tol)
    throw oracle_mismatch_error(
        "variance_w_n_oracle: routes disagree, max entry difference " + std::to_string(diff), diff);
  return {std::move(direct), std::move(brackets), diff};
}

// Per-sample step bound ||e^{At} - E e^{At}||_p <= 2 rho t e^{rho t}.
inline double delta_norm_bound(double rho, double t) {
  if (!(rho >= 0.0) || !(t >= 0.0)) throw std::invalid_argument("delta_norm_bound: negative input");
  return 2.0 * rho * t * std::exp(rho * t);
}

// ((1 + (2 rho t / n)^2)^n - 1) e^{2 rho t}: the sharp binomial form of the
// variance norm bound.  expm1/log1p keep it accurate for large n.
inline double variance_bound_binomial(double rho, double t, long n) {
  if (!(rho >= 0.0) || !(t >= 0.0)) throw std::invalid_argument("variance_bound: negative input");
  if (n < 1) throw std::invalid_argument("variance_bound: n must be >= 1");
  double r = 2.0 * rho * t / static_cast<double>(n);
  return std::expm1(static_cast<double>(n) * std::log1p(r * r)) * std::exp(2.0 * rho * t);
}

// (8 rho^2 t^2 / n) e^{4 rho^2 t^2 + 2 rho t}: the closed majorant of the
// binomial form, decaying like 1/n at fixed t.
inline double variance_bound_f(double rho, double t, long n) {
  if (!(rho >= 0.0) || !(t >= 0.0)) throw std::invalid_argument("variance_bound: negative input");
  if (n < 1) throw std::invalid_argument("variance_bound: n must be >= 1");
  double rt = rho * t;
  return (8.0 * rt * rt / static_cast<double>(n)) * std::exp(4.0 * rt * rt + 2.0 * rt);
}

// Tail bound for the uniform-in-t deviation of W_n from e^{EAt} on [0,T],
// clipped to the trivial bound 1.
template <Scalar T>
double lln_probability_bound(double rho, double horizon, long n, const trunc_vector<T>& x,
                             double p, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("lln_probability_bound: eps must be positive");
  double nx = lp_norm(x, p);
  return std::min(1.0, variance_bound_f(rho, horizon, n) * nx * nx / (eps * eps));
}

struct deviation_row {
  long n = 0;
  long trials = 0;
  double epsilon = 0.0;
  long exceed_count = 0;
  double empirical_prob = 0.0;
  confidence_interval ci;
  std::optional<double> bound;  // absent when no radius is certified
};

struct deviation_run {
  std::vector<double> t_grid;
  std::vector<double> sup_devs;  // one per trial, indexed by trial
  long clamp_events = 0;
  std::vector<deviation_row> rows;
};

// One Monte Carlo deviation experiment: `trials` independent composition
// paths, each scored by its sup over the time grid of the deviation
// ||(W_n(t) - target(t)) x|| in the given norm.  Trials are addressed by
// counter-based streams, so the result is identical for any worker count.
template <Scalar T>
deviation_run run_deviation_trials(const std::function<trunc_operator<T>(rng_stream, long*)>& draw,
                                   int dim, long n, long trials,
                                   const std::vector<double>& t_grid,
                                   const std::vector<trunc_vector<T>>& target_x,
                                   const trunc_vector<T>& x, double dev_norm_p, double tol,
                                   uint64_t seed, uint32_t experiment_id, int workers) {
  if (n < 1) throw std::invalid_argument("run_deviation_trials: n must be >= 1");
  if (trials < 1) throw std::invalid_argument("run_deviation_trials: trials must be >= 1");
  if (x.dim() != dim) throw std::invalid_argument("run_deviation_trials: x dim mismatch");
  if (target_x.size() != t_grid.size())
    throw std::invalid_argument("run_deviation_trials: target size mismatch");
  if (workers < 1) workers = 1;

  deviation_run out;
  out.t_grid = t_grid;
  out.sup_devs.assign(static_cast<size_t>(trials), 0.0);
  std::vector<long> clamps(static_cast<size_t>(workers), 0);

  auto worker = [&](int w, long lo, long hi) {
    std::vector<trunc_operator<T>> gens;
    for (long trial = lo; trial < hi; ++trial) {
      gens.clear();
      gens.reserve(static_cast<size_t>(n));
      rng_stream base{seed, experiment_id, static_cast<uint32_t>(trial), 0};
      for (long i = 0; i < n; ++i)
        gens.push_back(draw(base.with_generator(static_cast<uint32_t>(i)), &clamps[static_cast<size_t>(w)]));
      double sup = 0.0;
      for (size_t j = 0; j < t_grid.size(); ++j) {
        trunc_vector<T> y = composition_w_n_apply<T>(gens, t_grid[j], x, tol);
        sup = std::max(sup, lp_norm(y - target_x[j], dev_norm_p));
      }
      out.sup_devs[static_cast<size_t>(trial)] = sup;
    }
  };

  if (workers == 1) {
    worker(0, 0, trials);
  } else {
    // A draw or composition failure inside a pool thread must surface as an
    // exception on the calling thread, not terminate the process.
    std::vector<std::exception_ptr> errors(static_cast<size_t>(workers));
    std::vector<std::thread> pool;
    long chunk = (trials + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
      long lo = w * chunk, hi = std::min<long>(trials, lo + chunk);
      if (lo >= hi) break;
      pool.emplace_back([&, w, lo, hi] {
        try {
          worker(w, lo, hi);
        } catch (...) {
          errors[static_cast<size_t>(w)] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (const auto& err : errors)
      if (err) std::rethrow_exception(err);
  }
  for (long c : clamps) out.clamp_events += c;
  return out;
}

// Attach per-epsilon exceedance rows (empirical probability, Wilson
// interval, and the certified bound when a radius exists).
inline void score_deviation_rows(deviation_run& run, long n, double horizon,
                                 const std::vector<double>& epsilons,
                                 const std::optional<double>& rho, double x_norm_p) {
  run.rows.clear();
  long trials = static_cast<long>(run.sup_devs.size());
  for (double eps : epsilons) {
    if (!(eps > 0.0)) throw std::invalid_argument("score_deviation_rows: eps must be positive");
    deviation_row row;
    row.n = n;
    row.trials = trials;
    row.epsilon = eps;
    for (double d : run.sup_devs)
      if (d > eps) ++row.exceed_count;
    row.empirical_prob = static_cast<double>(row.exceed_count) / static_cast<double>(trials);
    row.ci = wilson_interval(row.exceed_count, trials);
    if (rho)
      row.bound = std::min(1.0, variance_bound_f(*rho, horizon, n) * x_norm_p * x_norm_p /
                                    (eps * eps));
    run.rows.push_back(row);
  }
}

template <Scalar T>
struct lln_experiment_params {
  long n = 16;
  long trials = 1000;
  double horizon = 1.0;
  int grid_points = 64;
  std::vector<double> epsilons{0.1};
  double p = 1.0;
  double dev_norm_p = 2.0;
  double tol = 1e-12;
  uint64_t seed = 1;
  uint32_t experiment_id = 1;
  int workers = 1;
};

// Full experiment against the exact target path e^{(EA)t}.
template <Scalar T>
deviation_run mc_lln_run(const generator_ensemble<T>& e, const trunc_vector<T>& x,
                         const lln_experiment_params<T>& prm) {
  std::vector<double> grid = uniform_grid(prm.horizon, prm.grid_points);
  trunc_operator<T> mean = e.mean();
  std::vector<trunc_vector<T>> target;
  target.reserve(grid.size());
  for (double t : grid) target.push_back(matvec(matexp(mean, t, prm.tol), x));
  auto draw = [&e](rng_stream s, long* clamp) { return e.sample(s, clamp); };
  deviation_run run = run_deviation_trials<T>(draw, e.dim(), prm.n, prm.trials, grid, target, x,
                                              prm.dev_norm_p, prm.tol, prm.seed,
                                              prm.experiment_id, prm.workers);
  score_deviation_rows(run, prm.n, prm.horizon, prm.epsilons, e.certified_radius(prm.p),
                       lp_norm(x, prm.p));
  return run;
}

struct chernoff_conditions {
  double identity_err = 0.0;              // || F(0) - I ||, max entry
  bool identity_ok = false;
  std::optional<double> growth_margin;    // min over grid of e^{rho t} - ||F(t)||_1
  std::optional<bool> growth_ok;          // absent when no radius is certified
  double derivative_err = 0.0;            // best finite-difference error of F'(0)x vs (EA)x
  bool derivative_ok = false;
};

struct chernoff_report {
  std::vector<long> n_values;
  std::vector<double> sup_dev;  // sup over grid of ||(F(t/n)^n - e^{EAt}) x||
  chernoff_conditions cond;
};

// Chernoff-style iterate F(t/n)^n compared with the limit semigroup, plus
// checks of the hypotheses: F(0) = I, ||F(t)|| <= e^{rho t}, F'(0) = EA
// (one-sided differences with step refinement on the probe vector).
template <Scalar T>
chernoff_report chernoff_convergence(const generator_ensemble<T>& e, const trunc_vector<T>& x,
                                     double horizon, int grid_points,
                                     const std::vector<long>& n_values, double p,
                                     double tol = 1e-12, double fd_tol = 1e-6) {
  if (!e.closed_form_semigroup())
    throw std::invalid_argument("chernoff_convergence: ensemble has no closed-form mean semigroup");
  std::vector<double> grid = uniform_grid(horizon, grid_points);
  trunc_operator<T> mean = e.mean();
  std::vector<trunc_vector<T>> target;
  target.reserve(grid.size());
  for (double t : grid) target.push_back(matvec(matexp(mean, t, tol), x));

  chernoff_report rep;
  rep.n_values = n_values;
  for (long n : n_values) {
    if (n < 1) throw std::invalid_argument("chernoff_convergence: n must be >= 1");
    double sup = 0.0;
    for (size_t j = 0; j < grid.size(); ++j) {
      trunc_operator<T> f = e.mean_semigroup(grid[j] / static_cast<double>(n), tol);
      trunc_vector<T> y = x;
      for (long i = 0; i < n; ++i) y = matvec(f, y);
      sup = std::max(sup, lp_norm(y - target[j], p));
    }
    rep.sup_dev.push_back(sup);
  }

  trunc_operator<T> ident = trunc_operator<T>::identity(e.dim()).to_dense();
  rep.cond.identity_err = max_abs_diff(e.mean_semigroup(0.0, tol).to_dense(), ident);
  rep.cond.identity_ok = rep.cond.identity_err <= 1e-12;

  if (std::optional<double> rho = e.certified_radius(1.0)) {
    double margin = inf;
    bool ok = true;
    for (double t : grid) {
      double norm = opnorm_l1_exact(e.mean_semigroup(t, tol));
      double cap = std::exp(*rho * t);
      margin = std::min(margin, cap - norm);
      if (norm > cap * (1.0 + 1e-12)) ok = false;
    }
    rep.cond.growth_margin = margin;
    rep.cond.growth_ok = ok;
  }

  trunc_vector<T> eax = matvec(mean, x);
  double best = inf;
  for (double h : {1e-3, 1e-4, 1e-5, 1e-6}) {
    trunc_vector<T> f1 = matvec(e.mean_semigroup(h, tol), x);
    trunc_vector<T> fd(x.dim());
    for (int k = 0; k < x.dim(); ++k) fd[k] = (f1[k] - x[k]) * T{1.0 / h};
    best = std::min(best, lp_norm(fd - eax, p));
    // One-sided Richardson: (4 F(h) - 3 F(0) - F(2h)) x / 2h kills the O(h) term.
    trunc_vector<T> f2 = matvec(e.mean_semigroup(2.0 * h, tol), x);
    trunc_vector<T> rich(x.dim());
    for (int k = 0; k < x.dim(); ++k)
      rich[k] = (T{4.0} * f1[k] - T{3.0} * x[k] - f2[k]) * T{1.0 / (2.0 * h)};
    best = std::min(best, lp_norm(rich - eax, p));
  }
  rep.cond.derivative_err = best;
  rep.cond.derivative_ok = best <= fd_tol;
  return rep;
}

}  // namespace randsemi
