#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "randsemi/matexp.hpp"
#include "randsemi/operator.hpp"
#include "randsemi/rng.hpp"

namespace randsemi {

enum class ensemble_kind {
  bounded_dense,
  banded,
  rank_one_geometric,
  scaled_rank_one_geometric,
  diagonal_imaginary,
  discrete_atoms,
};

template <Scalar T>
struct weighted_atom {
  double prob = 0.0;
  trunc_operator<T> op;
};

// Geometric law P{k} = 2^{-k} on k >= 1, truncated to storage indices
// 1..dim-1: the final index absorbs the tail mass so the weights are the
// exact law of the clamped draw (empirical means converge to means built
// from these weights).
inline std::vector<double> geometric_half_weights(int dim) {
  if (dim < 2) throw std::invalid_argument("geometric_half_weights: dim must be >= 2");
  std::vector<double> w(static_cast<size_t>(dim), 0.0);
  for (int k = 1; k <= dim - 2; ++k) w[static_cast<size_t>(k)] = std::ldexp(1.0, -k);
  w[static_cast<size_t>(dim - 1)] = std::ldexp(1.0, -(dim - 2));
  return w;
}

// A distribution over generators of operator semigroups on the truncation.
// Sampling is addressed by rng_stream, so any draw is reproducible and
// independent of evaluation order.
template <Scalar T>
class generator_ensemble {
 public:
  // Dense i.i.d. entries, sign-symmetric (mean zero), rescaled so that
  // ||A||_p <= rho holds with certainty via the interpolation bound.
  static generator_ensemble bounded_dense(int dim, double rho, double density, double p) {
    check_dim(dim);
    if (!(rho > 0.0)) throw std::invalid_argument("ensemble: rho must be positive");
    if (!(density > 0.0) || density > 1.0)
      throw std::invalid_argument("ensemble: density must be in (0,1]");
    check_p(p);
    generator_ensemble e;
    e.kind_ = ensemble_kind::bounded_dense;
    e.dim_ = dim;
    e.rho_ = rho;
    e.density_ = density;
    e.p_ = p;
    e.origin_ = 1;
    return e;
  }

  // Banded variant of bounded_dense.
  static generator_ensemble banded(int dim, double rho, int bandwidth, double p) {
    generator_ensemble e = bounded_dense(dim, rho, 1.0, p);
    if (bandwidth < 0 || bandwidth >= dim)
      throw std::invalid_argument("ensemble: bandwidth out of range");
    e.kind_ = ensemble_kind::banded;
    e.bandwidth_ = bandwidth;
    return e;
  }

  // A = |e_0><e_xi| with xi geometric(1/2); A^2 = 0, so e^{At} = I + tA.
  static generator_ensemble rank_one_geometric(int dim) {
    check_dim(dim);
    generator_ensemble e;
    e.kind_ = ensemble_kind::rank_one_geometric;
    e.dim_ = dim;
    e.origin_ = 0;
    return e;
  }

  // A = xi |e_0><e_xi|: the same row structure with an unbounded scale.
  static generator_ensemble scaled_rank_one_geometric(int dim) {
    generator_ensemble e = rank_one_geometric(dim);
    e.kind_ = ensemble_kind::scaled_rank_one_geometric;
    return e;
  }

  // A = i xi diag(0, 1, ..., dim-1) with a single fair sign xi per sample.
  static generator_ensemble diagonal_imaginary(int dim) {
    if constexpr (!is_complex_v<T>)
      throw std::invalid_argument("ensemble: diagonal_imaginary requires the complex field");
    check_dim(dim);
    generator_ensemble e;
    e.kind_ = ensemble_kind::diagonal_imaginary;
    e.dim_ = dim;
    e.origin_ = 0;
    return e;
  }

  static generator_ensemble discrete_atoms(std::vector<weighted_atom<T>> atoms) {
    if (atoms.empty()) throw std::invalid_argument("ensemble: no atoms");
    int dim = atoms.front().op.dim();
    double total = 0.0;
    for (const auto& a : atoms) {
      if (a.op.dim() != dim) throw std::invalid_argument("ensemble: atom dim mismatch");
      if (!(a.prob >= 0.0) || a.prob > 1.0)
        throw std::invalid_argument("ensemble: atom probability out of range");
      if (!a.op.all_finite()) throw std::invalid_argument("ensemble: non-finite atom");
      total += a.prob;
    }
    if (std::abs(total - 1.0) > 1e-12)
      throw std::invalid_argument("ensemble: atom probabilities must sum to 1");
    generator_ensemble e;
    e.kind_ = ensemble_kind::discrete_atoms;
    e.dim_ = dim;
    e.origin_ = 1;
    e.atoms_ = std::move(atoms);
    return e;
  }

  ensemble_kind kind() const { return kind_; }
  int dim() const { return dim_; }
  // Storage index of the basis element named "e1" by a descriptor.
  int index_origin() const { return origin_; }

  // Upper bound on ||A||_p that holds for every sample, when one exists.
  std::optional<double> certified_radius(double p) const {
    switch (kind_) {
      case ensemble_kind::bounded_dense:
      case ensemble_kind::banded:
        // Samples are rescaled against the interpolation bound at the
        // ensemble's own exponent; certification is for that p.
        return (p == p_) ? std::optional<double>(rho_) : interp_radius(p);
      case ensemble_kind::rank_one_geometric:
        return 1.0;
      case ensemble_kind::scaled_rank_one_geometric:
        return std::nullopt;  // unbounded in the sequence-space model
      case ensemble_kind::diagonal_imaginary:
        return static_cast<double>(dim_ - 1);
      case ensemble_kind::discrete_atoms: {
        double r = 0.0;
        for (const auto& a : atoms_) r = std::max(r, opnorm_interp_bound(a.op, p));
        return r;
      }
    }
    return std::nullopt;
  }

  bool enumerable() const {
    switch (kind_) {
      case ensemble_kind::rank_one_geometric:
      case ensemble_kind::scaled_rank_one_geometric:
      case ensemble_kind::diagonal_imaginary:
      case ensemble_kind::discrete_atoms:
        return true;
      default:
        return false;
    }
  }

  // Exact law as a finite list of atoms (clamping included for geometric
  // kinds).  Only for enumerable ensembles.
  std::vector<weighted_atom<T>> atoms() const {
    switch (kind_) {
      case ensemble_kind::discrete_atoms:
        return atoms_;
      case ensemble_kind::rank_one_geometric:
      case ensemble_kind::scaled_rank_one_geometric: {
        std::vector<double> w = geometric_half_weights(dim_);
        std::vector<weighted_atom<T>> out;
        for (int k = 1; k < dim_; ++k) {
          trunc_operator<T> a = trunc_operator<T>::unit(dim_, 0, k);
          if (kind_ == ensemble_kind::scaled_rank_one_geometric)
            a = T{static_cast<double>(k)} * a;
          out.push_back({w[static_cast<size_t>(k)], std::move(a)});
        }
        return out;
      }
      case ensemble_kind::diagonal_imaginary: {
        std::vector<weighted_atom<T>> out;
        for (int s : {1, -1}) out.push_back({0.5, diag_imag_atom(s)});
        return out;
      }
      default:
        throw std::invalid_argument("ensemble: not enumerable");
    }
  }

  trunc_operator<T> sample(const rng_stream& stream, long* clamp_events = nullptr) const {
    philox4x32 g = stream.engine();
    switch (kind_) {
      case ensemble_kind::bounded_dense: {
        trunc_operator<T> a = trunc_operator<T>::dense(dim_);
        fill_symmetric(a, g);
        return rescale(a);
      }
      case ensemble_kind::banded: {
        trunc_operator<T> a = trunc_operator<T>::banded(dim_, bandwidth_);
        fill_symmetric(a, g);
        return rescale(a);
      }
      case ensemble_kind::rank_one_geometric:
      case ensemble_kind::scaled_rank_one_geometric: {
        int xi = g.next_geometric_half();
        if (xi > dim_ - 1) {
          xi = dim_ - 1;
          if (clamp_events) ++*clamp_events;
        }
        trunc_operator<T> a = trunc_operator<T>::unit(dim_, 0, xi);
        if (kind_ == ensemble_kind::scaled_rank_one_geometric)
          a = T{static_cast<double>(xi)} * a;
        return a;
      }
      case ensemble_kind::diagonal_imaginary:
        return diag_imag_atom(g.next_sign());
      case ensemble_kind::discrete_atoms: {
        double u = g.next_u01(), acc = 0.0;
        for (const auto& a : atoms_) {
          acc += a.prob;
          if (u < acc) return a.op;
        }
        return atoms_.back().op;  // guard against cumulative round-off
      }
    }
    throw std::logic_error("ensemble: unreachable");
  }

  // E A, exact.  Sign-symmetric kinds have mean zero.
  trunc_operator<T> mean() const {
    switch (kind_) {
      case ensemble_kind::bounded_dense:
        return trunc_operator<T>::dense(dim_);
      case ensemble_kind::banded:
        return trunc_operator<T>::banded(dim_, bandwidth_);
      case ensemble_kind::diagonal_imaginary:
        return trunc_operator<T>::banded(dim_, 0);
      case ensemble_kind::rank_one_geometric:
      case ensemble_kind::scaled_rank_one_geometric: {
        std::vector<double> w = geometric_half_weights(dim_);
        trunc_operator<T> m = trunc_operator<T>::dense(dim_);
        for (int k = 1; k < dim_; ++k) {
          double scale = (kind_ == ensemble_kind::scaled_rank_one_geometric) ? k : 1.0;
          m.set(0, k, T{w[static_cast<size_t>(k)] * scale});
        }
        return m;
      }
      case ensemble_kind::discrete_atoms: {
        trunc_operator<T> m = trunc_operator<T>::dense(dim_);
        for (const auto& a : atoms_) m = m + T{a.prob} * a.op.to_dense();
        return m;
      }
    }
    throw std::logic_error("ensemble: unreachable");
  }

  bool closed_form_semigroup() const {
    return kind_ != ensemble_kind::bounded_dense && kind_ != ensemble_kind::banded;
  }

  // F(t) = E e^{At} in closed form.  Rank-one kinds: I + t E A (A^2 = 0).
  // Imaginary diagonal: diag(cos(k t)).  Atoms: the weighted sum of
  // exponentials.
  trunc_operator<T> mean_semigroup(double t, double tol = 1e-12) const {
    if (!(t >= 0.0)) throw std::invalid_argument("mean_semigroup: t must be >= 0");
    switch (kind_) {
      case ensemble_kind::rank_one_geometric:
      case ensemble_kind::scaled_rank_one_geometric:
        return trunc_operator<T>::identity(dim_).to_dense() + T{t} * mean();
      case ensemble_kind::diagonal_imaginary: {
        trunc_operator<T> f = trunc_operator<T>::banded(dim_, 0);
        for (int k = 0; k < dim_; ++k) f.set(k, k, T{std::cos(k * t)});
        return f;
      }
      case ensemble_kind::discrete_atoms: {
        trunc_operator<T> f = trunc_operator<T>::dense(dim_);
        for (const auto& a : atoms_) f = f + T{a.prob} * matexp(a.op, t, tol).to_dense();
        return f;
      }
      default:
        throw std::invalid_argument("mean_semigroup: no closed form for this ensemble");
    }
  }

  trunc_operator<T> mean_semigroup_mc(double t, int count, const rng_stream& base,
                                      double tol = 1e-12) const {
    if (count < 1) throw std::invalid_argument("mean_semigroup_mc: count must be >= 1");
    trunc_operator<T> acc = trunc_operator<T>::dense(dim_);
    for (int i = 0; i < count; ++i) {
      trunc_operator<T> a = sample(base.with_generator(base.generator_index + i));
      acc = acc + matexp(a, t, tol).to_dense();
    }
    return T{1.0 / count} * acc;
  }

  std::string describe() const {
    switch (kind_) {
      case ensemble_kind::bounded_dense:
        return "bounded_dense(dim=" + std::to_string(dim_) + ",rho=" + std::to_string(rho_) +
               ",density=" + std::to_string(density_) + ",p=" + std::to_string(p_) + ")";
      case ensemble_kind::banded:
        return "banded(dim=" + std::to_string(dim_) + ",rho=" + std::to_string(rho_) +
               ",bandwidth=" + std::to_string(bandwidth_) + ",p=" + std::to_string(p_) + ")";
      case ensemble_kind::rank_one_geometric:
        return "rank_one_geometric(dim=" + std::to_string(dim_) + ")";
      case ensemble_kind::scaled_rank_one_geometric:
        return "scaled_rank_one_geometric(dim=" + std::to_string(dim_) + ")";
      case ensemble_kind::diagonal_imaginary:
        return "diagonal_imaginary(dim=" + std::to_string(dim_) + ")";
      case ensemble_kind::discrete_atoms:
        return "discrete_atoms(dim=" + std::to_string(dim_) +
               ",count=" + std::to_string(atoms_.size()) + ")";
    }
    return "?";
  }

 private:
  static void check_dim(int dim) {
    if (dim < 2) throw std::invalid_argument("ensemble: dim must be >= 2");
  }
  static void check_p(double p) {
    if (!(p >= 1.0) || !(p <= 2.0))
      throw std::invalid_argument("ensemble: p must be in [1,2]");
  }

  void fill_symmetric(trunc_operator<T>& a, philox4x32& g) const {
    int n = a.dim(), d = a.is_banded() ? a.bandwidth() : n - 1;
    for (int i = 0; i < n; ++i) {
      int jlo = std::max(0, i - d), jhi = std::min(n - 1, i + d);
      for (int j = jlo; j <= jhi; ++j) {
        bool keep = density_ >= 1.0 || g.next_u01() < density_;
        if (!keep) continue;
        if constexpr (is_complex_v<T>) {
          a.set(i, j, cdouble(g.next_symmetric(), g.next_symmetric()));
        } else {
          a.set(i, j, g.next_symmetric());
        }
      }
    }
  }

  trunc_operator<T> rescale(const trunc_operator<T>& a) const {
    double b = opnorm_interp_bound(a, p_);
    if (b == 0.0) return a;
    return T{rho_ / b} * a;
  }

  std::optional<double> interp_radius(double p) const {
    // Rescaling pins the p_-interpolation bound to rho_; the product
    // ||.||_1^{1/p} ||.||_inf^{1-1/p} at another exponent is not pinned,
    // so only the native exponent is certified.
    return (p == p_) ? std::optional<double>(rho_) : std::nullopt;
  }

  trunc_operator<T> diag_imag_atom(int sign) const {
    trunc_operator<T> a = trunc_operator<T>::banded(dim_, 0);
    if constexpr (is_complex_v<T>) {
      for (int k = 0; k < dim_; ++k) a.set(k, k, cdouble(0.0, sign * static_cast<double>(k)));
    }
    return a;
  }

  ensemble_kind kind_ = ensemble_kind::discrete_atoms;
  int dim_ = 0;
  int origin_ = 1;
  double rho_ = 1.0;
  double density_ = 1.0;
  double p_ = 1.0;
  int bandwidth_ = 0;
  std::vector<weighted_atom<T>> atoms_;
};

template <Scalar T>
trunc_operator<T> empirical_mean(std::span<const trunc_operator<T>> samples) {
  if (samples.empty()) throw std::invalid_argument("empirical_mean: no samples");
  trunc_operator<T> acc = samples.front().to_dense();
  for (size_t i = 1; i < samples.size(); ++i) acc = acc + samples[i].to_dense();
  return T{1.0 / static_cast<double>(samples.size())} * acc;
}

template <Scalar T>
struct variance_operator_result {
  trunc_operator<T> op;
  bool exact = false;
  bool plug_in_mean = false;
  long sample_count = 0;
};

// var A = E[(A - EA)*(A - EA)], by exact enumeration of the law.
template <Scalar T>
variance_operator_result<T> variance_exact(const generator_ensemble<T>& e) {
  trunc_operator<T> m = e.mean();
  trunc_operator<T> acc = trunc_operator<T>::dense(e.dim());
  for (const auto& a : e.atoms()) {
    trunc_operator<T> c = a.op.to_dense() - m;
    acc = acc + T{a.prob} * compose(adjoint(c), c);
  }
  return {std::move(acc), true, false, 0};
}

// Monte Carlo variance with the plug-in empirical mean.
template <Scalar T>
variance_operator_result<T> variance_mc(const generator_ensemble<T>& e, int count,
                                        const rng_stream& base) {
  if (count < 2) throw std::invalid_argument("variance_mc: count must be >= 2");
  std::vector<trunc_operator<T>> samples;
  samples.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i)
    samples.push_back(e.sample(base.with_generator(base.generator_index + i)));
  trunc_operator<T> m = empirical_mean<T>(samples);
  trunc_operator<T> acc = trunc_operator<T>::dense(e.dim());
  for (const auto& s : samples) {
    trunc_operator<T> c = s.to_dense() - m;
    acc = acc + compose(adjoint(c), c);
  }
  return {T{1.0 / count} * acc, false, true, count};
}

// Deviation tail bound P{ ||(A - EA)x||_2 > eps } <= ||(var A) x||_q ||x||_p / eps^2.
// Requires 1 <= p <= 2 and the conjugate exponent q.
template <Scalar T>
double chebyshev_bound(const variance_operator_result<T>& v, const trunc_vector<T>& x, double p,
                       double q, double eps) {
  if (!(p >= 1.0) || !(p <= 2.0)) throw std::invalid_argument("chebyshev_bound: p must be in [1,2]");
  if (!conjugate_pair(p, q)) throw std::invalid_argument("chebyshev_bound: q must conjugate p");
  if (!(eps > 0.0)) throw std::invalid_argument("chebyshev_bound: eps must be positive");
  return lp_norm(matvec(v.op, x), q) * lp_norm(x, p) / (eps * eps);
}

}  // namespace randsemi
