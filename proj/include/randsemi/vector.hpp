#pragma once

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <vector>

#include "randsemi/scalar.hpp"

namespace randsemi {

// Finite truncation of an l_p sequence.  Storage is 0-based; whether storage
// index 0 means basis element e_0 or e_1 is a property of the surrounding
// model, not of this container.
template <Scalar T>
class trunc_vector {
 public:
  trunc_vector() = default;
  explicit trunc_vector(int dim) : entries_(static_cast<size_t>(dim), T{}) {
    if (dim <= 0) throw std::invalid_argument("trunc_vector: dim must be positive");
  }
  trunc_vector(std::initializer_list<T> xs) : entries_(xs) {
    if (entries_.empty()) throw std::invalid_argument("trunc_vector: empty");
  }
  explicit trunc_vector(std::vector<T> xs) : entries_(std::move(xs)) {
    if (entries_.empty()) throw std::invalid_argument("trunc_vector: empty");
  }

  static trunc_vector basis(int dim, int k) {
    trunc_vector x(dim);
    if (k < 0 || k >= dim) throw std::invalid_argument("trunc_vector::basis: index out of range");
    x[k] = T{1};
    return x;
  }

  int dim() const { return static_cast<int>(entries_.size()); }
  T& operator[](int k) { return entries_[static_cast<size_t>(k)]; }
  const T& operator[](int k) const { return entries_[static_cast<size_t>(k)]; }
  const std::vector<T>& entries() const { return entries_; }

  bool all_finite() const {
    return std::all_of(entries_.begin(), entries_.end(),
                       [](const T& v) { return is_finite_value(v); });
  }

 private:
  std::vector<T> entries_;
};

// l_p norm, p in [1, inf].  Rejects p < 1 (not a norm) and non-finite input.
template <Scalar T>
double lp_norm(const trunc_vector<T>& x, double p) {
  if (!(p >= 1.0)) throw std::invalid_argument("lp_norm: p must be >= 1");
  if (!x.all_finite()) throw std::invalid_argument("lp_norm: non-finite entry");
  if (p == inf) {
    double m = 0.0;
    for (const T& v : x.entries()) m = std::max(m, std::abs(v));
    return m;
  }
  if (p == 1.0) {
    double s = 0.0;
    for (const T& v : x.entries()) s += std::abs(v);
    return s;
  }
  if (p == 2.0) {
    double s = 0.0;
    for (const T& v : x.entries()) {
      double a = std::abs(v);
      s += a * a;
    }
    return std::sqrt(s);
  }
  // Scale by the max to avoid overflow for large p.
  double m = 0.0;
  for (const T& v : x.entries()) m = std::max(m, std::abs(v));
  if (m == 0.0) return 0.0;
  double s = 0.0;
  for (const T& v : x.entries()) s += std::pow(std::abs(v) / m, p);
  return m * std::pow(s, 1.0 / p);
}

template <Scalar T>
trunc_vector<T> operator+(const trunc_vector<T>& a, const trunc_vector<T>& b) {
  if (a.dim() != b.dim()) throw std::invalid_argument("vector add: dim mismatch");
  trunc_vector<T> r(a.dim());
  for (int k = 0; k < a.dim(); ++k) r[k] = a[k] + b[k];
  return r;
}

template <Scalar T>
trunc_vector<T> operator-(const trunc_vector<T>& a, const trunc_vector<T>& b) {
  if (a.dim() != b.dim()) throw std::invalid_argument("vector sub: dim mismatch");
  trunc_vector<T> r(a.dim());
  for (int k = 0; k < a.dim(); ++k) r[k] = a[k] - b[k];
  return r;
}

template <Scalar T>
trunc_vector<T> operator*(T s, const trunc_vector<T>& a) {
  trunc_vector<T> r(a.dim());
  for (int k = 0; k < a.dim(); ++k) r[k] = s * a[k];
  return r;
}

// Hermitian inner product <a, b> = sum conj(a_k) b_k.
template <Scalar T>
T inner(const trunc_vector<T>& a, const trunc_vector<T>& b) {
  if (a.dim() != b.dim()) throw std::invalid_argument("inner: dim mismatch");
  T s{};
  for (int k = 0; k < a.dim(); ++k) s += conj_value(a[k]) * b[k];
  return s;
}

// Bilinear duality pairing <f, x> = sum f_k x_k (no conjugation).
template <Scalar T>
T dual_pair(const trunc_vector<T>& f, const trunc_vector<T>& x) {
  if (f.dim() != x.dim()) throw std::invalid_argument("dual_pair: dim mismatch");
  T s{};
  for (int k = 0; k < f.dim(); ++k) s += f[k] * x[k];
  return s;
}

template <Scalar T>
double max_abs_diff(const trunc_vector<T>& a, const trunc_vector<T>& b) {
  if (a.dim() != b.dim()) throw std::invalid_argument("max_abs_diff: dim mismatch");
  double m = 0.0;
  for (int k = 0; k < a.dim(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
  return m;
}

}  // namespace randsemi
