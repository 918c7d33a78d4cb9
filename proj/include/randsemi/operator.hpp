#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "randsemi/scalar.hpp"
#include "randsemi/vector.hpp"

namespace randsemi {

enum class layout_kind { dense, banded };

// Truncated operator on the first N coordinates of a sequence space.
// Row index is the output coordinate: (Ux)_i = sum_j u_{ij} x_j.
//
// Dense storage is row-major N*N.  Banded storage with bandwidth d keeps,
// for each row i, the entries j in [i-d, i+d] as a row of width 2d+1;
// entries outside the band read as zero.  A matrix is kept banded only
// while 2d+1 stays below the dense row width; compositions promote to
// dense once the combined bandwidth exceeds dim/8.
template <Scalar T>
class trunc_operator {
 public:
  trunc_operator() = default;

  static trunc_operator dense(int dim) {
    check_dim(dim);
    trunc_operator u;
    u.dim_ = dim;
    u.layout_ = layout_kind::dense;
    u.data_.assign(static_cast<size_t>(dim) * dim, T{});
    return u;
  }

  static trunc_operator banded(int dim, int bandwidth) {
    check_dim(dim);
    if (bandwidth < 0 || bandwidth >= dim)
      throw std::invalid_argument("trunc_operator: bandwidth out of range");
    trunc_operator u;
    u.dim_ = dim;
    u.layout_ = layout_kind::banded;
    u.bandwidth_ = bandwidth;
    u.data_.assign(static_cast<size_t>(dim) * (2 * bandwidth + 1), T{});
    return u;
  }

  static trunc_operator identity(int dim) {
    trunc_operator u = banded(dim, 0);
    for (int i = 0; i < dim; ++i) u.data_[static_cast<size_t>(i)] = T{1};
    return u;
  }

  // Rank-one unit |i><j|: picks banded or dense storage by band economy.
  static trunc_operator unit(int dim, int i, int j) {
    check_dim(dim);
    if (i < 0 || i >= dim || j < 0 || j >= dim)
      throw std::invalid_argument("trunc_operator::unit: index out of range");
    int d = std::abs(i - j);
    trunc_operator u = (d <= dim / 8) ? banded(dim, d) : dense(dim);
    u.set(i, j, T{1});
    return u;
  }

  static trunc_operator diagonal(const trunc_vector<T>& entries) {
    trunc_operator u = banded(entries.dim(), 0);
    for (int i = 0; i < entries.dim(); ++i) u.data_[static_cast<size_t>(i)] = entries[i];
    return u;
  }

  int dim() const { return dim_; }
  layout_kind layout() const { return layout_; }
  bool is_banded() const { return layout_ == layout_kind::banded; }
  int bandwidth() const { return is_banded() ? bandwidth_ : dim_ - 1; }

  T entry(int i, int j) const {
    check_index(i, j);
    if (layout_ == layout_kind::dense) return data_[static_cast<size_t>(i) * dim_ + j];
    int off = j - i + bandwidth_;
    if (off < 0 || off > 2 * bandwidth_) return T{};
    return data_[static_cast<size_t>(i) * (2 * bandwidth_ + 1) + off];
  }

  void set(int i, int j, T v) {
    check_index(i, j);
    if (layout_ == layout_kind::dense) {
      data_[static_cast<size_t>(i) * dim_ + j] = v;
      return;
    }
    int off = j - i + bandwidth_;
    if (off < 0 || off > 2 * bandwidth_)
      throw std::invalid_argument("trunc_operator::set: entry outside band");
    data_[static_cast<size_t>(i) * (2 * bandwidth_ + 1) + off] = v;
  }

  std::vector<T>& raw() { return data_; }
  const std::vector<T>& raw() const { return data_; }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(),
                       [](const T& v) { return is_finite_value(v); });
  }

  trunc_operator to_dense() const {
    if (layout_ == layout_kind::dense) return *this;
    trunc_operator u = dense(dim_);
    int w = 2 * bandwidth_ + 1;
    for (int i = 0; i < dim_; ++i) {
      int jlo = std::max(0, i - bandwidth_), jhi = std::min(dim_ - 1, i + bandwidth_);
      for (int j = jlo; j <= jhi; ++j)
        u.data_[static_cast<size_t>(i) * dim_ + j] =
            data_[static_cast<size_t>(i) * w + (j - i + bandwidth_)];
    }
    return u;
  }

 private:
  static void check_dim(int dim) {
    if (dim <= 0) throw std::invalid_argument("trunc_operator: dim must be positive");
  }
  void check_index(int i, int j) const {
    if (i < 0 || i >= dim_ || j < 0 || j >= dim_)
      throw std::invalid_argument("trunc_operator: index out of range");
  }

  int dim_ = 0;
  layout_kind layout_ = layout_kind::dense;
  int bandwidth_ = 0;
  std::vector<T> data_;
};

template <Scalar T>
trunc_vector<T> matvec(const trunc_operator<T>& u, const trunc_vector<T>& x) {
  if (u.dim() != x.dim()) throw std::invalid_argument("apply: dim mismatch");
  int n = u.dim();
  trunc_vector<T> y(n);
  if (u.is_banded()) {
    int d = u.bandwidth(), w = 2 * d + 1;
    const auto& a = u.raw();
    for (int i = 0; i < n; ++i) {
      T s{};
      int jlo = std::max(0, i - d), jhi = std::min(n - 1, i + d);
      for (int j = jlo; j <= jhi; ++j)
        s += a[static_cast<size_t>(i) * w + (j - i + d)] * x[j];
      y[i] = s;
    }
    return y;
  }
  const auto& a = u.raw();
  for (int i = 0; i < n; ++i) {
    T s{};
    const T* row = a.data() + static_cast<size_t>(i) * n;
    for (int j = 0; j < n; ++j) s += row[j] * x[j];
    y[i] = s;
  }
  return y;
}

namespace detail {
inline void check_same_dim(int a, int b, const char* what) {
  if (a != b) throw std::invalid_argument(std::string(what) + ": dim mismatch");
}
}  // namespace detail

template <Scalar T>
trunc_operator<T> operator+(const trunc_operator<T>& u, const trunc_operator<T>& v) {
  detail::check_same_dim(u.dim(), v.dim(), "operator add");
  int n = u.dim();
  if (u.is_banded() && v.is_banded()) {
    int d = std::max(u.bandwidth(), v.bandwidth());
    trunc_operator<T> r = trunc_operator<T>::banded(n, d);
    for (int i = 0; i < n; ++i) {
      int jlo = std::max(0, i - d), jhi = std::min(n - 1, i + d);
      for (int j = jlo; j <= jhi; ++j) r.set(i, j, u.entry(i, j) + v.entry(i, j));
    }
    return r;
  }
  trunc_operator<T> r = trunc_operator<T>::dense(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) r.set(i, j, u.entry(i, j) + v.entry(i, j));
  return r;
}

template <Scalar T>
trunc_operator<T> operator-(const trunc_operator<T>& u, const trunc_operator<T>& v) {
  return u + (T{-1} * v);
}

template <Scalar T>
trunc_operator<T> operator*(T s, const trunc_operator<T>& u) {
  trunc_operator<T> r = u;
  for (T& v : r.raw()) v = s * v;
  return r;
}

// Composition (uv)(x) = u(v(x)).  Banded inputs stay banded while the
// combined bandwidth is economical, otherwise the result is dense.
template <Scalar T>
trunc_operator<T> compose(const trunc_operator<T>& u, const trunc_operator<T>& v) {
  detail::check_same_dim(u.dim(), v.dim(), "compose");
  int n = u.dim();
  if (u.is_banded() && v.is_banded()) {
    int d = u.bandwidth() + v.bandwidth();
    if (d < n && d <= n / 8) {
      trunc_operator<T> r = trunc_operator<T>::banded(n, d);
      int du = u.bandwidth();
      for (int i = 0; i < n; ++i) {
        int klo = std::max(0, i - du), khi = std::min(n - 1, i + du);
        int jlo = std::max(0, i - d), jhi = std::min(n - 1, i + d);
        for (int j = jlo; j <= jhi; ++j) {
          T s{};
          int lo = std::max(klo, j - v.bandwidth()), hi = std::min(khi, j + v.bandwidth());
          for (int k = lo; k <= hi; ++k) s += u.entry(i, k) * v.entry(k, j);
          r.set(i, j, s);
        }
      }
      return r;
    }
  }
  const trunc_operator<T> ud = u.to_dense(), vd = v.to_dense();
  trunc_operator<T> r = trunc_operator<T>::dense(n);
  const auto& a = ud.raw();
  const auto& b = vd.raw();
  auto& c = r.raw();
  for (int i = 0; i < n; ++i) {
    const T* arow = a.data() + static_cast<size_t>(i) * n;
    T* crow = c.data() + static_cast<size_t>(i) * n;
    for (int k = 0; k < n; ++k) {
      T aik = arow[k];
      if (aik == T{}) continue;
      const T* brow = b.data() + static_cast<size_t>(k) * n;
      for (int j = 0; j < n; ++j) crow[j] += aik * brow[j];
    }
  }
  return r;
}

// Adjoint (conjugate transpose).  Real scalars: plain transpose.
template <Scalar T>
trunc_operator<T> adjoint(const trunc_operator<T>& u) {
  int n = u.dim();
  if (u.is_banded()) {
    int d = u.bandwidth();
    trunc_operator<T> r = trunc_operator<T>::banded(n, d);
    for (int i = 0; i < n; ++i) {
      int jlo = std::max(0, i - d), jhi = std::min(n - 1, i + d);
      for (int j = jlo; j <= jhi; ++j) r.set(j, i, conj_value(u.entry(i, j)));
    }
    return r;
  }
  trunc_operator<T> r = trunc_operator<T>::dense(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) r.set(j, i, conj_value(u.entry(i, j)));
  return r;
}

// Absolute column sum f_m(U) = sum_i |u_{im}| (m is a 0-based storage index).
template <Scalar T>
double column_abs_sum(const trunc_operator<T>& u, int m) {
  if (m < 0 || m >= u.dim()) throw std::invalid_argument("column_abs_sum: index out of range");
  double s = 0.0;
  if (u.is_banded()) {
    int d = u.bandwidth();
    int ilo = std::max(0, m - d), ihi = std::min(u.dim() - 1, m + d);
    for (int i = ilo; i <= ihi; ++i) s += std::abs(u.entry(i, m));
    return s;
  }
  for (int i = 0; i < u.dim(); ++i) s += std::abs(u.entry(i, m));
  return s;
}

// Exact operator norm l_1 -> l_1: the largest absolute column sum.
template <Scalar T>
double opnorm_l1_exact(const trunc_operator<T>& u) {
  double m = 0.0;
  for (int j = 0; j < u.dim(); ++j) m = std::max(m, column_abs_sum(u, j));
  return m;
}

// Exact operator norm l_inf -> l_inf: the largest absolute row sum.
template <Scalar T>
double opnorm_linf_exact(const trunc_operator<T>& u) {
  double m = 0.0;
  int n = u.dim();
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    if (u.is_banded()) {
      int d = u.bandwidth();
      int jlo = std::max(0, i - d), jhi = std::min(n - 1, i + d);
      for (int j = jlo; j <= jhi; ++j) s += std::abs(u.entry(i, j));
    } else {
      for (int j = 0; j < n; ++j) s += std::abs(u.entry(i, j));
    }
    m = std::max(m, s);
  }
  return m;
}

// Riesz-Thorin interpolation bound: ||U||_{p->p} <= ||U||_1^{1/p} ||U||_inf^{1-1/p}.
// Exact for p=1; a certified upper bound for 1 < p <= inf.
template <Scalar T>
double opnorm_interp_bound(const trunc_operator<T>& u, double p) {
  if (!(p >= 1.0)) throw std::invalid_argument("opnorm_interp_bound: p must be >= 1");
  double n1 = opnorm_l1_exact(u);
  if (p == 1.0) return n1;
  double ninf = opnorm_linf_exact(u);
  if (p == inf) return ninf;
  if (n1 == 0.0 || ninf == 0.0) return 0.0;
  return std::pow(n1, 1.0 / p) * std::pow(ninf, 1.0 - 1.0 / p);
}

template <Scalar T>
double max_abs_diff(const trunc_operator<T>& u, const trunc_operator<T>& v) {
  detail::check_same_dim(u.dim(), v.dim(), "max_abs_diff");
  double m = 0.0;
  for (int i = 0; i < u.dim(); ++i)
    for (int j = 0; j < u.dim(); ++j) m = std::max(m, std::abs(u.entry(i, j) - v.entry(i, j)));
  return m;
}

}  // namespace randsemi
