#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "randsemi/matexp.hpp"
#include "randsemi/operator.hpp"
#include "randsemi/opnorm.hpp"
#include "randsemi/rng.hpp"
#include "randsemi/serialize.hpp"
#include "randsemi/vector.hpp"

using namespace randsemi;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("lp_norm on (3,4)") {
  trunc_vector<double> x{3.0, 4.0};
  CHECK_THAT(lp_norm(x, 1.0), WithinRel(7.0, 1e-15));
  CHECK_THAT(lp_norm(x, 2.0), WithinRel(5.0, 1e-15));
  CHECK_THAT(lp_norm(x, inf), WithinRel(4.0, 1e-15));
  CHECK_THAT(lp_norm(x, 3.0), WithinRel(std::cbrt(91.0), 1e-14));
}

TEST_CASE("lp_norm rejects bad input") {
  trunc_vector<double> x{1.0, 2.0};
  CHECK_THROWS_AS(lp_norm(x, 0.5), std::invalid_argument);
  trunc_vector<double> y{1.0, std::nan("")};
  CHECK_THROWS_AS(lp_norm(y, 2.0), std::invalid_argument);
}

TEST_CASE("lp_norm axioms and monotonicity in p") {
  philox4x32 g = rng_stream{99, 0, 0, 0}.engine();
  for (int rep = 0; rep < 20; ++rep) {
    trunc_vector<double> x(12), y(12);
    for (int k = 0; k < 12; ++k) {
      x[k] = g.next_symmetric();
      y[k] = g.next_symmetric();
    }
    for (double p : {1.0, 1.5, 2.0, 3.0, inf}) {
      double nx = lp_norm(x, p);
      CHECK(nx >= 0.0);
      CHECK(lp_norm(x + y, p) <= nx + lp_norm(y, p) + 1e-12);
      CHECK_THAT(lp_norm(-2.5 * x, p), WithinRel(2.5 * nx, 1e-12));
    }
    // Sequence-space norms shrink as the exponent grows.
    CHECK(lp_norm(x, 1.5) <= lp_norm(x, 1.0) + 1e-12);
    CHECK(lp_norm(x, 2.0) <= lp_norm(x, 1.5) + 1e-12);
    CHECK(lp_norm(x, inf) <= lp_norm(x, 2.0) + 1e-12);
  }
}

TEST_CASE("complex norms and inner products") {
  trunc_vector<cdouble> x{cdouble(3, 4), cdouble(0, 0)};
  CHECK_THAT(lp_norm(x, 2.0), WithinRel(5.0, 1e-15));
  CHECK_THAT(lp_norm(x, 1.0), WithinRel(5.0, 1e-15));
  trunc_vector<cdouble> y{cdouble(0, 1), cdouble(2, 0)};
  cdouble ip = inner(x, y);  // conj(3+4i)*i = 4 + 3i
  CHECK_THAT(ip.real(), WithinAbs(4.0, 1e-15));
  CHECK_THAT(ip.imag(), WithinAbs(3.0, 1e-15));
  cdouble dp = dual_pair(x, y);  // (3+4i)*i = -4 + 3i
  CHECK_THAT(dp.real(), WithinAbs(-4.0, 1e-15));
  CHECK_THAT(dp.imag(), WithinAbs(3.0, 1e-15));
}

TEST_CASE("banded storage semantics") {
  auto u = trunc_operator<double>::banded(6, 1);
  u.set(2, 3, 5.0);
  u.set(2, 1, -1.0);
  CHECK(u.entry(2, 3) == 5.0);
  CHECK(u.entry(2, 1) == -1.0);
  CHECK(u.entry(2, 4) == 0.0);  // outside band reads zero
  CHECK(u.entry(0, 5) == 0.0);
  CHECK_THROWS_AS(u.set(2, 4, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(u.entry(6, 0), std::invalid_argument);

  auto d = u.to_dense();
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) CHECK(d.entry(i, j) == u.entry(i, j));
}

TEST_CASE("apply agrees between banded and dense") {
  philox4x32 g = rng_stream{7, 0, 0, 0}.engine();
  auto u = trunc_operator<double>::banded(16, 2);
  for (int i = 0; i < 16; ++i)
    for (int j = std::max(0, i - 2); j <= std::min(15, i + 2); ++j)
      u.set(i, j, g.next_symmetric());
  trunc_vector<double> x(16);
  for (int k = 0; k < 16; ++k) x[k] = g.next_symmetric();
  CHECK(max_abs_diff(matvec(u, x), matvec(u.to_dense(), x)) < 1e-15);
}

TEST_CASE("compose adds bandwidths and promotes to dense") {
  auto u = trunc_operator<double>::banded(64, 3);
  auto v = trunc_operator<double>::banded(64, 4);
  auto w = compose(u, v);
  CHECK(w.is_banded());
  CHECK(w.bandwidth() == 7);  // 7 <= 64/8 stays banded

  auto a = trunc_operator<double>::banded(64, 5);
  auto b = compose(a, v);  // 9 > 64/8 promotes
  CHECK_FALSE(b.is_banded());
}

TEST_CASE("compose matches brute-force product") {
  philox4x32 g = rng_stream{11, 0, 0, 0}.engine();
  int n = 10;
  auto u = trunc_operator<double>::dense(n);
  auto v = trunc_operator<double>::banded(n, 1);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) u.set(i, j, g.next_symmetric());
    for (int j = std::max(0, i - 1); j <= std::min(n - 1, i + 1); ++j)
      v.set(i, j, g.next_symmetric());
  }
  auto w = compose(u, v);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int k = 0; k < n; ++k) s += u.entry(i, k) * v.entry(k, j);
      CHECK_THAT(w.entry(i, j), WithinAbs(s, 1e-13));
    }
  // (Uv)(x) = U(v(x))
  trunc_vector<double> x(n);
  for (int k = 0; k < n; ++k) x[k] = g.next_symmetric();
  CHECK(max_abs_diff(matvec(w, x), matvec(u, matvec(v, x))) < 1e-13);
}

TEST_CASE("adjoint is an involution and moves across the inner product") {
  philox4x32 g = rng_stream{13, 0, 0, 0}.engine();
  int n = 9;
  auto u = trunc_operator<cdouble>::dense(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) u.set(i, j, cdouble(g.next_symmetric(), g.next_symmetric()));
  CHECK(max_abs_diff(adjoint(adjoint(u)), u) == 0.0);
  trunc_vector<cdouble> x(n), y(n);
  for (int k = 0; k < n; ++k) {
    x[k] = cdouble(g.next_symmetric(), g.next_symmetric());
    y[k] = cdouble(g.next_symmetric(), g.next_symmetric());
  }
  cdouble lhs = inner(matvec(u, x), y);
  cdouble rhs = inner(x, matvec(adjoint(u), y));
  CHECK_THAT(std::abs(lhs - rhs), WithinAbs(0.0, 1e-12));
  // Adjoint of banded keeps the band.
  auto b = trunc_operator<cdouble>::banded(12, 2);
  b.set(3, 5, cdouble(1, -2));
  auto bs = adjoint(b);
  CHECK(bs.is_banded());
  CHECK(bs.bandwidth() == 2);
  CHECK(bs.entry(5, 3) == cdouble(1, 2));
}

TEST_CASE("column sums and exact norms") {
  // |0><3| has a single entry in column 3.
  auto u = trunc_operator<double>::unit(8, 0, 3);
  CHECK(column_abs_sum(u, 3) == 1.0);
  CHECK(column_abs_sum(u, 0) == 0.0);
  CHECK(opnorm_l1_exact(u) == 1.0);
  CHECK(opnorm_linf_exact(u) == 1.0);
  CHECK_THROWS_AS(column_abs_sum(u, 8), std::invalid_argument);

  auto v = trunc_operator<double>::dense(3);
  v.set(0, 0, 1.0);
  v.set(1, 0, -2.0);
  v.set(2, 1, 3.0);
  CHECK(opnorm_l1_exact(v) == 3.0);   // columns: 3, 3, 0
  CHECK(opnorm_linf_exact(v) == 3.0);  // rows: 1, 2, 3
  // Interpolation bound sits between the endpoint norms.
  double b15 = opnorm_interp_bound(v, 1.5);
  CHECK_THAT(b15, WithinRel(std::pow(3.0, 1.0 / 1.5) * std::pow(3.0, 1.0 - 1.0 / 1.5), 1e-14));
}

TEST_CASE("matexp matches an independent reference on a 2x2") {
  auto a = trunc_operator<double>::dense(2);
  a.set(0, 0, 0.3);
  a.set(0, 1, -0.2);
  a.set(1, 0, 0.5);
  a.set(1, 1, 0.1);
  auto e = matexp(a, 1.3);
  CHECK_THAT(e.entry(0, 0), WithinRel(1.36390165188370391, 1e-12));
  CHECK_THAT(e.entry(0, 1), WithinRel(-0.328718529450002784, 1e-12));
  CHECK_THAT(e.entry(1, 0), WithinRel(0.821796323625006961, 1e-12));
  CHECK_THAT(e.entry(1, 1), WithinRel(1.03518312243370113, 1e-12));
}

TEST_CASE("matexp semigroup law and identity at t=0") {
  philox4x32 g = rng_stream{17, 0, 0, 0}.engine();
  int n = 6;
  auto a = trunc_operator<double>::dense(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a.set(i, j, 0.5 * g.next_symmetric());
  auto e0 = matexp(a, 0.0);
  CHECK(max_abs_diff(e0, trunc_operator<double>::identity(n).to_dense()) == 0.0);
  auto es = matexp(a, 0.4), et = matexp(a, 0.9), est = matexp(a, 1.3);
  CHECK(max_abs_diff(compose(es, et), est) < 1e-12);
}

TEST_CASE("matexp nilpotent rank-one is affine in t") {
  // A = |0><1| has A^2 = 0, so e^{At} = I + At exactly.
  auto a = trunc_operator<double>::unit(5, 0, 1);
  auto e = matexp(a, 2.75);
  auto expected = trunc_operator<double>::identity(5).to_dense() + 2.75 * a.to_dense();
  CHECK(max_abs_diff(e, expected) < 1e-14);
}

TEST_CASE("matexp diagonal fast path is exact and uncapped") {
  trunc_vector<cdouble> d(256);
  for (int k = 0; k < 256; ++k) d[k] = cdouble(0.0, k);
  auto a = trunc_operator<cdouble>::diagonal(d);
  double t = 3.14159;  // ||A||_1 * t far beyond the dense-path cap
  auto e = matexp(a, t);
  CHECK(e.is_banded());
  for (int k : {0, 1, 100, 255}) {
    cdouble expected = std::exp(cdouble(0.0, k * t));
    CHECK_THAT(std::abs(e.entry(k, k) - expected), WithinAbs(0.0, 1e-13));
  }
}

TEST_CASE("matexp rejects out-of-range input") {
  auto a = trunc_operator<double>::dense(2);
  a.set(0, 1, 300.0);
  a.set(1, 0, 300.0);
  CHECK_THROWS_AS(matexp(a, 1.0), convergence_error);
  CHECK_THROWS_AS(matexp(a, -1.0), std::invalid_argument);
}

TEST_CASE("expmv agrees with matexp action") {
  philox4x32 g = rng_stream{19, 0, 0, 0}.engine();
  int n = 12;
  auto a = trunc_operator<double>::dense(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a.set(i, j, g.next_symmetric());
  trunc_vector<double> x(n);
  for (int k = 0; k < n; ++k) x[k] = g.next_symmetric();
  double t = 1.7;
  auto via_matrix = matvec(matexp(a, t), x);
  auto via_action = expmv(a, t, x);
  CHECK(max_abs_diff(via_matrix, via_action) < 1e-10);
}

TEST_CASE("matrix_power") {
  auto u = trunc_operator<double>::dense(2);
  u.set(0, 0, 1.0);
  u.set(0, 1, 1.0);
  u.set(1, 1, 1.0);
  auto p = matrix_power(u, 5);  // upper-left Pascal: [[1,5],[0,1]]
  CHECK(p.entry(0, 1) == 5.0);
  CHECK(p.entry(0, 0) == 1.0);
  auto p0 = matrix_power(u, 0);
  CHECK(max_abs_diff(p0.to_dense(), trunc_operator<double>::identity(2).to_dense()) == 0.0);
}

TEST_CASE("opnorm_estimate l2 via power iteration") {
  trunc_vector<double> d{3.0, -1.0, 2.0};
  auto a = trunc_operator<double>::diagonal(d);
  auto est = opnorm_estimate(a, 2.0, 2.0, rng_stream{});
  CHECK(est.converged);
  CHECK_THAT(est.value, WithinRel(3.0, 1e-9));
  CHECK_THAT(opnorm_l2(trunc_operator<double>::unit(16, 0, 7)), WithinRel(1.0, 1e-9));
}

TEST_CASE("opnorm_estimate probe path is a lower bound") {
  philox4x32 g = rng_stream{23, 0, 0, 0}.engine();
  auto u = trunc_operator<double>::dense(10);
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j) u.set(i, j, g.next_symmetric());
  auto est = opnorm_estimate(u, 1.5, 1.5, rng_stream{5, 0, 0, 0});
  CHECK(est.lower_bound);
  CHECK(est.value <= opnorm_interp_bound(u, 1.5) + 1e-12);
  auto exact = opnorm_estimate(u, 1.0, 1.0, rng_stream{});
  CHECK(exact.exact);
  CHECK(exact.value == opnorm_l1_exact(u));
}

TEST_CASE("serialize round-trip dense real") {
  philox4x32 g = rng_stream{29, 0, 0, 0}.engine();
  auto u = trunc_operator<double>::dense(5);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) u.set(i, j, g.next_symmetric());
  nlohmann::json j = operator_to_json(u);
  CHECK(j["field"] == "real");
  CHECK(j["layout"] == "dense");
  auto v = operator_from_json<double>(j);
  CHECK(max_abs_diff(u, v) == 0.0);
}

TEST_CASE("serialize round-trip banded complex") {
  auto u = trunc_operator<cdouble>::banded(6, 1);
  u.set(0, 1, cdouble(0.5, -2.0));
  u.set(3, 3, cdouble(0.0, 1.0));
  nlohmann::json j = operator_to_json(u);
  CHECK(j["bandwidth"] == 1);
  auto v = operator_from_json<cdouble>(j);
  CHECK(max_abs_diff(u, v) == 0.0);
  // Real file promotes into a complex context.
  nlohmann::json jr = operator_to_json(trunc_operator<double>::identity(3));
  auto w = operator_from_json<cdouble>(jr);
  CHECK(w.entry(1, 1) == cdouble(1.0, 0.0));
}

TEST_CASE("serialize rejects malformed input") {
  nlohmann::json j = operator_to_json(trunc_operator<double>::identity(3));
  nlohmann::json bad = j;
  bad["entries"].push_back(1.0);
  CHECK_THROWS_AS(operator_from_json<double>(bad), std::invalid_argument);
  bad = j;
  bad["mystery"] = 1;
  CHECK_THROWS_AS(operator_from_json<double>(bad), std::invalid_argument);
  bad = j;
  bad["field"] = "complex";
  CHECK_THROWS_AS(operator_from_json<double>(bad), std::invalid_argument);
  nlohmann::json cj = operator_to_json(trunc_operator<cdouble>::banded(2, 0));
  CHECK_THROWS_AS(operator_from_json<double>(cj), std::invalid_argument);
}
