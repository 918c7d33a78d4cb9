#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "randsemi/conjugation.hpp"

using namespace randsemi;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("diagonal map and its inverse") {
  trunc_vector<double> x{4.0, 9.0, 12.0};
  auto mx = apply_m(x);
  CHECK(mx[0] == 4.0);
  CHECK(mx[1] == 4.5);
  CHECK(mx[2] == 4.0);
  CHECK(max_abs_diff(apply_m_inv(mx), x) < 1e-15);
}

TEST_CASE("conjugation rescales entries by the index ratio") {
  auto u = trunc_operator<double>::dense(4);
  u.set(2, 1, 6.0);
  u.set(0, 3, 8.0);
  auto c = m_conjugate(u);
  CHECK(c.entry(2, 1) == 6.0 * 3.0 / 2.0);
  CHECK(c.entry(0, 3) == 8.0 * 1.0 / 4.0);
  // Banded stays banded; diagonal entries are unchanged.
  auto b = trunc_operator<double>::banded(8, 1);
  b.set(3, 3, 2.0);
  b.set(3, 4, 2.0);
  auto cb = m_conjugate(b);
  CHECK(cb.is_banded());
  CHECK(cb.entry(3, 3) == 2.0);
  CHECK(cb.entry(3, 4) == 2.0 * 4.0 / 5.0);
}

TEST_CASE("conjugation is an algebra homomorphism") {
  philox4x32 g = rng_stream{61, 0, 0, 0}.engine();
  int n = 10;
  auto u = trunc_operator<double>::dense(n);
  auto v = trunc_operator<double>::dense(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      u.set(i, j, g.next_symmetric());
      v.set(i, j, g.next_symmetric());
    }
  CHECK(max_abs_diff(m_conjugate(compose(u, v)), compose(m_conjugate(u), m_conjugate(v))) < 1e-12);
  CHECK(max_abs_diff(m_conjugate(u + v), m_conjugate(u) + m_conjugate(v)) < 1e-15);
  auto ident = trunc_operator<double>::identity(n);
  CHECK(max_abs_diff(m_conjugate(ident).to_dense(), ident.to_dense()) == 0.0);
  // exp({A}_M t) = {e^{At}}_M.
  auto a = 0.2 * u;
  CHECK(max_abs_diff(matexp(m_conjugate(a), 0.9), m_conjugate(matexp(a, 0.9))) < 1e-10);
}

TEST_CASE("rule constants") {
  CHECK_THAT(series_rule_constant(2.0), WithinRel(2.56509966032372819, 1e-14));
  CHECK_THAT(d_diagonal_rule_constant(1), WithinRel(5.19615242270663188, 1e-14));
  CHECK(d_diagonal_rule_constant(0) == 1.0);
  CHECK_THROWS_AS(series_rule_constant(0.0), std::invalid_argument);
  CHECK_THROWS_AS(d_diagonal_rule_constant(-1), std::invalid_argument);
}

TEST_CASE("series certificate on the geometric-columns operator") {
  int n = 256;
  auto u = geometric_columns_operator<double>(n);
  // Column sums approach 2 up to the truncation tail.
  CHECK_THAT(column_abs_sum(u, 0), WithinAbs(2.0, 1e-12));
  CHECK_THAT(column_abs_sum(u, n - 1), WithinAbs(2.0, 1e-12));
  CHECK_THAT(opnorm_l1_exact(u), WithinAbs(2.0, 1e-12));
  // Weighted column sums approach 4 = 2 ||U||_1.
  double wsum = 0.0;
  for (int i = 0; i < n; ++i) wsum += (i + 1) * std::abs(u.entry(i, 0));
  CHECK_THAT(wsum, WithinAbs(4.0, 1e-12));

  auto cert = series_certificate(u, 2.0);
  CHECK(cert.premise_checked);
  CHECK_THAT(cert.constant, WithinRel(2.56509966032372819, 1e-14));
  // Measured conjugated norm stays below the certified cap and close to
  // the dimension-free limit pi sqrt(80/162).
  double measured = cert.measured_ratio * opnorm_l1_exact(u);
  CHECK(measured <= cert.constant * opnorm_l1_exact(u) + 1e-9);
  CHECK(measured <= 2.20768628128802250 + 1e-6);
  CHECK(measured > 2.0);

  // The raw operator is far larger on l_2: about sqrt(4N/3).
  double raw = opnorm_l2(u);
  CHECK(raw > 5.0 * opnorm_l1_exact(u));
  CHECK_THAT(raw, WithinRel(std::sqrt(4.0 / 3.0 * n * (1.0 - std::pow(4.0, -n))), 1e-6));
}

TEST_CASE("series certificate rejects heavy low rows") {
  // A unit entry in the last row weighs (dim) in M^{-1}U while ||U||_1 = 1.
  auto u = trunc_operator<double>::dense(16);
  u.set(15, 0, 1.0);
  CHECK_THROWS_AS(series_certificate(u, 2.0), certification_error);
  CHECK_NOTHROW(series_certificate(u, 16.0));
}

TEST_CASE("d-diagonal certificate") {
  auto e = generator_ensemble<double>::banded(64, 1.0, 2, 1.0);
  auto b = e.sample(rng_stream{71, 1, 0, 0});
  auto cert = d_diagonal_certificate(b, 2);
  CHECK(cert.premise_checked);
  CHECK_THAT(cert.constant, WithinRel(std::sqrt(125.0), 1e-14));
  CHECK(cert.measured_ratio <= cert.constant + 1e-9);
  // Narrower claim fails on a genuinely bandwidth-2 sample.
  CHECK_THROWS_AS(d_diagonal_certificate(b, 1), certification_error);
  // Dense storage with vanishing off-band entries is still certifiable.
  auto d = b.to_dense();
  CHECK_NOTHROW(d_diagonal_certificate(d, 2));
}

TEST_CASE("certified inequality holds on random banded probes") {
  philox4x32 g = rng_stream{73, 0, 0, 0}.engine();
  for (int d : {0, 1, 2, 3}) {
    auto e = generator_ensemble<double>::banded(64, 1.0, d, 1.0);
    double cc = d_diagonal_rule_constant(d);
    for (uint32_t s = 0; s < 5; ++s) {
      auto b = e.sample(rng_stream{74, 1, s, 0});
      auto cb = m_conjugate(b);
      double n1 = opnorm_l1_exact(b);
      for (int rep = 0; rep < 4; ++rep) {
        trunc_vector<double> x(64);
        for (int k = 0; k < 64; ++k) x[k] = g.next_symmetric();
        CHECK(lp_norm(matvec(cb, x), 2.0) <= cc * n1 * lp_norm(x, 2.0) * (1.0 + 1e-12));
      }
    }
  }
}

TEST_CASE("conjugated lln run certifies samples and scores rows") {
  auto base = generator_ensemble<double>::banded(24, 1.0, 1, 1.0);
  trunc_vector<double> x = trunc_vector<double>::basis(24, 0);
  lln_experiment_params<double> prm;
  prm.n = 8;
  prm.trials = 50;
  prm.horizon = 0.5;
  prm.grid_points = 8;
  prm.epsilons = {0.2};
  prm.dev_norm_p = 2.0;
  prm.seed = 21;
  prm.experiment_id = 6;
  auto res = conjugated_lln_run(base, conjugation_rule::d_diagonal, 1.0, x, prm);
  CHECK(res.base_radius == 1.0);
  CHECK_THAT(res.effective_radius, WithinRel(std::sqrt(27.0), 1e-14));
  REQUIRE(res.run.rows.size() == 1);
  REQUIRE(res.run.rows[0].bound.has_value());
  CHECK(res.run.rows[0].empirical_prob <=
        *res.run.rows[0].bound + 4.0 * res.run.rows[0].ci.half_width() + 1e-12);

  // The scaled ensemble has no l_1 radius to conjugate.
  auto s = generator_ensemble<double>::scaled_rank_one_geometric(24);
  CHECK_THROWS_AS(conjugated_lln_run(s, conjugation_rule::d_diagonal, 1.0, x, prm),
                  std::invalid_argument);
}
