#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "randsemi/closed_examples.hpp"
#include "randsemi/lln.hpp"

using namespace randsemi;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("closed-form draws share randomness with the ensemble sampler") {
  int dim = 16;
  auto plain = generator_ensemble<double>::rank_one_geometric(dim);
  auto scaled = generator_ensemble<double>::scaled_rank_one_geometric(dim);
  for (uint32_t trial : {0u, 1u, 5u}) {
    rng_stream base{9, 7, trial, 0};
    geometric_draws d = draw_geometric(8, dim, base);
    REQUIRE(d.xi.size() == 8);
    for (uint32_t i = 0; i < 8; ++i) {
      int k = d.xi[i];
      REQUIRE((k >= 1 && k <= dim - 1));
      auto a = plain.sample(base.with_generator(i));
      CHECK(a.entry(0, k) == 1.0);
      CHECK(column_abs_sum(a, k) == 1.0);
      auto s = scaled.sample(base.with_generator(i));
      CHECK(s.entry(0, k) == static_cast<double>(k));
    }
  }

  // Sign draws match the imaginary-diagonal sampler.
  auto diag = generator_ensemble<cdouble>::diagonal_imaginary(6);
  rng_stream base{9, 7, 2, 0};
  std::vector<int> signs = draw_signs(10, base);
  for (uint32_t i = 0; i < 10; ++i) {
    CHECK((signs[i] == 1 || signs[i] == -1));
    auto a = diag.sample(base.with_generator(i));
    CHECK(a.entry(1, 1) == cdouble(0.0, signs[i]));
  }

  // At dim = 2 every draw lands on index 1 and clamps count against the
  // ensemble's own counter under the same streams.
  geometric_draws tight = draw_geometric(64, 2, rng_stream{9, 7, 3, 0});
  CHECK(tight.clamp_events > 0);
  for (int k : tight.xi) CHECK(k == 1);
  auto tiny = generator_ensemble<double>::rank_one_geometric(2);
  long ensemble_clamps = 0;
  for (uint32_t i = 0; i < 64; ++i) tiny.sample(rng_stream{9, 7, 3, i}, &ensemble_clamps);
  CHECK(ensemble_clamps == tight.clamp_events);
}

TEST_CASE("geometric value moments") {
  int dim = 16;
  std::vector<double> w = geometric_half_weights(dim);
  auto e1 = trunc_vector<double>::basis(dim, 1);
  auto e2 = trunc_vector<double>::basis(dim, 2);
  CHECK(geometric_value_mean(e1, w) == 0.5);
  CHECK(geometric_value_variance(e1, w) == 0.25);
  CHECK(geometric_value_mean(e2, w) == 0.25);
  CHECK(geometric_value_variance(e2, w) == 0.1875);
  CHECK(geometric_scaled_mean(e2, w) == 0.5);
  CHECK(geometric_scaled_variance(e2, w) == 0.75);
  // Constant vectors are deviation-free in the plain model.
  trunc_vector<double> ones(dim);
  for (int k = 0; k < dim; ++k) ones[k] = 1.0;
  CHECK_THAT(geometric_value_mean(ones, w), WithinAbs(1.0, 1e-15));
  CHECK_THAT(geometric_value_variance(ones, w), WithinAbs(0.0, 1e-15));
}

TEST_CASE("deviation hand values") {
  int dim = 8;
  std::vector<double> w = geometric_half_weights(dim);
  trunc_vector<double> x(dim);
  x[1] = 1.0;
  x[2] = 0.5;
  x[3] = 2.0;
  std::vector<int> xi{1, 2, 2, 3};
  CHECK_THAT(rank_one_deviation(x, 1.25, xi, w), WithinRel(0.15625, 1e-14));
  CHECK_THAT(scaled_rank_one_deviation(x, 1.25, xi, w), WithinRel(0.9375, 1e-14));
}

TEST_CASE("rank-one deviation matches the matrix route") {
  for (int dim : {8, 16}) {
    auto plain = generator_ensemble<double>::rank_one_geometric(dim);
    auto scaled = generator_ensemble<double>::scaled_rank_one_geometric(dim);
    std::vector<double> w = geometric_half_weights(dim);
    philox4x32 g = rng_stream{31, 0, static_cast<uint32_t>(dim), 0}.engine();
    trunc_vector<double> x(dim);
    for (int k = 0; k < dim; ++k) x[k] = g.next_symmetric();
    for (uint32_t trial : {0u, 1u, 2u}) {
      rng_stream base{31, 7, trial, 0};
      long n = 6;
      geometric_draws d = draw_geometric(n, dim, base);
      for (double t : {0.3, 1.0}) {
        auto plain_ops = build_rank_one_ops<double>(d.xi, dim, false);
        auto w_op = composition_w_n<double>(plain_ops, t);
        double matrix_dev =
            lp_norm(matvec(w_op, x) - matvec(plain.mean_semigroup(t), x), 2.0);
        CHECK_THAT(rank_one_deviation(x, t, d.xi, w), WithinAbs(matrix_dev, 1e-10));

        auto scaled_ops = build_rank_one_ops<double>(d.xi, dim, true);
        auto ws_op = composition_w_n<double>(scaled_ops, t);
        double scaled_dev =
            lp_norm(matvec(ws_op, x) - matvec(scaled.mean_semigroup(t), x), 2.0);
        CHECK_THAT(scaled_rank_one_deviation(x, t, d.xi, w), WithinAbs(scaled_dev, 1e-10));
      }
    }
  }
}

TEST_CASE("unimodular difference against the frozen oracle") {
  cdouble v = unimodular_minus_iterate(3, 0.7, 5, 10);
  CHECK_THAT(v.real(), WithinRel(-0.30323220175000379459, 1e-13));
  CHECK_THAT(v.imag(), WithinRel(0.86742322559401689438, 1e-13));
  // Entry 0 never deviates; every entry stays within the crude modulus cap.
  CHECK(std::abs(unimodular_minus_iterate(0, 2.0, -7, 12)) == 0.0);
  for (int k : {1, 2, 9}) CHECK(std::abs(unimodular_minus_iterate(k, 1.7, 3, 5)) <= 2.0);
}

TEST_CASE("weak pairing matches the matrix route") {
  int dim = 8;
  long n = 6;
  double t = 0.9;
  trunc_vector<double> z(dim), x(dim);
  for (int k = 0; k < dim; ++k) z[k] = x[k] = std::ldexp(1.0, -k);

  // Frozen value for the fixed sign sum S = 3.
  CHECK_THAT(diag_imag_wot_pairing(z, x, t, 3, n, dim - 1),
             WithinRel(0.17940033566404876275, 1e-13));
  CHECK_THAT(diag_imag_wot_tail(z, x, 3), WithinRel(0.0103759765625, 1e-15));

  // Cross-validate against composed exponentials for sampled signs.
  auto e = generator_ensemble<cdouble>::diagonal_imaginary(dim);
  rng_stream base{33, 9, 4, 0};
  std::vector<int> signs = draw_signs(n, base);
  long s_sum = 0;
  for (int s : signs) s_sum += s;
  auto ops = build_diag_imag_ops(signs, dim);
  auto w_op = composition_w_n<cdouble>(ops, t);
  auto iterate = matrix_power(e.mean_semigroup(t / static_cast<double>(n)),
                              static_cast<long>(n));
  trunc_vector<cdouble> zc(dim), xc(dim);
  for (int k = 0; k < dim; ++k) {
    zc[k] = z[k];
    xc[k] = x[k];
  }
  double paired = std::abs(dual_pair(zc, matvec(w_op, xc) - matvec(iterate, xc)));
  CHECK_THAT(diag_imag_wot_pairing(z, x, t, s_sum, n, dim - 1), WithinAbs(paired, 1e-12));

  // The sampled operators match the sign draws entrywise.
  for (size_t i = 0; i < ops.size(); ++i)
    CHECK(max_abs_diff(ops[i].to_dense(),
                       e.sample(base.with_generator(static_cast<uint32_t>(i))).to_dense()) == 0.0);
}

TEST_CASE("norm gap pins to one on the quarter-period grid") {
  long n = 64;
  int K = 63;
  std::vector<double> grid = uniform_grid(std::numbers::pi, 64);
  // k = 63 at grid point 32 puts k t / n exactly at pi / 2, where the
  // iterate entry collapses while the unimodular entry persists.
  for (long s_sum : {-64L, -3L, 0L, 1L, 17L}) {
    double gap = diag_imag_norm_gap(grid, s_sum, n, K);
    CHECK(gap >= 1.0 - 1e-12);
    CHECK(gap <= 2.0);
  }
}

TEST_CASE("scalar tail bound") {
  CHECK(scalar_tail_bound(2.0, 0.25, 100, 0.1) == 1.0);
  CHECK_THAT(scalar_tail_bound(1.0, 0.25, 1000, 0.1), WithinRel(0.025, 1e-14));
  CHECK(scalar_tail_bound(1.0, 0.0, 1, 0.5) == 0.0);
  CHECK_THROWS_AS(scalar_tail_bound(1.0, 0.25, 0, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(scalar_tail_bound(1.0, 0.25, 10, 0.0), std::invalid_argument);
}
