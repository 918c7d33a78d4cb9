#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "randsemi/ensembles.hpp"

using namespace randsemi;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

generator_ensemble<double> two_point_diagonal() {
  // Atoms diag(1,0) and diag(0,1), each with probability 1/2.
  auto u1 = trunc_operator<double>::banded(2, 0);
  u1.set(0, 0, 1.0);
  auto u2 = trunc_operator<double>::banded(2, 0);
  u2.set(1, 1, 1.0);
  return generator_ensemble<double>::discrete_atoms({{0.5, u1}, {0.5, u2}});
}

}  // namespace

TEST_CASE("factory validation") {
  CHECK_THROWS_AS(generator_ensemble<double>::bounded_dense(1, 1.0, 1.0, 1.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(generator_ensemble<double>::bounded_dense(8, 0.0, 1.0, 1.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(generator_ensemble<double>::bounded_dense(8, 1.0, 0.0, 1.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(generator_ensemble<double>::bounded_dense(8, 1.0, 1.0, 3.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(generator_ensemble<double>::banded(8, 1.0, 8, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(generator_ensemble<double>::diagonal_imaginary(8), std::invalid_argument);
  CHECK_NOTHROW(generator_ensemble<cdouble>::diagonal_imaginary(8));
  auto u = trunc_operator<double>::identity(2);
  CHECK_THROWS_AS(generator_ensemble<double>::discrete_atoms({{0.7, u}, {0.7, u}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(generator_ensemble<double>::discrete_atoms({}), std::invalid_argument);
}

TEST_CASE("geometric weights are the exact clamped law") {
  for (int dim : {2, 3, 8, 64}) {
    std::vector<double> w = geometric_half_weights(dim);
    double total = 0.0;
    for (double v : w) total += v;
    CHECK_THAT(total, WithinRel(1.0, 1e-15));
    CHECK(w[0] == 0.0);
  }
  std::vector<double> w = geometric_half_weights(4);
  CHECK(w[1] == 0.5);
  CHECK(w[2] == 0.25);
  CHECK(w[3] == 0.25);  // tail mass lands on the last index
}

TEST_CASE("samples are reproducible by stream address") {
  auto e = generator_ensemble<double>::bounded_dense(8, 1.0, 0.7, 1.0);
  rng_stream s{101, 1, 5, 2};
  CHECK(max_abs_diff(e.sample(s), e.sample(s)) == 0.0);
  CHECK(max_abs_diff(e.sample(s), e.sample(s.with_trial(6))) > 0.0);
}

TEST_CASE("bounded ensembles honor the certified radius on every sample") {
  for (double p : {1.0, 1.5, 2.0}) {
    auto e = generator_ensemble<double>::bounded_dense(12, 0.8, 1.0, p);
    REQUIRE(e.certified_radius(p).has_value());
    double rho = *e.certified_radius(p);
    CHECK(rho == 0.8);
    for (uint32_t i = 0; i < 25; ++i) {
      auto a = e.sample(rng_stream{7, 1, i, 0});
      CHECK(opnorm_interp_bound(a, p) <= rho * (1.0 + 1e-12));
    }
  }
  auto b = generator_ensemble<double>::banded(32, 1.5, 2, 1.0);
  for (uint32_t i = 0; i < 10; ++i) {
    auto a = b.sample(rng_stream{8, 1, i, 0});
    CHECK(a.is_banded());
    CHECK(a.bandwidth() == 2);
    CHECK(opnorm_l1_exact(a) <= 1.5 * (1.0 + 1e-12));
  }
}

TEST_CASE("sign symmetry gives mean zero") {
  auto e = generator_ensemble<double>::bounded_dense(6, 1.0, 1.0, 1.0);
  CHECK(opnorm_l1_exact(e.mean()) == 0.0);
  std::vector<trunc_operator<double>> samples;
  for (uint32_t i = 0; i < 4000; ++i) samples.push_back(e.sample(rng_stream{55, 1, i, 0}));
  auto m = empirical_mean<double>(samples);
  CHECK(max_abs_diff(m, e.mean()) < 0.05);
}

TEST_CASE("rank-one geometric ensemble") {
  auto e = generator_ensemble<double>::rank_one_geometric(16);
  CHECK(e.index_origin() == 0);
  CHECK(e.enumerable());
  CHECK(*e.certified_radius(1.0) == 1.0);
  CHECK(*e.certified_radius(2.0) == 1.0);

  long clamps = 0;
  for (uint32_t i = 0; i < 200; ++i) {
    auto a = e.sample(rng_stream{3, 1, i, 0}, &clamps);
    CHECK(opnorm_l1_exact(a) == 1.0);
    // Row 0 only.
    bool found = false;
    for (int k = 1; k < 16; ++k)
      if (a.entry(0, k) == 1.0) found = true;
    CHECK(found);
  }
  CHECK(clamps == 0);  // P{xi > 15} ~ 3e-5 per draw

  // Atoms reproduce the clamped law and the mean matches.
  auto atoms = e.atoms();
  CHECK(atoms.size() == 15);
  auto m = e.mean();
  CHECK_THAT(m.entry(0, 1), WithinRel(0.5, 1e-15));
  double row = 0.0;
  for (int k = 1; k < 16; ++k) row += m.entry(0, k);
  CHECK_THAT(row, WithinRel(1.0, 1e-15));
  // Clamping shows up when the truncation is tiny.
  auto small = generator_ensemble<double>::rank_one_geometric(2);
  long c2 = 0;
  for (uint32_t i = 0; i < 64; ++i) small.sample(rng_stream{4, 1, i, 0}, &c2);
  CHECK(c2 > 0);
}

TEST_CASE("scaled rank-one is the same row with unbounded scale") {
  auto e = generator_ensemble<double>::scaled_rank_one_geometric(16);
  CHECK_FALSE(e.certified_radius(1.0).has_value());
  auto a = e.sample(rng_stream{5, 1, 0, 0});
  int k = 0;
  for (int j = 1; j < 16; ++j)
    if (a.entry(0, j) != 0.0) k = j;
  CHECK(a.entry(0, k) == static_cast<double>(k));
  CHECK_THAT(e.mean().entry(0, 2), WithinRel(2.0 * 0.25, 1e-15));
}

TEST_CASE("diagonal imaginary ensemble") {
  auto e = generator_ensemble<cdouble>::diagonal_imaginary(8);
  CHECK(*e.certified_radius(2.0) == 7.0);
  CHECK(e.atoms().size() == 2);
  auto a = e.sample(rng_stream{6, 1, 0, 0});
  CHECK(a.is_banded());
  double sgn = a.entry(1, 1).imag();
  CHECK(std::abs(sgn) == 1.0);
  for (int k = 0; k < 8; ++k) {
    CHECK(a.entry(k, k).real() == 0.0);
    CHECK(a.entry(k, k).imag() == sgn * k);
  }
  CHECK(opnorm_l1_exact(e.mean()) == 0.0);
  auto f = e.mean_semigroup(0.3);
  for (int k = 0; k < 8; ++k)
    CHECK_THAT(f.entry(k, k).real(), WithinAbs(std::cos(0.3 * k), 1e-15));
}

TEST_CASE("mean_semigroup closed forms") {
  auto r = generator_ensemble<double>::rank_one_geometric(8);
  double t = 0.7;
  auto f = r.mean_semigroup(t);
  auto expected = trunc_operator<double>::identity(8).to_dense() + t * r.mean();
  CHECK(max_abs_diff(f, expected) == 0.0);

  auto e = two_point_diagonal();
  auto fa = e.mean_semigroup(1.0);
  double ehalf = std::exp(1.0);
  CHECK_THAT(fa.entry(0, 0), WithinRel(0.5 * (ehalf + 1.0), 1e-12));
  CHECK_THAT(fa.entry(1, 1), WithinRel(0.5 * (ehalf + 1.0), 1e-12));

  auto bd = generator_ensemble<double>::bounded_dense(8, 1.0, 1.0, 1.0);
  CHECK_FALSE(bd.closed_form_semigroup());
  CHECK_THROWS_AS(bd.mean_semigroup(1.0), std::invalid_argument);
  // Monte Carlo route is available instead.
  auto fm = bd.mean_semigroup_mc(0.5, 32, rng_stream{77, 9, 0xFFFFF, 0});
  CHECK(fm.dim() == 8);
}

TEST_CASE("variance operator exact on a two-atom diagonal ensemble") {
  auto e = two_point_diagonal();
  auto v = variance_exact(e);
  CHECK(v.exact);
  // mean = diag(1/2,1/2); each centered atom squares to diag(1/4,1/4).
  CHECK_THAT(v.op.entry(0, 0), WithinRel(0.25, 1e-15));
  CHECK_THAT(v.op.entry(1, 1), WithinRel(0.25, 1e-15));
  CHECK_THAT(v.op.entry(0, 1), WithinAbs(0.0, 1e-15));
}

TEST_CASE("variance operator is PSD and mc converges to exact") {
  auto e = generator_ensemble<double>::rank_one_geometric(8);
  auto v = variance_exact(e);
  // Quadratic form is nonnegative.
  philox4x32 g = rng_stream{31, 0, 0, 0}.engine();
  for (int rep = 0; rep < 10; ++rep) {
    trunc_vector<double> x(8);
    for (int k = 0; k < 8; ++k) x[k] = g.next_symmetric();
    CHECK(inner(x, matvec(v.op, x)) >= -1e-12);
  }
  auto vm = variance_mc(e, 4000, rng_stream{32, 9, 0xFFFFE, 0});
  CHECK(vm.plug_in_mean);
  CHECK(vm.sample_count == 4000);
  CHECK(max_abs_diff(vm.op, v.op) < 0.05);
}

TEST_CASE("chebyshev bound value and validation") {
  auto e = two_point_diagonal();
  auto v = variance_exact(e);
  trunc_vector<double> x{1.0, 1.0};
  CHECK_THAT(chebyshev_bound(v, x, 1.0, inf, 0.5), WithinRel(2.0, 1e-14));
  CHECK_THROWS_AS(chebyshev_bound(v, x, 3.0, 1.5, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(chebyshev_bound(v, x, 1.5, 2.0, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(chebyshev_bound(v, x, 1.0, inf, 0.0), std::invalid_argument);
  CHECK_NOTHROW(chebyshev_bound(v, x, 1.5, 3.0, 0.5));
}

TEST_CASE("chebyshev bound dominates the exact tail on enumerable ensembles") {
  auto e = generator_ensemble<double>::rank_one_geometric(12);
  auto v = variance_exact(e);
  auto m = e.mean();
  trunc_vector<double> x(12);
  x[1] = 1.0;
  x[2] = -0.5;
  x[5] = 2.0;
  for (double eps : {0.05, 0.1, 0.3, 0.8, 1.5}) {
    double exact_tail = 0.0;
    for (const auto& a : e.atoms()) {
      trunc_vector<double> dev = matvec(a.op.to_dense() - m, x);
      if (lp_norm(dev, 2.0) > eps) exact_tail += a.prob;
    }
    for (double p : {1.0, 2.0}) {
      double q = conjugate_exponent(p);
      CHECK(exact_tail <= chebyshev_bound(v, x, p, q, eps) + 1e-12);
    }
  }
}
