#include <random>

#include "doctest.h"
#include "mrbench/regularizers.hpp"
#include "oracles.hpp"

using namespace mrbench;
using oracle::C;

namespace {

Plane<double> noisy_step(Index n, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  std::normal_distribution<double> noise(0.0, 0.1);
  Plane<double> m(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) m(i, j) = C((j >= n / 2 ? 1.0 : 0.0) + noise(g), noise(g));
  return m;
}

double tv_objective(const Plane<double>& z, const Plane<double>& m, double t) {
  return t * tv::value(z) + 0.5 * (z - m).abs2().sum();
}

// Isotropic TV by explicit loops, forward differences, zero past the edge.
double tv_loop(const Plane<double>& m) {
  double acc = 0;
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) {
      const C dy = i + 1 < m.rows() ? m(i + 1, j) - m(i, j) : C(0);
      const C dx = j + 1 < m.cols() ? m(i, j + 1) - m(i, j) : C(0);
      acc += std::sqrt(std::norm(dy) + std::norm(dx));
    }
  return acc;
}

}  // namespace

TEST_CASE("regularizer values") {
  const Regularizer tvr{RegularizerKind::TV, 4, 50};
  const Regularizer l1{RegularizerKind::L1, 4, 50};
  CHECK(reg_value(tvr, Plane<double>::Constant(5, 7, C(0.3, 0.1))) == 0.0);

  RealPlane<double> step(2, 2);
  step << 0, 0, 1, 1;
  CHECK(reg_value(tvr, step) == 2.0);
  CHECK(reg_value(l1, RealPlane<double>::Constant(4, 4, 0.5)) == 8.0);

  std::mt19937_64 g(1);
  const auto x = oracle::random_plane(9, 11, g);
  CHECK(reg_value(tvr, x) == doctest::Approx(tv_loop(x)).epsilon(1e-13));
}

TEST_CASE("gradient and divergence are negative adjoints") {
  std::mt19937_64 g(2);
  const auto x = oracle::random_plane(12, 10, g);
  const tv::Gradient<C> p{oracle::random_plane(12, 10, g), oracle::random_plane(12, 10, g)};
  const auto gx = tv::gradient(x);
  const C lhs = (gx.dy * p.dy.conjugate()).sum() + (gx.dx * p.dx.conjugate()).sum();
  const C rhs = -(x * tv::divergence(p).conjugate()).sum();
  CHECK(std::abs(lhs - rhs) <= 1e-12 * std::abs(lhs));
}

TEST_CASE("prox at t = 0 is the identity for every kind") {
  std::mt19937_64 g(3);
  const auto x = oracle::random_plane(16, 16, g);
  for (auto k : {RegularizerKind::L1, RegularizerKind::WaveletL1, RegularizerKind::TV}) {
    const Regularizer r{k, 2, 50};
    CHECK(reg_prox(r, x, 0.0).isApprox(x, 0.0));
  }
  CHECK_THROWS_AS(reg_prox(Regularizer{}, x, -1.0), Error);
}

TEST_CASE("L1 prox") {
  const Regularizer l1{RegularizerKind::L1, 4, 50};
  RealPlane<double> one = RealPlane<double>::Constant(2, 2, 1.0);
  CHECK((reg_prox(l1, one, 0.4) - 0.6).abs().maxCoeff() <= 1e-15);
  Plane<double> c(1, 2);
  c << C(0.0, 2.0), C(0.1, 0.0);
  const auto z = reg_prox(l1, c, 0.5);
  CHECK(std::abs(z(0, 0) - C(0.0, 1.5)) < 1e-15);
  CHECK(z(0, 1) == C(0.0));
}

TEST_CASE("wavelet prox is threshold-in-the-transform-domain, bit for bit") {
  std::mt19937_64 g(4);
  const auto x = oracle::random_plane(32, 32, g);
  const Regularizer r{RegularizerKind::WaveletL1, 3, 50};
  const auto z = reg_prox(r, x, 0.3);
  const auto ref = dwt2_inverse(soft_threshold_pyramid(dwt2_forward(x, 3), 0.3));
  CHECK((z == ref).all());
}

TEST_CASE("TV prox with 50 inner iterations is within 1% of a long-run solve") {
  // t covers step * lambda for the benchmark grid up to 0.1
  const auto m = noisy_step(48, 5);
  for (double t : {0.01, 0.05, 0.1}) {
    const auto fast = tv::prox(m, t, 50);
    const auto ref = tv::prox(m, t, 5000);
    const double f_fast = tv_objective(fast, m, t), f_ref = tv_objective(ref, m, t);
    CHECK(f_fast <= f_ref * 1.01);
    CHECK(f_ref <= tv_objective(m, m, t));
  }
}

TEST_CASE("TV prox output beats perturbations of itself") {
  const auto m = noisy_step(24, 6);
  const double t = 0.3;
  const auto z = tv::prox(m, t, 5000);
  const double best = tv_objective(z, m, t);
  std::mt19937_64 g(7);
  std::normal_distribution<double> n(0.0, 1e-3);
  for (int trial = 0; trial < 100; ++trial) {
    Plane<double> v = z;
    for (Index i = 0; i < v.size(); ++i) v.data()[i] += C(n(g), n(g));
    REQUIRE(tv_objective(v, m, t) >= best * (1 - 1e-6));
  }
}

TEST_CASE("prox operators are nonexpansive") {
  std::mt19937_64 g(8);
  for (auto k : {RegularizerKind::L1, RegularizerKind::WaveletL1, RegularizerKind::TV}) {
    const Regularizer r{k, 3, 2000};
    for (int trial = 0; trial < 5; ++trial) {
      const auto a = oracle::random_plane(16, 16, g);
      const Plane<double> b = a + 0.1 * oracle::random_plane(16, 16, g);
      const double d_in = std::sqrt((a - b).abs2().sum());
      const double d_out = std::sqrt((reg_prox(r, a, 0.5) - reg_prox(r, b, 0.5)).abs2().sum());
      CHECK(d_out <= d_in * (1 + 1e-6));
    }
  }
}

TEST_CASE("positive homogeneity") {
  std::mt19937_64 g(9);
  const auto x = oracle::random_plane(16, 16, g);
  for (auto k : {RegularizerKind::L1, RegularizerKind::WaveletL1, RegularizerKind::TV}) {
    const Regularizer r{k, 3, 50};
    CHECK(reg_value(r, (2.5 * x).eval()) == doctest::Approx(2.5 * reg_value(r, x)).epsilon(1e-12));
    const Plane<double> lhs = reg_prox(r, (3.0 * x).eval(), 0.6);
    const Plane<double> rhs = 3.0 * reg_prox(r, x, 0.2);
    CHECK(oracle::rel_diff(lhs, rhs) <= 1e-12);
  }
}

TEST_CASE("volume-level value and prox act per plane") {
  std::mt19937_64 g(10);
  ImageVolume<double> v(2, 1, 8, 8);
  v.plane(0, 0) = oracle::random_plane(8, 8, g);
  v.plane(1, 0) = oracle::random_plane(8, 8, g);
  const Regularizer r{RegularizerKind::TV, 2, 50};
  CHECK(reg_value(r, v) == doctest::Approx(reg_value(r, v.plane(0, 0)) + reg_value(r, v.plane(1, 0))).epsilon(1e-14));
  const auto p = reg_prox(r, v, 0.1);
  CHECK(p.plane(1, 0).isApprox(reg_prox(r, v.plane(1, 0), 0.1), 0.0));
}

TEST_CASE("regularizer names") {
  for (auto k : {RegularizerKind::L1, RegularizerKind::WaveletL1, RegularizerKind::TV})
    CHECK(regularizer_from_string(to_string(k)) == k);
  CHECK_THROWS_AS(regularizer_from_string("tgv"), Error);
}
