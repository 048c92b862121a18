#include <random>

#include "doctest.h"
#include "mrbench/regularizers.hpp"
#include "mrbench/wavelet.hpp"
#include "oracles.hpp"

using namespace mrbench;
using oracle::C;

namespace {

// Standard DB2 taps, written out independently of the library.
const double kS3 = std::sqrt(3.0);
const double kTaps[4] = {(1 + kS3) / (4 * std::sqrt(2.0)), (3 + kS3) / (4 * std::sqrt(2.0)),
                         (3 - kS3) / (4 * std::sqrt(2.0)), (1 - kS3) / (4 * std::sqrt(2.0))};

double high_tap(int t) { return (t % 2 == 0 ? 1.0 : -1.0) * kTaps[3 - t]; }

// One periodic analysis level: out(kr, kc) = sum_a sum_b f_r[a] f_c[b] x(2kr + a, 2kc + b).
RealPlane<double> oracle_band(const RealPlane<double>& x, bool row_high, bool col_high) {
  const Index h = x.rows(), w = x.cols();
  RealPlane<double> out = RealPlane<double>::Zero(h / 2, w / 2);
  for (Index kr = 0; kr < h / 2; ++kr)
    for (Index kc = 0; kc < w / 2; ++kc)
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) {
          const double fr = row_high ? high_tap(a) : kTaps[a];
          const double fc = col_high ? high_tap(b) : kTaps[b];
          out(kr, kc) += fr * fc * x((2 * kr + a) % h, (2 * kc + b) % w);
        }
  return out;
}

}  // namespace

TEST_CASE("library taps are the standard orthonormal DB2 pair") {
  const auto h = db2_lowpass<double>();
  const auto g = db2_highpass<double>();
  for (int t = 0; t < 4; ++t) {
    CHECK(h[t] == doctest::Approx(kTaps[t]).epsilon(1e-15));
    CHECK(g[t] == doctest::Approx(high_tap(t)).epsilon(1e-15));
  }
}

TEST_CASE("constant plane has zero detail coefficients") {
  const RealPlane<double> x = RealPlane<double>::Constant(32, 32, 0.7);
  const auto p = dwt2_forward(x, 3);
  for (int l = 1; l <= 3; ++l)
    for (Band b : {Band::LH, Band::HL, Band::HH}) CHECK(p.detail(l, b).abs().maxCoeff() <= 1e-12);
  CHECK(p.ll().square().sum() == doctest::Approx(x.square().sum()).epsilon(1e-12));
}

TEST_CASE("analysis preserves energy on 32x32 with 3 levels") {
  std::mt19937_64 g(1);
  const auto x = oracle::random_plane(32, 32, g);
  const auto p = dwt2_forward(x, 3);
  CHECK(std::abs(std::sqrt(p.coeffs.abs2().sum()) - std::sqrt(x.abs2().sum())) <= 1e-10 * std::sqrt(x.abs2().sum()));
}

TEST_CASE("one level on 8x8 matches direct convolve-and-downsample") {
  std::mt19937_64 g(2);
  const auto x = oracle::random_real_plane(8, 8, g);
  const auto p = dwt2_forward(x, 1);
  CHECK((p.ll() - oracle_band(x, false, false)).abs().maxCoeff() <= 1e-12);
  // LH: low along rows (vertical), high along columns (horizontal)
  CHECK((p.detail(1, Band::LH) - oracle_band(x, false, true)).abs().maxCoeff() <= 1e-12);
  CHECK((p.detail(1, Band::HL) - oracle_band(x, true, false)).abs().maxCoeff() <= 1e-12);
  CHECK((p.detail(1, Band::HH) - oracle_band(x, true, true)).abs().maxCoeff() <= 1e-12);
}

TEST_CASE("second level analyses the first-level LL band") {
  std::mt19937_64 g(3);
  const auto x = oracle::random_real_plane(16, 16, g);
  const auto p = dwt2_forward(x, 2);
  const auto ll1 = oracle_band(x, false, false);
  CHECK((p.ll() - oracle_band(ll1, false, false)).abs().maxCoeff() <= 1e-12);
  CHECK((p.detail(2, Band::HH) - oracle_band(ll1, true, true)).abs().maxCoeff() <= 1e-12);
  CHECK((p.detail(1, Band::HL) - oracle_band(x, true, false)).abs().maxCoeff() <= 1e-12);
}

TEST_CASE("perfect reconstruction") {
  std::mt19937_64 g(4);
  const auto x = oracle::random_plane(64, 48, g);
  CHECK(oracle::rel_diff(dwt2_inverse(dwt2_forward(x, 4)), x) <= 1e-10);
  const auto r = oracle::random_real_plane(64, 48, g);
  CHECK((dwt2_inverse(dwt2_forward(r, 4)) - r).abs().maxCoeff() <= 1e-10);
  // non-dyadic sizes are zero-padded and cropped back
  const auto odd = oracle::random_real_plane(37, 29, g);
  const auto po = dwt2_forward(odd, 3);
  CHECK(po.padded_height() == 40);
  CHECK(po.padded_width() == 32);
  CHECK((dwt2_inverse(po) - odd).abs().maxCoeff() <= 1e-10);
}

TEST_CASE("zero pyramid and single-atom round trip") {
  WaveletPyramid<double> z;
  z.levels = 2;
  z.coeffs = RealPlane<double>::Zero(16, 16);
  z.original_height = 16;
  z.original_width = 16;
  CHECK(dwt2_inverse(z).abs().maxCoeff() == 0.0);

  WaveletPyramid<double> atom = z;
  atom.coeffs(1, 2) = 1.0;
  const auto plane = dwt2_inverse(atom);
  CHECK(plane.square().sum() == doctest::Approx(1.0).epsilon(1e-12));
  const auto back = dwt2_forward(plane, 2);
  CHECK(back.coeffs(1, 2) == doctest::Approx(1.0).epsilon(1e-12));
  RealPlane<double> rest = back.coeffs;
  rest(1, 2) = 0;
  CHECK(rest.abs().maxCoeff() <= 1e-12);
}

TEST_CASE("soft thresholding") {
  CHECK(soft_threshold(0.5, 0.2) == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(soft_threshold(-0.1, 0.2) == 0.0);
  CHECK(soft_threshold(-0.5, 0.2) == doctest::Approx(-0.3).epsilon(1e-15));
  const C c = soft_threshold(C(3.0, 4.0), 1.0);
  CHECK(std::abs(c - C(2.4, 3.2)) < 1e-15);
  CHECK(soft_threshold(C(0.0), 0.0) == C(0.0));

  std::mt19937_64 g(5);
  const auto p = dwt2_forward(oracle::random_real_plane(16, 16, g), 2);
  CHECK(soft_threshold_pyramid(p, 0.0).coeffs.isApprox(p.coeffs, 0.0));
  const auto q = soft_threshold_pyramid(p, 0.25);
  CHECK(q.ll().isApprox(p.ll(), 0.0));
  CHECK(detail_l1(q) < detail_l1(p));
  CHECK_THROWS_AS(soft_threshold_pyramid(p, -0.1), Error);
}

TEST_CASE("scalar soft threshold minimizes t|z| + (z - c)^2 / 2 on a grid") {
  for (double c : {-1.3, -0.2, 0.0, 0.15, 0.9}) {
    const double t = 0.3;
    const double z = soft_threshold(c, t);
    const double best = t * std::abs(z) + 0.5 * (z - c) * (z - c);
    for (double u = -2.0; u <= 2.0; u += 1e-3) REQUIRE(best <= t * std::abs(u) + 0.5 * (u - c) * (u - c) + 1e-15);
  }
}

TEST_CASE("wavelet prox is optimal against random perturbations") {
  std::mt19937_64 g(6);
  const auto x = oracle::random_plane(32, 32, g);
  Regularizer r{RegularizerKind::WaveletL1, 3, 50};
  const double t = 0.4;
  const auto z = reg_prox(r, x, t);
  auto obj = [&](const Plane<double>& v) { return t * reg_value(r, v) + 0.5 * (v - x).abs2().sum(); };
  const double best = obj(z);
  std::normal_distribution<double> n(0.0, 1e-2);
  for (int trial = 0; trial < 100; ++trial) {
    Plane<double> v = z;
    for (Index i = 0; i < v.size(); ++i) v.data()[i] += C(n(g), n(g));
    REQUIRE(obj(v) >= best - 1e-9);
  }
}

TEST_CASE("a linear ramp has vanishing interior details") {
  RealPlane<double> x(32, 32);
  for (Index i = 0; i < 32; ++i)
    for (Index j = 0; j < 32; ++j) x(i, j) = 0.1 * i + 0.05 * j;
  const auto p = dwt2_forward(x, 1);
  // DB2 has two vanishing moments; only the wrap-around coefficient sees the jump
  const auto hh = p.detail(1, Band::HH);
  const auto lh = p.detail(1, Band::LH);
  CHECK(hh.block(0, 0, 15, 15).abs().maxCoeff() <= 1e-12);
  CHECK(lh.block(0, 0, 15, 15).abs().maxCoeff() <= 1e-12);
  CHECK(lh.col(15).abs().maxCoeff() > 1e-3);
}

TEST_CASE("error conditions") {
  const RealPlane<double> small = RealPlane<double>::Zero(8, 8);
  CHECK_NOTHROW(dwt2_forward(small, 4));
  try {
    dwt2_forward(small, 5);
    FAIL("expected TooManyLevels");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TooManyLevels);
  }
  CHECK_THROWS_AS(dwt2_forward(small, 0), Error);

  WaveletPyramid<double> bad;
  bad.levels = 2;
  bad.coeffs = RealPlane<double>::Zero(6, 8);
  bad.original_height = 6;
  bad.original_width = 8;
  try {
    dwt2_inverse(bad);
    FAIL("expected MalformedPyramid");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MalformedPyramid);
  }
  try {
    soft_threshold_pyramid(dwt2_forward(small, 1), -1.0);
    FAIL("expected NegativeThreshold");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NegativeThreshold);
  }
}
