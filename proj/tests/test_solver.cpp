#include <random>

#include "doctest.h"
#include "mrbench/metrics.hpp"
#include "mrbench/phantom.hpp"
#include "mrbench/solver.hpp"
#include "oracles.hpp"

using namespace mrbench;
using oracle::C;

namespace {

SamplingMask full_mask(Index w) {
  SamplingMask m;
  m.keep.assign(static_cast<std::size_t>(w), true);
  m.num_low_frequency = w;
  return m;
}

KSpaceVolume<double> single_coil_kspace(const RealVolume<double>& m) { return fft2c(as_image(m)); }

SolveConfig tv_config(double lambda, int iters) {
  SolveConfig cfg;
  cfg.lambda = lambda;
  cfg.max_iters = iters;
  cfg.regularizer.kind = RegularizerKind::TV;
  return cfg;
}

double residual_norm(const KSpaceVolume<double>& y, const SensitivitySet<double>& s, const SamplingMask& mask,
                     const ImageVolume<double>& x) {
  const auto ax = apply_mask(forward_multicoil(x, s), mask);
  return std::sqrt((ax.tensor().data() - y.tensor().data()).abs2().sum());
}

}  // namespace

TEST_CASE("lambda = 0 with full sampling returns the inverse transform") {
  const auto m = make_phantom<double>(jittered_shepp_logan(32, 32, 1, 0.05));
  const auto y = single_coil_kspace(m);
  const auto res = cs_reconstruct_singlecoil(y, full_mask(32), tv_config(0.0, 20), CropSpec{24, 24});
  const auto direct = center_crop(magnitude(ifft2c(y)), CropSpec{24, 24});
  CHECK((res.image.values() - direct.values()).abs().maxCoeff() <= 1e-12);
  REQUIRE(res.traces.size() == 1);
  for (double f : res.traces[0].objective) CHECK(f <= 1e-20);
  CHECK(res.traces[0].converged);
}

TEST_CASE("zero data converges to the zero image") {
  KSpaceVolume<double> y(1, 1, 16, 16);
  const auto mask = make_random_mask(16, MaskPolicy{4, 0.25, MaskKind::Random}, 3);
  for (auto k : {RegularizerKind::TV, RegularizerKind::L1, RegularizerKind::WaveletL1}) {
    SolveConfig cfg = tv_config(0.1, 50);
    cfg.regularizer = Regularizer{k, 2, 50};
    const auto res = cs_reconstruct_singlecoil(y, mask, cfg, CropSpec{16, 16});
    CHECK(res.image.values().abs().maxCoeff() == 0.0);
    CHECK(res.traces[0].converged);
  }
}

TEST_CASE("multi-coil solve with one unit map reproduces the single-coil solve") {
  const auto m = make_phantom<double>(jittered_shepp_logan(32, 32, 2, 0.05));
  auto y = single_coil_kspace(m);
  const auto mask = make_random_mask(32, MaskPolicy{4, 0.25, MaskKind::Random}, 4);
  y = apply_mask(y, mask);
  ComplexTensor<double> ones(Shape{1, 1, 32, 32});
  ones.data().setConstant(C(1.0));
  const SensitivitySet<double> s{ones, true};
  const auto cfg = tv_config(0.01, 30);
  const auto a = cs_reconstruct_singlecoil(y, mask, cfg, CropSpec{32, 32});
  const auto b = cs_reconstruct_multicoil(y, s, mask, cfg, CropSpec{32, 32});
  REQUIRE(a.traces[0].objective.size() == b.traces[0].objective.size());
  for (std::size_t i = 0; i < a.traces[0].objective.size(); ++i)
    CHECK(std::abs(a.traces[0].objective[i] - b.traces[0].objective[i]) <= 1e-12 * a.traces[0].objective[0]);
  CHECK((a.image.values() - b.image.values()).abs().maxCoeff() <= 1e-12);
}

TEST_CASE("vanishing lambda with full noiseless multi-coil data is near exact") {
  const auto m = make_phantom<double>(jittered_shepp_logan(48, 48, 3, 0.05));
  const auto s = make_sensitivities<double>(48, 48, 4, 5);
  const auto y = acquire(m, s, AcquisitionSpec{4, 0.0, 5}, 0);
  const auto res = cs_reconstruct_multicoil(y, s, full_mask(48), tv_config(1e-6, 100), CropSpec{48, 48});
  CHECK(nmse(res.image, m) <= 1e-3);
}

TEST_CASE("backtracking traces are non-increasing and the result is a fixed point") {
  const auto m = make_phantom<double>(jittered_shepp_logan(32, 32, 4, 0.05));
  const auto s = make_sensitivities<double>(32, 32, 4, 6);
  const auto mask = make_random_mask(32, MaskPolicy{4, 0.25, MaskKind::Random}, 7);
  const auto y = apply_mask(acquire(m, s, AcquisitionSpec{4, 0.01, 6}, 8), mask);
  for (auto k : {RegularizerKind::TV, RegularizerKind::L1, RegularizerKind::WaveletL1}) {
    SolveConfig cfg = tv_config(0.01, 300);
    cfg.regularizer = Regularizer{k, 2, 50};
    cfg.tol = 1e-9;
    const auto res = cs_reconstruct_multicoil(y, s, mask, cfg, CropSpec{32, 32});
    const auto& obj = res.traces[0].objective;
    CHECK(obj.size() >= 2);
    for (std::size_t i = 1; i < obj.size(); ++i) REQUIRE(obj[i] <= obj[i - 1]);
    CHECK(obj.back() < obj.front());
    if (k != RegularizerKind::TV) CHECK(fixed_point_residual(y, &s, mask, cfg, res.estimate, 0) <= 1e-3);
  }
}

TEST_CASE("solves are deterministic") {
  const auto m = make_phantom<double>(jittered_shepp_logan(32, 32, 5, 0.05));
  const auto mask = make_random_mask(32, MaskPolicy{4, 0.25, MaskKind::Random}, 9);
  const auto y = apply_mask(single_coil_kspace(m), mask);
  for (bool accelerate : {false, true}) {
    SolveConfig cfg = tv_config(0.01, 40);
    cfg.accelerate = accelerate;
    const auto a = cs_reconstruct_singlecoil(y, mask, cfg, CropSpec{32, 32});
    const auto b = cs_reconstruct_singlecoil(y, mask, cfg, CropSpec{32, 32});
    CHECK(a.traces[0].objective == b.traces[0].objective);
    CHECK(a.image == b.image);
  }
}

TEST_CASE("CS beats zero filling at 4x on a phantom") {
  const auto m = make_phantom<double>(jittered_shepp_logan(64, 64, 6, 0.05));
  const auto y = single_coil_kspace(m);
  const auto mask = make_random_mask(64, MaskPolicy{4, 0.08, MaskKind::Random}, 10);
  const auto ym = apply_mask(y, mask);
  const CropSpec crop{48, 48};
  const auto gt = center_crop(m, crop);
  const auto zf = zero_filled(ym, mask, crop);
  const auto cs = cs_reconstruct_singlecoil(ym, mask, tv_config(0.01, 200), crop);
  CHECK(nmse(cs.image, gt) < nmse(zf, gt));
}

TEST_CASE("zero filling") {
  const auto m = make_phantom<double>(jittered_shepp_logan(16, 20, 7, 0.05));
  const auto y = single_coil_kspace(m);
  const auto zf = zero_filled(y, full_mask(20), CropSpec{12, 12});
  CHECK((zf.values() - center_crop(magnitude(ifft2c(y)), CropSpec{12, 12}).values()).abs().maxCoeff() <= 1e-12);
  KSpaceVolume<double> zero(1, 3, 16, 20);
  CHECK(zero_filled(zero, full_mask(20), CropSpec{16, 20}).values().abs().maxCoeff() == 0.0);
}

TEST_CASE("least squares") {
  const auto m = make_phantom<double>(jittered_shepp_logan(32, 32, 8, 0.05));
  const auto s = make_sensitivities<double>(32, 32, 4, 11);
  const auto y = acquire(m, s, AcquisitionSpec{4, 0.0, 11}, 0);
  const auto full = least_squares_multicoil(y, s, full_mask(32), 50, CropSpec{32, 32});
  CHECK(nmse(full, m) <= 1e-6);

  ComplexTensor<double> ones(Shape{1, 1, 32, 32});
  ones.data().setConstant(C(1.0));
  const SensitivitySet<double> unit{ones, true};
  const auto y1 = single_coil_kspace(m);
  const auto ls1 = least_squares_multicoil(y1, unit, full_mask(32), 10, CropSpec{32, 32});
  CHECK((ls1.values() - magnitude(ifft2c(y1)).values()).abs().maxCoeff() <= 1e-12);

  const auto mask = make_random_mask(32, MaskPolicy{4, 0.25, MaskKind::Random}, 12);
  const auto noisy = apply_mask(acquire(m, s, AcquisitionSpec{4, 0.01, 11}, 13), mask);
  const ImageVolume<double> zero(1, 1, 32, 32);
  const auto est = least_squares_estimate(noisy, s, mask, 30);
  CHECK(residual_norm(noisy, s, mask, est) <= residual_norm(noisy, s, mask, zero));
}

TEST_CASE("configuration and shape errors") {
  KSpaceVolume<double> y(1, 1, 8, 8);
  const auto mask = full_mask(8);
  SolveConfig bad = tv_config(-1.0, 10);
  CHECK_THROWS_AS(cs_reconstruct_singlecoil(y, mask, bad, CropSpec{8, 8}), Error);
  bad = tv_config(0.1, 0);
  CHECK_THROWS_AS(cs_reconstruct_singlecoil(y, mask, bad, CropSpec{8, 8}), Error);
  KSpaceVolume<double> two(1, 2, 8, 8);
  CHECK_THROWS_AS(cs_reconstruct_singlecoil(two, mask, tv_config(0.1, 5), CropSpec{8, 8}), Error);
  CHECK_THROWS_AS(cs_reconstruct_singlecoil(y, full_mask(7), tv_config(0.1, 5), CropSpec{8, 8}), Error);
  ComplexTensor<double> raw(Shape{1, 2, 8, 8});
  CHECK_THROWS_AS(cs_reconstruct_multicoil(two, SensitivitySet<double>{raw, false}, mask, tv_config(0.1, 5), CropSpec{8, 8}),
                  Error);
}
