#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <numbers>

#include "mrbench/core.hpp"
#include "mrbench/fourier.hpp"
#include "mrbench/masking.hpp"

namespace mrbench {

/// Per-coil complex sensitivity maps, shape (map_slices, coils, H, W). A
/// single map slice is broadcast over every image slice.
template <typename T>
struct SensitivitySet {
  ComplexTensor<T> maps;
  bool normalized = false;

  Index map_slices() const { return maps.extent(0); }
  Index coils() const { return maps.extent(1); }
  Index height() const { return maps.extent(2); }
  Index width() const { return maps.extent(3); }

  auto map(Index slice, Index coil) const {
    const Index s = map_slices() == 1 ? 0 : slice;
    return maps.plane(s * coils() + coil);
  }
};

/// Relative support threshold for normalization: pixels whose RSS is below
/// this fraction of the maximum RSS get zero sensitivity.
inline constexpr double kSensitivitySupportFraction = 1e-3;

/// Divides every coil by the pixelwise RSS where RSS exceeds the support
/// threshold, and zeroes the maps elsewhere.
template <typename T>
SensitivitySet<T> normalize_sensitivities(ComplexTensor<T> maps) {
  if (maps.rank() != 4) {
    throw Error(ErrorCode::ShapeMismatch, "sensitivity maps must be (slice, coil, H, W)");
  }
  const Index coils = maps.extent(1);
  for (Index s = 0; s < maps.extent(0); ++s) {
    RealPlane<T> rss = RealPlane<T>::Zero(maps.height(), maps.width());
    for (Index c = 0; c < coils; ++c) rss += maps.plane(s * coils + c).abs2();
    rss = rss.sqrt();
    const T eps = static_cast<T>(kSensitivitySupportFraction) * rss.maxCoeff();
    const RealPlane<T> scale = (rss > eps).select(rss.inverse(), T(0));
    for (Index c = 0; c < coils; ++c) maps.plane(s * coils + c) *= scale.template cast<Complex<T>>();
  }
  return SensitivitySet<T>{std::move(maps), true};
}

namespace detail {

template <typename T, typename Stack>
void check_sensitivity_shape(const Stack& v, const SensitivitySet<T>& s) {
  if (s.height() != v.height() || s.width() != v.width()) {
    throw Error(ErrorCode::ShapeMismatch, "sensitivity maps and data differ in spatial extent");
  }
  if (s.map_slices() != 1 && s.map_slices() != v.slices()) {
    throw Error(ErrorCode::ShapeMismatch, "sensitivity map slice count mismatch");
  }
}

}  // namespace detail

/// y_i = fft2c(S_i * m) for every coil i.
template <typename T>
KSpaceVolume<T> forward_multicoil(const ImageVolume<T>& m, const SensitivitySet<T>& s) {
  if (m.coils() != 1) throw Error(ErrorCode::ShapeMismatch, "forward model takes one image per slice");
  detail::check_sensitivity_shape(m, s);
  KSpaceVolume<T> y(m.slices(), s.coils(), m.height(), m.width(), m.acquisition());
  for (Index sl = 0; sl < m.slices(); ++sl) {
    for (Index c = 0; c < s.coils(); ++c) y.plane(sl, c) = fft2c((s.map(sl, c) * m.plane(sl, 0)).eval());
  }
  return y;
}

/// sum_i conj(S_i) * ifft2c(y_i)
template <typename T>
ImageVolume<T> adjoint_multicoil(const KSpaceVolume<T>& y, const SensitivitySet<T>& s) {
  detail::check_sensitivity_shape(y, s);
  if (y.coils() != s.coils()) throw Error(ErrorCode::ShapeMismatch, "coil count mismatch");
  ImageVolume<T> m(y.slices(), 1, y.height(), y.width(), y.acquisition());
  for (Index sl = 0; sl < y.slices(); ++sl) {
    auto out = m.plane(sl, 0);
    for (Index c = 0; c < y.coils(); ++c) out += s.map(sl, c).conjugate() * ifft2c(y.plane(sl, c));
  }
  return m;
}

/// sqrt(sum_i |m_i|^2) per pixel.
template <typename T>
RealVolume<T> rss_combine(const ImageVolume<T>& coil_images) {
  RealVolume<T> out(coil_images.slices(), coil_images.height(), coil_images.width());
  for (Index sl = 0; sl < coil_images.slices(); ++sl) {
    RealPlane<T> acc = RealPlane<T>::Zero(coil_images.height(), coil_images.width());
    for (Index c = 0; c < coil_images.coils(); ++c) acc += coil_images.plane(sl, c).abs2();
    out.slice(sl) = acc.sqrt();
  }
  return out;
}

template <typename T>
RealVolume<T> rss_reconstruction(const KSpaceVolume<T>& y, const CropSpec& crop) {
  return center_crop(rss_combine(ifft2c(y)), crop);
}

struct EscCoefficients {
  Eigen::VectorXcd alpha;
  double condition = 1.0;
  bool rank_deficient = false;
};

inline constexpr double kEscRidgeFraction = 1e-9;
inline constexpr double kEscConditionLimit = 1e12;

/// Least-squares complex weights alpha minimizing
/// || sum_i alpha_i m_i - target ||^2 jointly over all slices, solved through
/// ridge-stabilized normal equations.
template <typename T>
EscCoefficients fit_esc(const ImageVolume<T>& coil_images, const RealVolume<T>& target) {
  if (coil_images.slices() != target.slices() || coil_images.height() != target.height() ||
      coil_images.width() != target.width()) {
    throw Error(ErrorCode::ShapeMismatch, "ESC fit needs coil images and target on the same grid");
  }
  const Index nc = coil_images.coils();
  Eigen::MatrixXcd gram = Eigen::MatrixXcd::Zero(nc, nc);
  Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(nc);
  const Index n = coil_images.height() * coil_images.width();
  for (Index sl = 0; sl < coil_images.slices(); ++sl) {
    Eigen::MatrixXcd a(n, nc);
    for (Index c = 0; c < nc; ++c) {
      a.col(c) = Eigen::Map<const Eigen::Matrix<Complex<T>, Eigen::Dynamic, 1>>(
                     coil_images.plane(sl, c).data(), n)
                     .template cast<std::complex<double>>();
    }
    const Eigen::VectorXcd b =
        Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>(target.slice(sl).data(), n)
            .template cast<double>()
            .template cast<std::complex<double>>();
    gram.noalias() += a.adjoint() * a;
    rhs.noalias() += a.adjoint() * b;
  }
  EscCoefficients out;
  const Eigen::VectorXd eig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>(gram).eigenvalues();
  const double lo = std::max(eig.minCoeff(), 0.0);
  out.condition = lo > 0.0 ? eig.maxCoeff() / lo : std::numeric_limits<double>::infinity();
  out.rank_deficient = !(out.condition <= kEscConditionLimit);
  const double ridge = kEscRidgeFraction * gram.trace().real() / static_cast<double>(nc);
  gram.diagonal().array() += ridge;
  out.alpha = gram.ldlt().solve(rhs);
  return out;
}

/// Single-coil k-space sum_i alpha_i y_i.
template <typename T>
KSpaceVolume<T> esc_kspace(const KSpaceVolume<T>& coil_kspace, const EscCoefficients& esc) {
  if (esc.alpha.size() != coil_kspace.coils()) {
    throw Error(ErrorCode::ShapeMismatch, "ESC coefficient count != coil count");
  }
  KSpaceVolume<T> out(coil_kspace.slices(), 1, coil_kspace.height(), coil_kspace.width(),
                      coil_kspace.acquisition());
  for (Index sl = 0; sl < coil_kspace.slices(); ++sl) {
    auto acc = out.plane(sl, 0);
    for (Index c = 0; c < coil_kspace.coils(); ++c) {
      acc += static_cast<Complex<T>>(esc.alpha(c)) * coil_kspace.plane(sl, c);
    }
  }
  return out;
}

/// Low-pass calibration: transform only the fully sampled center lines of
/// each coil and divide by the RSS of the result. `smoothing_width` > 0 tapers
/// that many columns on each edge of the center block with a half-cosine.
template <typename T>
SensitivitySet<T> estimate_sensitivities(const KSpaceVolume<T>& y, const SamplingMask& mask,
                                         Index smoothing_width = 0) {
  if (mask.num_low_frequency < 4) {
    throw Error(ErrorCode::TooFewCalibrationLines,
                "sensitivity estimation needs >= 4 center lines, mask has " +
                    std::to_string(mask.num_low_frequency));
  }
  if (mask.width() != y.width()) throw Error(ErrorCode::ShapeMismatch, "mask width mismatch");
  const Index num_low = mask.num_low_frequency;
  const Index start = center_block_start(y.width(), num_low);
  Eigen::Array<T, 1, Eigen::Dynamic> window = Eigen::Array<T, 1, Eigen::Dynamic>::Zero(y.width());
  window.segment(start, num_low).setOnes();
  const Index taper = std::min(smoothing_width, num_low / 2);
  for (Index k = 0; k < taper; ++k) {
    const T w = T(0.5) * (T(1) - std::cos(std::numbers::pi_v<T> * T(k + 1) / T(taper + 1)));
    window(start + k) = w;
    window(start + num_low - 1 - k) = w;
  }
  ComplexTensor<T> maps(Shape{y.slices(), y.coils(), y.height(), y.width()});
  for (Index sl = 0; sl < y.slices(); ++sl) {
    for (Index c = 0; c < y.coils(); ++c) {
      Plane<T> low = y.plane(sl, c);
      low.rowwise() *= window.template cast<Complex<T>>();
      maps.plane(sl * y.coils() + c) = ifft2c(low);
    }
  }
  return normalize_sensitivities(std::move(maps));
}

}  // namespace mrbench
