#pragma once

#include <array>
#include <vector>
#include <cmath>

#include "mrbench/core.hpp"

namespace mrbench {

/// Orthonormal Daubechies-2 (four-tap) analysis low-pass filter.
template <typename Real>
std::array<Real, 4> db2_lowpass() {
  const Real s3 = std::sqrt(Real(3));
  const Real norm = Real(4) * std::sqrt(Real(2));
  return {(1 + s3) / norm, (3 + s3) / norm, (3 - s3) / norm, (1 - s3) / norm};
}

/// Quadrature-mirror high-pass: g[t] = (-1)^t h[3 - t].
template <typename Real>
std::array<Real, 4> db2_highpass() {
  const auto h = db2_lowpass<Real>();
  return {h[3], -h[2], h[1], -h[0]};
}

enum class Band { LH, HL, HH };

/// Multi-level 2-D decomposition stored in Mallat layout: the coarsest LL
/// band sits in the top-left corner of `coeffs`, and level l (1 = finest)
/// detail bands occupy the three remaining quadrants of the top-left
/// (H >> (l - 1)) x (W >> (l - 1)) block.
template <typename Elem>
struct WaveletPyramid {
  int levels = 0;
  PlaneOf<Elem> coeffs;
  Index original_height = 0;
  Index original_width = 0;

  Index padded_height() const { return coeffs.rows(); }
  Index padded_width() const { return coeffs.cols(); }
  Index ll_height() const { return coeffs.rows() >> levels; }
  Index ll_width() const { return coeffs.cols() >> levels; }

  auto ll() { return coeffs.topLeftCorner(ll_height(), ll_width()); }
  auto ll() const { return coeffs.topLeftCorner(ll_height(), ll_width()); }

  auto detail(int level, Band band) const {
    const Index h = coeffs.rows() >> level, w = coeffs.cols() >> level;
    switch (band) {
      case Band::LH: return coeffs.block(0, w, h, w);
      case Band::HL: return coeffs.block(h, 0, h, w);
      default: return coeffs.block(h, w, h, w);
    }
  }

  bool well_formed() const {
    if (levels < 1 || levels > 30) return false;
    const Index step = Index{1} << levels;
    return coeffs.rows() > 0 && coeffs.cols() > 0 && coeffs.rows() % step == 0 &&
           coeffs.cols() % step == 0 && original_height >= 1 && original_width >= 1 &&
           original_height <= coeffs.rows() && original_width <= coeffs.cols();
  }
};

inline constexpr int kDefaultWaveletLevels = 4;

namespace detail {

inline Index round_up(Index n, Index step) { return (n + step - 1) / step * step; }

/// One analysis step along a strided 1-D signal of even length n with
/// periodic extension; lows go to [0, n/2), highs to [n/2, n).
template <typename Elem, typename Real>
void analyze_line(Elem* x, Index n, Index stride, std::vector<Elem>& scratch,
                  const std::array<Real, 4>& h, const std::array<Real, 4>& g) {
  scratch.assign(static_cast<std::size_t>(n), Elem(0));
  const Index half = n / 2;
  for (Index k = 0; k < half; ++k) {
    Elem lo(0), hi(0);
    for (Index t = 0; t < 4; ++t) {
      const Elem v = x[((2 * k + t) % n) * stride];
      lo += h[t] * v;
      hi += g[t] * v;
    }
    scratch[k] = lo;
    scratch[half + k] = hi;
  }
  for (Index i = 0; i < n; ++i) x[i * stride] = scratch[i];
}

template <typename Elem, typename Real>
void synthesize_line(Elem* x, Index n, Index stride, std::vector<Elem>& scratch,
                     const std::array<Real, 4>& h, const std::array<Real, 4>& g) {
  scratch.assign(static_cast<std::size_t>(n), Elem(0));
  const Index half = n / 2;
  for (Index k = 0; k < half; ++k) {
    const Elem lo = x[k * stride];
    const Elem hi = x[(half + k) * stride];
    for (Index t = 0; t < 4; ++t) scratch[(2 * k + t) % n] += h[t] * lo + g[t] * hi;
  }
  for (Index i = 0; i < n; ++i) x[i * stride] = scratch[i];
}

}  // namespace detail

/// Separable DB2 analysis with periodic boundaries. Each axis is zero-padded
/// up to a multiple of 2^levels first.
template <typename Derived>
auto dwt2_forward(const Eigen::ArrayBase<Derived>& plane, int levels = kDefaultWaveletLevels) {
  using Elem = typename Derived::Scalar;
  using Real = typename Eigen::NumTraits<Elem>::Real;
  const Index h = plane.rows(), w = plane.cols();
  if (levels < 1 || levels > 30 || (Index{1} << levels) > 2 * std::min(h, w)) {
    throw Error(ErrorCode::TooManyLevels,
                std::to_string(levels) + " levels is too deep for a " + std::to_string(h) + "x" +
                    std::to_string(w) + " plane");
  }
  const Index step = Index{1} << levels;
  WaveletPyramid<Elem> p;
  p.levels = levels;
  p.original_height = h;
  p.original_width = w;
  p.coeffs = PlaneOf<Elem>::Zero(detail::round_up(h, step), detail::round_up(w, step));
  p.coeffs.topLeftCorner(h, w) = plane;

  const auto lo = db2_lowpass<Real>();
  const auto hi = db2_highpass<Real>();
  std::vector<Elem> scratch;
  const Index row_stride = p.coeffs.cols();
  Index ch = p.coeffs.rows(), cw = p.coeffs.cols();
  for (int l = 0; l < levels; ++l) {
    for (Index i = 0; i < ch; ++i) {
      detail::analyze_line(p.coeffs.data() + i * row_stride, cw, 1, scratch, lo, hi);
    }
    for (Index j = 0; j < cw; ++j) {
      detail::analyze_line(p.coeffs.data() + j, ch, row_stride, scratch, lo, hi);
    }
    ch /= 2;
    cw /= 2;
  }
  return p;
}

template <typename Elem>
PlaneOf<Elem> dwt2_inverse(const WaveletPyramid<Elem>& p) {
  using Real = typename Eigen::NumTraits<Elem>::Real;
  if (!p.well_formed()) throw Error(ErrorCode::MalformedPyramid, "malformed wavelet pyramid");
  PlaneOf<Elem> c = p.coeffs;
  const auto lo = db2_lowpass<Real>();
  const auto hi = db2_highpass<Real>();
  std::vector<Elem> scratch;
  const Index row_stride = c.cols();
  for (int l = p.levels - 1; l >= 0; --l) {
    const Index ch = c.rows() >> l, cw = c.cols() >> l;
    for (Index j = 0; j < cw; ++j) detail::synthesize_line(c.data() + j, ch, row_stride, scratch, lo, hi);
    for (Index i = 0; i < ch; ++i) detail::synthesize_line(c.data() + i * row_stride, cw, 1, scratch, lo, hi);
  }
  return c.topLeftCorner(p.original_height, p.original_width);
}

/// c -> c * max(|c| - t, 0) / |c|, with 0 when |c| == 0.
template <typename Elem, typename Real>
Elem soft_threshold(const Elem& c, Real t) {
  const Real mag = std::abs(c);
  if (mag <= t) return Elem(0);
  return c * ((mag - t) / mag);
}

/// Soft-thresholds every detail coefficient; the coarse LL band is untouched.
template <typename Elem, typename Real>
WaveletPyramid<Elem> soft_threshold_pyramid(WaveletPyramid<Elem> p, Real t) {
  if (t < 0) throw Error(ErrorCode::NegativeThreshold, "threshold must be >= 0");
  if (t == 0) return p;
  const Index lh = p.ll_height(), lw = p.ll_width();
  for (Index i = 0; i < p.coeffs.rows(); ++i) {
    for (Index j = 0; j < p.coeffs.cols(); ++j) {
      if (i < lh && j < lw) continue;
      p.coeffs(i, j) = soft_threshold(p.coeffs(i, j), t);
    }
  }
  return p;
}

/// Sum of moduli of the detail coefficients.
template <typename Elem>
typename Eigen::NumTraits<Elem>::Real detail_l1(const WaveletPyramid<Elem>& p) {
  using Real = typename Eigen::NumTraits<Elem>::Real;
  const Index lh = p.ll_height(), lw = p.ll_width();
  Real acc = 0;
  for (Index i = 0; i < p.coeffs.rows(); ++i) {
    for (Index j = (i < lh ? lw : 0); j < p.coeffs.cols(); ++j) acc += std::abs(p.coeffs(i, j));
  }
  return acc;
}

}  // namespace mrbench
