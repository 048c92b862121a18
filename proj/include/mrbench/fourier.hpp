#pragma once

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <vector>

#include "mrbench/core.hpp"

namespace mrbench {

namespace detail {

template <typename T>
Eigen::FFT<T>& fft_engine() {
  thread_local Eigen::FFT<T> engine = [] {
    Eigen::FFT<T> e;
    e.SetFlag(Eigen::FFT<T>::Unscaled);
    return e;
  }();
  return engine;
}

/// out((i + dr) mod H, (j + dc) mod W) = in(i, j)
template <typename Derived>
auto rotate_plane(const Eigen::ArrayBase<Derived>& in, Index dr, Index dc) {
  using Elem = typename Derived::Scalar;
  const Index h = in.rows(), w = in.cols();
  PlaneOf<Elem> out(h, w);
  dr %= h;
  dc %= w;
  // four quadrant copies
  out.block(dr, dc, h - dr, w - dc) = in.block(0, 0, h - dr, w - dc);
  out.block(0, dc, dr, w - dc) = in.block(h - dr, 0, dr, w - dc);
  out.block(dr, 0, h - dr, dc) = in.block(0, w - dc, h - dr, dc);
  out.block(0, 0, dr, dc) = in.block(h - dr, w - dc, dr, dc);
  return out;
}

template <typename T>
void fft_rows_cols(Plane<T>& p, bool inverse) {
  auto& fft = fft_engine<T>();
  const Index h = p.rows(), w = p.cols();
  std::vector<Complex<T>> in(static_cast<std::size_t>(std::max(h, w)));
  std::vector<Complex<T>> out(in.size());
  for (Index i = 0; i < h; ++i) {
    for (Index j = 0; j < w; ++j) in[j] = p(i, j);
    if (inverse) fft.inv(out.data(), in.data(), w); else fft.fwd(out.data(), in.data(), w);
    for (Index j = 0; j < w; ++j) p(i, j) = out[j];
  }
  for (Index j = 0; j < w; ++j) {
    for (Index i = 0; i < h; ++i) in[i] = p(i, j);
    if (inverse) fft.inv(out.data(), in.data(), h); else fft.fwd(out.data(), in.data(), h);
    for (Index i = 0; i < h; ++i) p(i, j) = out[i];
  }
}

template <typename T, typename Derived>
Plane<T> centered_transform(const Eigen::ArrayBase<Derived>& in, bool inverse) {
  const Index h = in.rows(), w = in.cols();
  // ifftshift: bring the center sample (h/2, w/2) to the origin
  Plane<T> p = rotate_plane(in, h - h / 2, w - w / 2);
  fft_rows_cols<T>(p, inverse);
  p = rotate_plane(p, h / 2, w / 2);
  p *= T(1) / std::sqrt(static_cast<T>(h * w));
  return p;
}

}  // namespace detail

/// Centered, unitary 2-D DFT of a single plane. The zero-frequency sample
/// lands at (H/2, W/2) with integer division.
template <typename Derived>
auto fft2c(const Eigen::ArrayBase<Derived>& plane) {
  using T = typename Derived::Scalar::value_type;
  return detail::centered_transform<T>(plane, false);
}

template <typename Derived>
auto ifft2c(const Eigen::ArrayBase<Derived>& plane) {
  using T = typename Derived::Scalar::value_type;
  return detail::centered_transform<T>(plane, true);
}

template <typename T>
KSpaceVolume<T> fft2c(const ImageVolume<T>& img) {
  KSpaceVolume<T> out(img.slices(), img.coils(), img.height(), img.width(), img.acquisition());
  for (Index s = 0; s < img.slices(); ++s) {
    for (Index c = 0; c < img.coils(); ++c) out.plane(s, c) = fft2c(img.plane(s, c));
  }
  return out;
}

template <typename T>
ImageVolume<T> ifft2c(const KSpaceVolume<T>& k) {
  ImageVolume<T> out(k.slices(), k.coils(), k.height(), k.width(), k.acquisition());
  for (Index s = 0; s < k.slices(); ++s) {
    for (Index c = 0; c < k.coils(); ++c) out.plane(s, c) = ifft2c(k.plane(s, c));
  }
  return out;
}

/// Rotates every axis whose bit is set in `axis_bitmask` (bit k = axis k) by
/// floor(extent / 2), matching the BART `fftshift` bitmask convention.
template <typename Elem>
Tensor<Elem> fftshift_axes(const Tensor<Elem>& t, unsigned axis_bitmask) {
  const Index rank = t.rank();
  if (rank < 32 && (axis_bitmask >> rank) != 0) {
    throw Error(ErrorCode::InvalidBitmask,
                "bitmask " + std::to_string(axis_bitmask) + " selects axes beyond rank " +
                    std::to_string(rank));
  }
  if (axis_bitmask == 0) return t;
  Tensor<Elem> out(t.shape());
  std::vector<Index> idx(static_cast<std::size_t>(rank), 0);
  for (Index flat = 0; flat < t.size(); ++flat) {
    Index dst = 0;
    for (Index a = 0; a < rank; ++a) {
      const Index n = t.extent(a);
      Index i = idx[a];
      if (axis_bitmask & (1u << a)) i = (i + n / 2) % n;
      dst = dst * n + i;
    }
    out.data()[dst] = t.data()[flat];
    for (Index a = rank - 1; a >= 0; --a) {
      if (++idx[a] < t.extent(a)) break;
      idx[a] = 0;
    }
  }
  return out;
}

}  // namespace mrbench
