#pragma once

#include <cmath>
#include <string>

#include "mrbench/core.hpp"
#include "mrbench/wavelet.hpp"

namespace mrbench {

enum class RegularizerKind { L1, WaveletL1, TV };

inline std::string to_string(RegularizerKind k) {
  switch (k) {
    case RegularizerKind::L1: return "l1";
    case RegularizerKind::WaveletL1: return "wavelet";
    case RegularizerKind::TV: return "tv";
  }
  return "tv";
}

inline RegularizerKind regularizer_from_string(const std::string& s) {
  if (s == "l1" || s == "L1") return RegularizerKind::L1;
  if (s == "wavelet" || s == "W") return RegularizerKind::WaveletL1;
  if (s == "tv" || s == "TV" || s == "T") return RegularizerKind::TV;
  throw Error(ErrorCode::InvalidArgument, "unknown regularizer '" + s + "'");
}

struct Regularizer {
  RegularizerKind kind = RegularizerKind::TV;
  int levels = kDefaultWaveletLevels;
  int tv_inner_iters = 50;
};

/// Step of the TV dual iteration: 1 / ||grad||^2 for the 2-D forward difference.
inline constexpr double kTvDualStep = 1.0 / 8.0;

namespace tv {

/// Forward differences along rows (dy) and columns (dx); zero at the last
/// row / column.
template <typename Elem>
struct Gradient {
  PlaneOf<Elem> dy, dx;
};

template <typename Derived>
auto gradient(const Eigen::ArrayBase<Derived>& m) {
  using Elem = typename Derived::Scalar;
  const Index h = m.rows(), w = m.cols();
  Gradient<Elem> g{PlaneOf<Elem>::Zero(h, w), PlaneOf<Elem>::Zero(h, w)};
  if (h > 1) g.dy.topRows(h - 1) = m.bottomRows(h - 1) - m.topRows(h - 1);
  if (w > 1) g.dx.leftCols(w - 1) = m.rightCols(w - 1) - m.leftCols(w - 1);
  return g;
}

/// Negative adjoint of `gradient`.
template <typename Elem>
PlaneOf<Elem> divergence(const Gradient<Elem>& p) {
  const Index h = p.dy.rows(), w = p.dy.cols();
  PlaneOf<Elem> d = PlaneOf<Elem>::Zero(h, w);
  if (h > 1) {
    d.topRows(h - 1) += p.dy.topRows(h - 1);
    d.bottomRows(h - 1) -= p.dy.topRows(h - 1);
  }
  if (w > 1) {
    d.leftCols(w - 1) += p.dx.leftCols(w - 1);
    d.rightCols(w - 1) -= p.dx.leftCols(w - 1);
  }
  return d;
}

template <typename Derived>
auto value(const Eigen::ArrayBase<Derived>& m) {
  const auto g = gradient(m);
  return (g.dy.abs2() + g.dx.abs2()).sqrt().sum();
}

/// argmin_z t * TV(z) + 1/2 ||z - m||^2 by fast gradient projection on the
/// dual: p lives in the unit ball pointwise and z = m + t div(p).
template <typename Derived>
auto prox(const Eigen::ArrayBase<Derived>& m, typename Eigen::NumTraits<typename Derived::Scalar>::Real t,
          int iters) {
  using Elem = typename Derived::Scalar;
  using Real = typename Eigen::NumTraits<Elem>::Real;
  PlaneOf<Elem> z = m;
  if (t <= 0 || iters <= 0) return z;
  const Index h = m.rows(), w = m.cols();
  const Real step = static_cast<Real>(kTvDualStep);
  const PlaneOf<Elem> scaled = m / t;
  // p: dual iterate, q: extrapolated point, u: div(q) + m / t
  PlaneOf<Elem> py = PlaneOf<Elem>::Zero(h, w), px = py, qy = py, qx = py, u(h, w);
  Real momentum = 1;
  for (int k = 0; k < iters; ++k) {
    for (Index i = 0; i < h; ++i) {
      for (Index j = 0; j < w; ++j) {
        Elem d = scaled(i, j);
        if (i + 1 < h) d += qy(i, j);
        if (i > 0) d -= qy(i - 1, j);
        if (j + 1 < w) d += qx(i, j);
        if (j > 0) d -= qx(i, j - 1);
        u(i, j) = d;
      }
    }
    const Real momentum_next = (1 + std::sqrt(1 + 4 * momentum * momentum)) / 2;
    const Real beta = (momentum - 1) / momentum_next;
    for (Index i = 0; i < h; ++i) {
      for (Index j = 0; j < w; ++j) {
        const Elem gy = i + 1 < h ? u(i + 1, j) - u(i, j) : Elem(0);
        const Elem gx = j + 1 < w ? u(i, j + 1) - u(i, j) : Elem(0);
        Elem ny = qy(i, j) + step * gy;
        Elem nx = qx(i, j) + step * gx;
        const Real norm = std::sqrt(std::norm(ny) + std::norm(nx));
        if (norm > 1) {
          ny /= norm;
          nx /= norm;
        }
        qy(i, j) = ny + beta * (ny - py(i, j));
        qx(i, j) = nx + beta * (nx - px(i, j));
        py(i, j) = ny;
        px(i, j) = nx;
      }
    }
    momentum = momentum_next;
  }
  z = m + t * divergence(Gradient<Elem>{std::move(py), std::move(px)});
  return z;
}

}  // namespace tv

/// R(m) for a single plane.
template <typename Derived>
auto reg_value(const Regularizer& r, const Eigen::ArrayBase<Derived>& plane) {
  using Real = typename Eigen::NumTraits<typename Derived::Scalar>::Real;
  switch (r.kind) {
    case RegularizerKind::L1: return static_cast<Real>(plane.abs().sum());
    case RegularizerKind::WaveletL1: return static_cast<Real>(detail_l1(dwt2_forward(plane, r.levels)));
    case RegularizerKind::TV: return static_cast<Real>(tv::value(plane));
  }
  return Real(0);
}

/// argmin_z t * R(z) + 1/2 ||z - plane||^2. Exact for L1 and WaveletL1,
/// `tv_inner_iters` dual iterations for TV.
template <typename Derived>
auto reg_prox(const Regularizer& r, const Eigen::ArrayBase<Derived>& plane,
              typename Eigen::NumTraits<typename Derived::Scalar>::Real t) {
  using Elem = typename Derived::Scalar;
  if (t < 0) throw Error(ErrorCode::NegativeThreshold, "prox step must be >= 0");
  if (t == 0) return PlaneOf<Elem>(plane);
  switch (r.kind) {
    case RegularizerKind::L1:
      return PlaneOf<Elem>(plane.unaryExpr([t](const Elem& c) { return soft_threshold(c, t); }));
    case RegularizerKind::WaveletL1:
      return dwt2_inverse(soft_threshold_pyramid(dwt2_forward(plane, r.levels), t));
    case RegularizerKind::TV:
      return tv::prox(plane, t, r.tv_inner_iters);
  }
  return PlaneOf<Elem>(plane);
}

template <typename T>
T reg_value(const Regularizer& r, const ImageVolume<T>& m) {
  T acc = 0;
  for (Index s = 0; s < m.slices(); ++s) {
    for (Index c = 0; c < m.coils(); ++c) acc += reg_value(r, m.plane(s, c));
  }
  return acc;
}

template <typename T>
ImageVolume<T> reg_prox(const Regularizer& r, const ImageVolume<T>& m, T t) {
  ImageVolume<T> out(m.slices(), m.coils(), m.height(), m.width(), m.acquisition());
  for (Index s = 0; s < m.slices(); ++s) {
    for (Index c = 0; c < m.coils(); ++c) out.plane(s, c) = reg_prox(r, m.plane(s, c), t);
  }
  return out;
}

}  // namespace mrbench
