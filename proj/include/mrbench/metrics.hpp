#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "mrbench/core.hpp"

namespace mrbench {

namespace detail {

template <typename T>
void check_same_shape(const RealVolume<T>& a, const RealVolume<T>& b) {
  if (a.tensor().shape() != b.tensor().shape()) {
    throw Error(ErrorCode::ShapeMismatch, "metric inputs differ in shape: " +
                                              shape_string(a.tensor().shape()) + " vs " +
                                              shape_string(b.tensor().shape()));
  }
}

template <typename T>
double squared_error(const RealVolume<T>& vhat, const RealVolume<T>& v) {
  return ((vhat.values().template cast<double>() - v.values().template cast<double>()).square()).sum();
}

}  // namespace detail

/// ||vhat - v||^2 / ||v||^2 over the whole volume.
template <typename T>
double nmse(const RealVolume<T>& vhat, const RealVolume<T>& v) {
  detail::check_same_shape(vhat, v);
  const double ref = v.values().template cast<double>().square().sum();
  if (ref == 0.0) throw Error(ErrorCode::ZeroReference, "NMSE reference volume is all zero");
  return detail::squared_error(vhat, v) / ref;
}

/// 10 log10(max(v)^2 / MSE). Identical volumes give +infinity.
template <typename T>
double psnr(const RealVolume<T>& vhat, const RealVolume<T>& v) {
  detail::check_same_shape(vhat, v);
  const double mse = detail::squared_error(vhat, v) / static_cast<double>(v.values().size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  const double peak = static_cast<double>(v.values().maxCoeff());
  return 10.0 * std::log10(peak * peak / mse);
}

template <typename T>
double l1_error(const RealVolume<T>& vhat, const RealVolume<T>& v) {
  detail::check_same_shape(vhat, v);
  return (vhat.values().template cast<double>() - v.values().template cast<double>()).abs().sum();
}

struct SsimOptions {
  int window = 7;
  double k1 = 0.01;
  double k2 = 0.03;
  /// Gaussian (sigma 1.5) window weights instead of a uniform box.
  bool gaussian = false;
  /// Dynamic range L; defaults to max(v) of the target volume.
  std::optional<double> data_range;
};

/// Window weights summing to 1, row-major window x window.
inline std::vector<double> ssim_weights(const SsimOptions& o) {
  const int n = o.window;
  std::vector<double> w(static_cast<std::size_t>(n * n), 1.0 / (n * n));
  if (o.gaussian) {
    const double sigma = 1.5, c = (n - 1) / 2.0;
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const double r2 = (i - c) * (i - c) + (j - c) * (j - c);
        total += w[i * n + j] = std::exp(-r2 / (2 * sigma * sigma));
      }
    }
    for (auto& x : w) x /= total;
  }
  return w;
}

/// Mean SSIM over every fully interior window (stride 1) of every slice.
/// Moments use population normalization.
template <typename T>
double ssim(const RealVolume<T>& vhat, const RealVolume<T>& v, const SsimOptions& o = {}) {
  detail::check_same_shape(vhat, v);
  const Index n = o.window;
  if (v.height() < n || v.width() < n) {
    throw Error(ErrorCode::TooSmallImage, "SSIM needs spatial extents >= " + std::to_string(n));
  }
  const double range = o.data_range ? *o.data_range : static_cast<double>(v.values().maxCoeff());
  const double c1 = (o.k1 * range) * (o.k1 * range);
  const double c2 = (o.k2 * range) * (o.k2 * range);
  const auto weights = ssim_weights(o);

  double total = 0.0;
  Index count = 0;
  for (Index s = 0; s < v.slices(); ++s) {
    const auto x = vhat.slice(s);
    const auto y = v.slice(s);
    for (Index i = 0; i + n <= v.height(); ++i) {
      for (Index j = 0; j + n <= v.width(); ++j) {
        double mx = 0.0, my = 0.0;
        for (Index a = 0; a < n; ++a) {
          for (Index b = 0; b < n; ++b) {
            const double w = weights[a * n + b];
            mx += w * x(i + a, j + b);
            my += w * y(i + a, j + b);
          }
        }
        double vx = 0.0, vy = 0.0, cxy = 0.0;
        for (Index a = 0; a < n; ++a) {
          for (Index b = 0; b < n; ++b) {
            const double w = weights[a * n + b];
            const double dx = x(i + a, j + b) - mx;
            const double dy = y(i + a, j + b) - my;
            vx += w * dx * dx;
            vy += w * dy * dy;
            cxy += w * dx * dy;
          }
        }
        total += ((2 * mx * my + c1) * (2 * cxy + c2)) /
                 ((mx * mx + my * my + c1) * (vx + vy + c2));
        ++count;
      }
    }
  }
  return total / static_cast<double>(count);
}

}  // namespace mrbench
