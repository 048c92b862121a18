#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "mrbench/coils.hpp"
#include "mrbench/core.hpp"
#include "mrbench/rng.hpp"

namespace mrbench {

/// Ellipse in normalized coordinates: x spans the width and y the height,
/// both in [-1, 1] at the pixel-center grid.
struct Ellipse {
  double center_x = 0.0;
  double center_y = 0.0;
  double semi_x = 1.0;
  double semi_y = 1.0;
  double rotation = 0.0;  // radians
  double intensity = 1.0;

  /// Quadratic form value; <= 1 inside.
  double quadratic(double x, double y) const {
    const double dx = x - center_x, dy = y - center_y;
    const double c = std::cos(rotation), s = std::sin(rotation);
    const double u = c * dx + s * dy;
    const double v = -s * dx + c * dy;
    return (u * u) / (semi_x * semi_x) + (v * v) / (semi_y * semi_y);
  }
};

struct PhantomSpec {
  Index height = 64;
  Index width = 64;
  std::vector<Ellipse> ellipses;
  std::uint64_t seed = 0;
};

struct AcquisitionSpec {
  Index coils = 4;
  double noise_sigma = 0.0;
  std::uint64_t sensitivity_seed = 0;
};

inline double grid_coordinate(Index i, Index n) {
  return (2.0 * (static_cast<double>(i) + 0.5)) / static_cast<double>(n) - 1.0;
}

/// Modified Shepp-Logan ellipse set (non-negative after summation).
inline std::vector<Ellipse> shepp_logan_ellipses() {
  const double pi = std::numbers::pi;
  return {
      {0.0, 0.0, 0.69, 0.92, 0.0, 1.0},
      {0.0, -0.0184, 0.6624, 0.874, 0.0, -0.8},
      {0.22, 0.0, 0.11, 0.31, -pi / 10, -0.2},
      {-0.22, 0.0, 0.16, 0.41, pi / 10, -0.2},
      {0.0, 0.35, 0.21, 0.25, 0.0, 0.1},
      {0.0, 0.1, 0.046, 0.046, 0.0, 0.1},
      {0.0, -0.1, 0.046, 0.046, 0.0, 0.1},
      {-0.08, -0.605, 0.046, 0.023, 0.0, 0.1},
      {0.0, -0.605, 0.023, 0.023, 0.0, 0.1},
      {0.06, -0.605, 0.023, 0.046, 0.0, 0.1},
  };
}

/// Shepp-Logan geometry with seeded jitter of centers, axes, angles and
/// intensities, so corpus volumes differ but stay anatomically plausible.
inline PhantomSpec jittered_shepp_logan(Index height, Index width, std::uint64_t seed,
                                        double jitter = 0.05) {
  PhantomSpec spec{height, width, shepp_logan_ellipses(), seed};
  if (jitter <= 0.0) return spec;
  Rng rng(seed);
  auto perturb = [&](double scale) { return scale * (2.0 * rng.uniform() - 1.0); };
  for (std::size_t k = 0; k < spec.ellipses.size(); ++k) {
    auto& e = spec.ellipses[k];
    const double dc = perturb(jitter), dcy = perturb(jitter);
    const double ax = 1.0 + perturb(jitter), ay = 1.0 + perturb(jitter);
    const double rot = perturb(jitter * std::numbers::pi);
    const double gain = 1.0 + perturb(2.0 * jitter);
    if (k < 2) continue;  // the skull ellipses stay fixed
    e.center_x += dc;
    e.center_y += dcy;
    e.semi_x *= ax;
    e.semi_y *= ay;
    e.rotation += rot;
    e.intensity *= gain;
  }
  return spec;
}

/// Sum of ellipse intensities over every pixel center, clamped at zero.
template <typename T = double>
RealVolume<T> make_phantom(const PhantomSpec& spec, Index slices = 1) {
  RealVolume<T> out(slices, spec.height, spec.width);
  RealPlane<T> plane = RealPlane<T>::Zero(spec.height, spec.width);
  for (Index i = 0; i < spec.height; ++i) {
    const double y = grid_coordinate(i, spec.height);
    for (Index j = 0; j < spec.width; ++j) {
      const double x = grid_coordinate(j, spec.width);
      double acc = 0.0;
      for (const auto& e : spec.ellipses) {
        if (e.quadratic(x, y) <= 1.0) acc += e.intensity;
      }
      plane(i, j) = static_cast<T>(std::max(acc, 0.0));
    }
  }
  for (Index s = 0; s < slices; ++s) out.slice(s) = plane;
  return out;
}

/// Complex image with a zero imaginary part and a coil axis of extent 1.
template <typename T>
ImageVolume<T> as_image(const RealVolume<T>& m) {
  ImageVolume<T> out(m.slices(), 1, m.height(), m.width());
  for (Index s = 0; s < m.slices(); ++s) out.plane(s, 0) = m.slice(s).template cast<Complex<T>>();
  return out;
}

struct SensitivityShape {
  double ring_radius = 0.9;  ///< distance of each bump center from the FOV center
  double width = 0.8;        ///< Gaussian standard deviation (normalized units)
  double phase_slope = 0.5;  ///< radians per normalized unit
};

/// Gaussian-bump coil profiles at equally spaced angles around the field of
/// view with linear phase ramps, normalized so sum_i |S_i|^2 == 1 everywhere.
template <typename T = double>
SensitivitySet<T> make_sensitivities(Index height, Index width, Index coils, std::uint64_t seed,
                                     const SensitivityShape& shape = {}) {
  if (coils < 1) throw Error(ErrorCode::InvalidArgument, "coil count must be >= 1");
  Rng rng(seed);
  const double rotation = 2.0 * std::numbers::pi * rng.uniform();
  ComplexTensor<T> maps(Shape{1, coils, height, width});
  for (Index c = 0; c < coils; ++c) {
    const double angle = rotation + 2.0 * std::numbers::pi * static_cast<double>(c) / coils;
    const double cx = coils == 1 ? 0.0 : shape.ring_radius * std::cos(angle);
    const double cy = coils == 1 ? 0.0 : shape.ring_radius * std::sin(angle);
    const double phase0 = 2.0 * std::numbers::pi * rng.uniform();
    const double kx = shape.phase_slope * std::cos(angle + 1.0);
    const double ky = shape.phase_slope * std::sin(angle + 1.0);
    auto plane = maps.plane(c);
    for (Index i = 0; i < height; ++i) {
      const double y = grid_coordinate(i, height);
      for (Index j = 0; j < width; ++j) {
        const double x = grid_coordinate(j, width);
        const double r2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
        const double mag = std::exp(-r2 / (2.0 * shape.width * shape.width));
        plane(i, j) = static_cast<Complex<T>>(std::polar(mag, phase0 + kx * x + ky * y));
      }
    }
  }
  return normalize_sensitivities(std::move(maps));
}

/// forward_multicoil plus i.i.d. circular complex Gaussian noise with
/// standard deviation sigma per real and imaginary component.
template <typename T>
KSpaceVolume<T> acquire(const RealVolume<T>& m, const SensitivitySet<T>& s,
                        const AcquisitionSpec& a, std::uint64_t seed) {
  if (a.noise_sigma < 0.0) throw Error(ErrorCode::InvalidArgument, "noise sigma must be >= 0");
  KSpaceVolume<T> y = forward_multicoil(as_image(m), s);
  if (a.noise_sigma > 0.0) {
    Rng rng(seed);
    auto& d = y.tensor().data();
    for (Index i = 0; i < d.size(); ++i) {
      const double re = rng.normal() * a.noise_sigma;
      const double im = rng.normal() * a.noise_sigma;
      d[i] += Complex<T>(static_cast<T>(re), static_cast<T>(im));
    }
  }
  return y;
}

}  // namespace mrbench
