#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "mrbench/coils.hpp"
#include "mrbench/core.hpp"
#include "mrbench/fourier.hpp"
#include "mrbench/masking.hpp"
#include "mrbench/regularizers.hpp"

namespace mrbench {

struct SolveConfig {
  double lambda = 0.0;
  int max_iters = 200;
  Regularizer regularizer;
  double step = 1.0;
  bool backtracking = true;
  double tol = 1e-6;
  /// FISTA momentum. Not monotone; backtracking is ignored when set.
  bool accelerate = false;
  int max_backtracks = 40;

  void validate() const {
    if (!(lambda >= 0.0)) throw Error(ErrorCode::InvalidArgument, "lambda must be >= 0");
    if (max_iters < 1) throw Error(ErrorCode::InvalidArgument, "max_iters must be >= 1");
    if (!(step > 0.0)) throw Error(ErrorCode::InvalidArgument, "step must be > 0");
    if (!(tol >= 0.0)) throw Error(ErrorCode::InvalidArgument, "tol must be >= 0");
  }
};

/// Objective history of one slice solve. objective[0] is the initial point.
struct SolveTrace {
  std::vector<double> objective;
  int iterations_run = 0;
  bool converged = false;
};

template <typename T>
struct SolveResult {
  RealVolume<T> image;        ///< cropped magnitude
  ImageVolume<T> estimate;    ///< uncropped complex solution
  std::vector<SolveTrace> traces;
};

/// Data-consistency operator of one slice: x -> { P F(S_c x) }_c. With no
/// maps it is the single-coil P F.
template <typename T>
class SliceOperator {
 public:
  SliceOperator(const std::vector<bool>& keep, std::vector<Plane<T>> maps)
      : maps_(std::move(maps)) {
    mask_ = Eigen::Array<T, 1, Eigen::Dynamic>(static_cast<Index>(keep.size()));
    for (std::size_t j = 0; j < keep.size(); ++j) mask_(static_cast<Index>(j)) = keep[j] ? T(1) : T(0);
  }

  Index coils() const { return maps_.empty() ? 1 : static_cast<Index>(maps_.size()); }

  std::vector<Plane<T>> forward(const Plane<T>& x) const {
    std::vector<Plane<T>> out;
    out.reserve(static_cast<std::size_t>(coils()));
    if (maps_.empty()) {
      out.push_back(project(fft2c(x)));
    } else {
      for (const auto& s : maps_) out.push_back(project(fft2c((s * x).eval())));
    }
    return out;
  }

  Plane<T> adjoint(const std::vector<Plane<T>>& y) const {
    if (maps_.empty()) return ifft2c(project(y[0]));
    Plane<T> acc = Plane<T>::Zero(y[0].rows(), y[0].cols());
    for (std::size_t c = 0; c < maps_.size(); ++c) acc += maps_[c].conjugate() * ifft2c(project(y[c]));
    return acc;
  }

  Plane<T> project(Plane<T> k) const {
    k.rowwise() *= mask_.template cast<Complex<T>>();
    return k;
  }

 private:
  std::vector<Plane<T>> maps_;
  Eigen::Array<T, 1, Eigen::Dynamic> mask_;
};

namespace detail {

template <typename T>
double squared_norm(const Plane<T>& p) {
  return static_cast<double>(p.abs2().sum());
}

/// 1/2 sum_c || A_c x - y_c ||^2 and the residuals.
template <typename T>
std::pair<double, std::vector<Plane<T>>> data_term(const SliceOperator<T>& op, const Plane<T>& x,
                                                   const std::vector<Plane<T>>& y) {
  auto r = op.forward(x);
  double acc = 0.0;
  for (std::size_t c = 0; c < r.size(); ++c) {
    r[c] -= y[c];
    acc += squared_norm(r[c]);
  }
  return {0.5 * acc, std::move(r)};
}

template <typename T>
double objective(const SliceOperator<T>& op, const Plane<T>& x, const std::vector<Plane<T>>& y,
                 const SolveConfig& cfg) {
  double f = data_term(op, x, y).first;
  if (cfg.lambda > 0.0) f += cfg.lambda * static_cast<double>(reg_value(cfg.regularizer, x));
  return f;
}

template <typename T>
Plane<T> prox_step(const SliceOperator<T>& op, const Plane<T>& x, const std::vector<Plane<T>>& y,
                   const SolveConfig& cfg, double step) {
  const auto residual = data_term(op, x, y).second;
  const Plane<T> moved = x - static_cast<T>(step) * op.adjoint(residual);
  return reg_prox(cfg.regularizer, moved, static_cast<T>(step * cfg.lambda));
}

template <typename T>
Plane<T> solve_slice(const SliceOperator<T>& op, const Plane<T>& x0,
                     const std::vector<Plane<T>>& y, const SolveConfig& cfg, SolveTrace& trace) {
  constexpr double tiny = std::numeric_limits<double>::min();
  Plane<T> x = x0;
  double f = objective(op, x, y, cfg);
  trace.objective.push_back(f);

  if (cfg.accelerate) {
    Plane<T> z = x;
    double t = 1.0;
    for (int it = 0; it < cfg.max_iters; ++it) {
      Plane<T> next = prox_step(op, z, y, cfg, cfg.step);
      const double t_next = (1.0 + std::sqrt(1.0 + 4.0 * t * t)) / 2.0;
      z = next + static_cast<T>((t - 1.0) / t_next) * (next - x);
      const double change = std::sqrt(squared_norm<T>(next - x)) / std::max(std::sqrt(squared_norm(x)), tiny);
      const double fn = objective(op, next, y, cfg);
      const double rel = std::abs(f - fn) / std::max(std::abs(f), tiny);
      x = std::move(next);
      f = fn;
      t = t_next;
      trace.objective.push_back(f);
      trace.iterations_run = it + 1;
      if (rel <= cfg.tol && change <= 10.0 * cfg.tol) {
        trace.converged = true;
        break;
      }
    }
    return x;
  }

  for (int it = 0; it < cfg.max_iters; ++it) {
    double step = cfg.step;
    std::optional<Plane<T>> accepted;
    double fc = f;
    for (int bt = 0; bt <= cfg.max_backtracks; ++bt) {
      Plane<T> cand = prox_step(op, x, y, cfg, step);
      fc = objective(op, cand, y, cfg);
      if (!cfg.backtracking || fc <= f) {
        accepted = std::move(cand);
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // no descent at any tried step
    const double change =
        std::sqrt(squared_norm<T>(*accepted - x)) / std::max(std::sqrt(squared_norm(x)), tiny);
    const double rel = std::abs(f - fc) / std::max(std::abs(f), tiny);
    x = std::move(*accepted);
    f = fc;
    trace.objective.push_back(f);
    trace.iterations_run = it + 1;
    if (rel <= cfg.tol && change <= 10.0 * cfg.tol) {
      trace.converged = true;
      break;
    }
  }
  return x;
}

template <typename T>
std::vector<Plane<T>> slice_maps(const SensitivitySet<T>* s, Index slice) {
  std::vector<Plane<T>> maps;
  if (s == nullptr) return maps;
  for (Index c = 0; c < s->coils(); ++c) maps.emplace_back(s->map(slice, c));
  return maps;
}

template <typename T>
std::vector<Plane<T>> slice_data(const KSpaceVolume<T>& y, Index slice) {
  std::vector<Plane<T>> out;
  for (Index c = 0; c < y.coils(); ++c) out.emplace_back(y.plane(slice, c));
  return out;
}

template <typename T>
SolveResult<T> proximal_gradient(const KSpaceVolume<T>& y_masked, const SensitivitySet<T>* s,
                                 const SamplingMask& mask, const SolveConfig& cfg,
                                 const CropSpec& crop) {
  cfg.validate();
  if (mask.width() != y_masked.width()) throw Error(ErrorCode::ShapeMismatch, "mask width mismatch");
  SolveResult<T> out;
  out.estimate = ImageVolume<T>(y_masked.slices(), 1, y_masked.height(), y_masked.width(),
                                y_masked.acquisition());
  for (Index sl = 0; sl < y_masked.slices(); ++sl) {
    const SliceOperator<T> op(mask.keep, slice_maps(s, sl));
    auto y = slice_data(y_masked, sl);
    for (auto& k : y) k = op.project(std::move(k));
    const Plane<T> x0 = op.adjoint(y);
    SolveTrace trace;
    out.estimate.plane(sl, 0) = solve_slice(op, x0, y, cfg, trace);
    out.traces.push_back(std::move(trace));
  }
  out.image = center_crop(magnitude(out.estimate), crop);
  return out;
}

}  // namespace detail

/// C(|F^-1(P(y))|); multi-coil inputs are RSS-combined before cropping.
template <typename T>
RealVolume<T> zero_filled(const KSpaceVolume<T>& y_masked, const SamplingMask& mask,
                          const CropSpec& crop) {
  return rss_reconstruction(apply_mask(y_masked, mask), crop);
}

/// Proximal gradient on 1/2 ||P F m - y||^2 + lambda R(m), per slice, from
/// the zero-filled complex image.
template <typename T>
SolveResult<T> cs_reconstruct_singlecoil(const KSpaceVolume<T>& y_masked, const SamplingMask& mask,
                                         const SolveConfig& cfg, const CropSpec& crop) {
  if (y_masked.coils() != 1) {
    throw Error(ErrorCode::ShapeMismatch, "single-coil solve given " +
                                              std::to_string(y_masked.coils()) + " coils");
  }
  return detail::proximal_gradient<T>(y_masked, nullptr, mask, cfg, crop);
}

/// Proximal gradient on 1/2 sum_i ||P F(S_i m) - y_i||^2 + lambda R(m).
/// Normalized sensitivities keep the data-term Lipschitz constant at 1.
template <typename T>
SolveResult<T> cs_reconstruct_multicoil(const KSpaceVolume<T>& y_masked, const SensitivitySet<T>& s,
                                        const SamplingMask& mask, const SolveConfig& cfg,
                                        const CropSpec& crop) {
  if (!s.normalized) throw Error(ErrorCode::InvalidArgument, "sensitivities must be normalized");
  if (s.coils() != y_masked.coils()) throw Error(ErrorCode::ShapeMismatch, "coil count mismatch");
  detail::check_sensitivity_shape(y_masked, s);
  return detail::proximal_gradient<T>(y_masked, &s, mask, cfg, crop);
}

/// Conjugate gradient on the normal equations of the unregularized
/// multi-coil problem, from a zero start. Returns the uncropped complex
/// solution.
template <typename T>
ImageVolume<T> least_squares_estimate(const KSpaceVolume<T>& y_masked, const SensitivitySet<T>& s,
                                      const SamplingMask& mask, int iters) {
  if (!s.normalized) throw Error(ErrorCode::InvalidArgument, "sensitivities must be normalized");
  if (s.coils() != y_masked.coils()) throw Error(ErrorCode::ShapeMismatch, "coil count mismatch");
  detail::check_sensitivity_shape(y_masked, s);
  if (mask.width() != y_masked.width()) throw Error(ErrorCode::ShapeMismatch, "mask width mismatch");
  ImageVolume<T> out(y_masked.slices(), 1, y_masked.height(), y_masked.width(), y_masked.acquisition());
  for (Index sl = 0; sl < y_masked.slices(); ++sl) {
    const SliceOperator<T> op(mask.keep, detail::slice_maps(&s, sl));
    const auto y = detail::slice_data(y_masked, sl);
    const auto normal = [&](const Plane<T>& v) { return op.adjoint(op.forward(v)); };
    Plane<T> x = Plane<T>::Zero(y_masked.height(), y_masked.width());
    Plane<T> r = op.adjoint(y);
    Plane<T> p = r;
    double rs = detail::squared_norm(r);
    const double rs0 = rs;
    int growth = 0;
    for (int it = 0; it < iters && rs > 1e-30 * rs0 && rs > 0.0; ++it) {
      const Plane<T> ap = normal(p);
      const double curvature = static_cast<double>((p.conjugate() * ap).real().sum());
      if (!(curvature > 0.0)) break;
      const T alpha = static_cast<T>(rs / curvature);
      x += alpha * p;
      r -= alpha * ap;
      const double rs_next = detail::squared_norm(r);
      growth = rs_next > rs ? growth + 1 : 0;
      if (growth >= 10 || !std::isfinite(rs_next)) {
        throw Error(ErrorCode::Divergence, "least-squares residual grew for 10 iterations");
      }
      p = r + static_cast<T>(rs_next / rs) * p;
      rs = rs_next;
    }
    out.plane(sl, 0) = x;
  }
  return out;
}

template <typename T>
RealVolume<T> least_squares_multicoil(const KSpaceVolume<T>& y_masked, const SensitivitySet<T>& s,
                                      const SamplingMask& mask, int iters, const CropSpec& crop) {
  return center_crop(magnitude(least_squares_estimate(y_masked, s, mask, iters)), crop);
}

/// ||x - prox(x - step grad(x), step lambda)|| / ||x|| at the returned slice
/// estimate.
template <typename T>
double fixed_point_residual(const KSpaceVolume<T>& y_masked, const SensitivitySet<T>* s,
                            const SamplingMask& mask, const SolveConfig& cfg,
                            const ImageVolume<T>& estimate, Index slice) {
  const SliceOperator<T> op(mask.keep, detail::slice_maps(s, slice));
  auto y = detail::slice_data(y_masked, slice);
  for (auto& k : y) k = op.project(std::move(k));
  const Plane<T> x = estimate.plane(slice, 0);
  const Plane<T> next = detail::prox_step(op, x, y, cfg, cfg.step);
  return std::sqrt(detail::squared_norm<T>(next - x)) /
         std::max(std::sqrt(detail::squared_norm(x)), std::numeric_limits<double>::min());
}

}  // namespace mrbench
