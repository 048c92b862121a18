#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "mrbench/core.hpp"
#include "mrbench/rng.hpp"

namespace mrbench {

enum class MaskKind { Random, Equispaced };

inline std::string to_string(MaskKind k) {
  return k == MaskKind::Random ? "random" : "equispaced";
}

inline MaskKind mask_kind_from_string(const std::string& s) {
  if (s == "random") return MaskKind::Random;
  if (s == "equispaced") return MaskKind::Equispaced;
  throw Error(ErrorCode::InvalidArgument, "unknown mask kind '" + s + "'");
}

struct MaskPolicy {
  int acceleration = 4;
  double center_fraction = 0.08;
  MaskKind kind = MaskKind::Random;

  /// The two acceleration / center-fraction pairings used by the benchmark.
  static MaskPolicy canonical(int acceleration, MaskKind kind = MaskKind::Random) {
    switch (acceleration) {
      case 4: return {4, 0.08, kind};
      case 8: return {8, 0.04, kind};
      default:
        throw Error(ErrorCode::InvalidArgument,
                    "no canonical center fraction for acceleration " + std::to_string(acceleration));
    }
  }
};

/// Column mask over the k-space width (phase-encode axis), plus how it was made.
struct SamplingMask {
  std::vector<bool> keep;
  int acceleration_nominal = 1;
  double center_fraction = 0.0;
  MaskKind kind = MaskKind::Random;
  std::uint64_t seed = 0;
  Index num_low_frequency = 0;

  Index width() const { return static_cast<Index>(keep.size()); }
  Index kept_count() const { return std::count(keep.begin(), keep.end(), true); }
};

/// round-half-up(fraction * width)
inline Index num_low_frequency(Index width, double center_fraction) {
  return static_cast<Index>(std::floor(center_fraction * static_cast<double>(width) + 0.5));
}

/// First column of the fully sampled center block. The block of `num_low`
/// columns always contains the zero-frequency column width / 2.
inline Index center_block_start(Index width, Index num_low) { return (width - num_low + 1) / 2; }

namespace detail {

inline void check_policy(Index width, const MaskPolicy& policy, Index num_low) {
  if (policy.acceleration < 1) {
    throw Error(ErrorCode::InfeasiblePolicy, "acceleration must be >= 1");
  }
  if (!(policy.center_fraction >= 0.0 && policy.center_fraction <= 1.0)) {
    throw Error(ErrorCode::InfeasiblePolicy, "center fraction must lie in [0, 1]");
  }
  if (width < policy.acceleration) {
    throw Error(ErrorCode::InfeasiblePolicy,
                "width " + std::to_string(width) + " is smaller than acceleration " +
                    std::to_string(policy.acceleration));
  }
  const double target = static_cast<double>(width) / policy.acceleration;
  if (target < static_cast<double>(num_low)) {
    throw Error(ErrorCode::InfeasiblePolicy,
                "W/R = " + std::to_string(target) + " is below the " + std::to_string(num_low) +
                    " center lines");
  }
}

inline void keep_center(std::vector<bool>& keep, Index num_low) {
  const Index start = center_block_start(static_cast<Index>(keep.size()), num_low);
  for (Index j = start; j < start + num_low; ++j) keep[j] = true;
}

}  // namespace detail

/// Inclusion probability for each non-center column so that the expected
/// number of kept columns is exactly W / R.
inline double random_mask_probability(Index width, int acceleration, Index num_low) {
  if (width == num_low) return 1.0;
  const double p = (static_cast<double>(width) / acceleration - static_cast<double>(num_low)) /
                   static_cast<double>(width - num_low);
  return std::clamp(p, 0.0, 1.0);
}

/// Center block plus independent Bernoulli columns. One uniform is drawn per
/// column in ascending column order, center columns included, so column j
/// always consumes draw j.
inline SamplingMask make_random_mask(Index width, const MaskPolicy& policy, std::uint64_t seed) {
  const Index num_low = num_low_frequency(width, policy.center_fraction);
  detail::check_policy(width, policy, num_low);
  SamplingMask m{std::vector<bool>(static_cast<std::size_t>(width), false), policy.acceleration,
                 policy.center_fraction, MaskKind::Random, seed, num_low};
  const double p = random_mask_probability(width, policy.acceleration, num_low);
  Rng rng(seed);
  for (Index j = 0; j < width; ++j) m.keep[j] = rng.uniform() < p;
  detail::keep_center(m.keep, num_low);
  return m;
}

/// Columns offset, offset + R, offset + 2R, ... unioned with the center block.
inline std::vector<bool> equispaced_keep(Index width, int acceleration, Index num_low,
                                         Index offset) {
  std::vector<bool> keep(static_cast<std::size_t>(width), false);
  for (Index j = offset; j < width; j += acceleration) keep[j] = true;
  detail::keep_center(keep, num_low);
  return keep;
}

/// The offset is the first draw of the seeded generator, uniform in [0, R).
inline SamplingMask make_equispaced_mask(Index width, const MaskPolicy& policy,
                                         std::uint64_t seed) {
  const Index num_low = num_low_frequency(width, policy.center_fraction);
  detail::check_policy(width, policy, num_low);
  Rng rng(seed);
  const auto offset = static_cast<Index>(rng.below(static_cast<std::uint64_t>(policy.acceleration)));
  return SamplingMask{equispaced_keep(width, policy.acceleration, num_low, offset),
                      policy.acceleration,
                      policy.center_fraction,
                      MaskKind::Equispaced,
                      seed,
                      num_low};
}

inline SamplingMask make_mask(Index width, const MaskPolicy& policy, std::uint64_t seed) {
  return policy.kind == MaskKind::Random ? make_random_mask(width, policy, seed)
                                         : make_equispaced_mask(width, policy, seed);
}

/// Mask with only the center block kept; used for coil calibration.
inline SamplingMask center_only(const SamplingMask& m) {
  SamplingMask out = m;
  std::fill(out.keep.begin(), out.keep.end(), false);
  detail::keep_center(out.keep, m.num_low_frequency);
  return out;
}

inline double achieved_acceleration(const SamplingMask& m) {
  const Index kept = m.kept_count();
  if (kept == 0) throw Error(ErrorCode::InvalidArgument, "mask keeps no columns");
  return static_cast<double>(m.width()) / static_cast<double>(kept);
}

/// Zeroes every column the mask drops, in every slice and coil.
template <typename T>
KSpaceVolume<T> apply_mask(const KSpaceVolume<T>& k, const SamplingMask& m) {
  if (m.width() != k.width()) {
    throw Error(ErrorCode::ShapeMismatch,
                "mask length " + std::to_string(m.width()) + " != k-space width " +
                    std::to_string(k.width()));
  }
  KSpaceVolume<T> out = k;
  auto& t = out.tensor();
  for (Index p = 0; p < t.plane_count(); ++p) {
    auto plane = t.plane(p);
    for (Index j = 0; j < k.width(); ++j) {
      if (!m.keep[j]) plane.col(j).setZero();
    }
  }
  return out;
}

}  // namespace mrbench
