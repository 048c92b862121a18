#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mrbench/core.hpp"
#include "mrbench/masking.hpp"

namespace mrbench {

enum class Track { SingleCoil, MultiCoil };

inline std::string to_string(Track t) { return t == Track::SingleCoil ? "singlecoil" : "multicoil"; }

inline Track track_from_string(const std::string& s) {
  if (s == "singlecoil" || s == "single-coil" || s == "single") return Track::SingleCoil;
  if (s == "multicoil" || s == "multi-coil" || s == "multi") return Track::MultiCoil;
  throw Error(ErrorCode::InvalidArgument, "unknown track '" + s + "'");
}

/// File-level attributes of a volume container. Names on disk match the
/// public dataset layout exactly.
struct VolumeAttributes {
  std::string acquisition = "SYNTHETIC";
  std::string patient_id;
  std::optional<double> norm;
  std::optional<double> max;
  std::optional<std::int64_t> acceleration;
  std::optional<std::int64_t> num_low_frequency;
  /// Carried verbatim, never parsed.
  std::optional<std::string> ismrmrd_header;
};

/// One volume container. Records holding a mask are test-style (no ground
/// truths, acceleration and num_low_frequency present); records without a
/// mask are train/validation-style (target ground truth with norm and max).
template <typename T>
struct VolumeRecord {
  KSpaceVolume<T> kspace;
  std::optional<RealVolume<T>> reconstruction_rss;
  std::optional<RealVolume<T>> reconstruction_esc;
  std::optional<SamplingMask> mask;
  VolumeAttributes attributes;

  Track track() const { return kspace.coils() == 1 ? Track::SingleCoil : Track::MultiCoil; }

  /// reconstruction_esc for single-coil records, reconstruction_rss otherwise.
  const std::optional<RealVolume<T>>& target() const {
    return track() == Track::SingleCoil ? reconstruction_esc : reconstruction_rss;
  }
};

/// Relative tolerance on the stored norm / max attributes.
inline constexpr double kAttributeTolerance = 1e-6;

template <typename T>
std::vector<Violation> check_record(const VolumeRecord<T>& r);

/// Fills norm and max from the record's target volume.
template <typename T>
void set_target_statistics(VolumeRecord<T>& r);

/// HDF5 container with datasets kspace / reconstruction_rss /
/// reconstruction_esc / mask. Complex samples are stored as (real, imag)
/// pairs on an extra innermost axis of extent 2, in the precision of T; the
/// encoding is declared in the kspace dataset's `complex_encoding` attribute.
/// Single-coil k-space drops the coil axis on disk.
template <typename T>
void write_volume(const VolumeRecord<T>& r, const std::filesystem::path& path);

/// Reads and validates a container. `expected` rejects files of the other
/// track with a shape-mismatch error.
template <typename T>
VolumeRecord<T> read_volume(const std::filesystem::path& path,
                            std::optional<Track> expected = std::nullopt);

/// Magnitude reconstruction file: a single `reconstruction` dataset
/// (slices, height, width).
template <typename T>
void write_reconstruction(const RealVolume<T>& v, const std::filesystem::path& path);

template <typename T>
RealVolume<T> read_reconstruction(const std::filesystem::path& path);

/// BART-compatible pair: `<base>.hdr` lists the extents in logical order on
/// one line after a `# Dimensions` comment, `<base>.cfl` holds little-endian
/// float32 (real, imag) pairs with the first axis varying fastest.
template <typename T>
void write_cfl(const ComplexTensor<T>& t, const std::filesystem::path& base);

template <typename T>
ComplexTensor<T> read_cfl(const std::filesystem::path& base);

enum class Split { Train, Validation, Test };

std::string to_string(Split s);
Split split_from_string(const std::string& s);

struct ManifestEntry {
  std::string id;
  Split split = Split::Train;
  MaskPolicy policy;
  std::uint64_t seed = 0;
};

struct SplitManifest {
  std::vector<ManifestEntry> entries;

  const ManifestEntry* find(const std::string& id) const;
};

/// Seeded shuffle, then largest-remainder rounding of the fractions into
/// train / validation / test counts. Each entry's acceleration is 4 or 8 with
/// equal probability, paired with its canonical center fraction.
SplitManifest build_split(const std::vector<std::string>& volume_ids,
                          const std::array<double, 3>& fractions, std::uint64_t seed,
                          MaskKind kind = MaskKind::Random);

/// One JSON object per line: id, split, kind, acceleration, center_fraction, seed.
void write_manifest(const SplitManifest& m, const std::filesystem::path& path);
SplitManifest read_manifest(const std::filesystem::path& path);

}  // namespace mrbench
