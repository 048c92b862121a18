#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mrbench/dataio.hpp"
#include "mrbench/masking.hpp"
#include "mrbench/regularizers.hpp"
#include "mrbench/solver.hpp"

namespace mrbench {

/// Phantom corpus recipe for `simulate`.
struct CorpusConfig {
  Index volumes = 16;
  Index slices = 1;
  Index height = 128;
  Index width = 128;
  Index coils = 8;
  /// Ground truths are center-cropped to this size.
  CropSpec crop{96, 96};
  /// Per-component k-space noise, relative to the largest phantom intensity.
  double noise_sigma = 0.002;
  double jitter = 0.05;
  /// Labels are assigned round-robin so tables get per-contrast rows.
  std::vector<std::string> acquisitions{"PD", "PDFS"};
  std::array<double, 3> split_fractions{0.0, 1.0, 0.0};
  std::uint64_t seed = 0;
  std::string id_prefix = "phantom";
};

struct CorpusVolume {
  std::string id;
  std::string acquisition;
};

/// `corpus.json` beside the track directories.
struct CorpusIndex {
  CorpusConfig config;
  std::vector<CorpusVolume> volumes;
};

/// Writes `dir/multicoil/<id>.h5` (RSS ground truth), `dir/singlecoil/<id>.h5`
/// (ESC-combined k-space and ground truth), `dir/corpus.json` and
/// `dir/manifest.jsonl`. Files are float32.
CorpusIndex simulate_corpus(const CorpusConfig& cfg, const std::filesystem::path& dir);

CorpusIndex read_corpus_index(const std::filesystem::path& dir);

/// Corpus recipe file; keys mirror CorpusConfig fields, crop is [h, w].
CorpusConfig read_corpus_config(const std::filesystem::path& path);

std::filesystem::path volume_path(const std::filesystem::path& corpus, Track track, const std::string& id);

/// Per-volume mask seed; adding volumes never changes existing seeds.
inline std::uint64_t mask_seed(std::uint64_t plan_seed, const std::string& volume_id) {
  return stable_hash(plan_seed, volume_id);
}

/// Writes test-style copies (masked k-space, mask, acceleration,
/// num_low_frequency, no ground truth) of every manifest entry in `split`,
/// using each entry's policy and seed. Returns the number of files written.
Index write_masked_corpus(const std::filesystem::path& corpus, const std::filesystem::path& out,
                          Split split);

struct ExperimentPlan {
  std::filesystem::path corpus;
  std::vector<Track> tracks{Track::SingleCoil, Track::MultiCoil};
  std::vector<int> accelerations{4, 8};
  std::vector<MaskKind> mask_kinds{MaskKind::Random};
  std::vector<double> lambdas{1e-4, 1e-3, 1e-2, 1e-1, 1.0};
  Regularizer regularizer;
  int max_iters = 200;
  double tol = 1e-6;
  bool accelerate = false;
  /// Adds one zero-filled baseline row per (track, acceleration, kind).
  bool zero_filled_baseline = true;
  /// Corpus split to evaluate; nullopt evaluates every volume.
  std::optional<Split> split = Split::Validation;
  /// Subset of {"nmse", "psnr", "ssim"} shown in reports.
  std::vector<std::string> metrics{"nmse", "psnr", "ssim"};
  std::filesystem::path output;
  std::uint64_t seed = 0;
  int jobs = 1;

  void validate() const;
};

std::string plan_to_json(const ExperimentPlan& p);
ExperimentPlan plan_from_json(const std::string& text);
ExperimentPlan read_plan(const std::filesystem::path& path);

/// One solver cell of a plan.
struct PlanCell {
  Track track;
  int acceleration;
  MaskKind kind;
  double lambda;
};

/// tracks x accelerations x mask kinds x lambdas, in execution order.
std::vector<PlanCell> enumerate_cells(const ExperimentPlan& p);

/// Identifies a table row, minus the acquisition label.
struct RowKey {
  Track track = Track::SingleCoil;
  int acceleration = 0;  ///< 0 when unknown (external reconstructions)
  std::string mask_kind;
  std::string model;  ///< "zero-filled", a regularizer name, or an external label
  std::optional<double> lambda;

  friend auto operator<=>(const RowKey&, const RowKey&) = default;
};

struct VolumeScore {
  RowKey key;
  std::string volume_id;
  std::string acquisition;
  double nmse = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
  int iterations = 0;
  bool converged = true;
};

struct Failure {
  RowKey key;
  std::string volume_id;
  std::string message;
};

/// Label of the row aggregating every acquisition in a group.
inline const std::string kAggregateLabel = "Aggregate";

struct ResultRow {
  RowKey key;
  std::string acquisition;
  Index volumes = 0;
  double nmse = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
  /// Volumes with infinite PSNR, left out of the PSNR mean.
  Index psnr_excluded = 0;
  bool best_nmse = false;
  bool best_psnr = false;
  bool best_ssim = false;
};

struct ResultTable {
  std::string title;
  std::vector<std::string> metrics{"nmse", "psnr", "ssim"};
  std::vector<ResultRow> rows;
  std::vector<VolumeScore> scores;
  std::vector<Failure> failures;
  std::vector<std::string> warnings;
};

/// Groups scores by (key, acquisition), adds per-group "Aggregate" rows over
/// all acquisitions, averages with equal weight per volume and sets best
/// flags. Rows come out sorted.
std::vector<ResultRow> aggregate(const std::vector<VolumeScore>& scores);

/// Best flags: min NMSE, max PSNR and SSIM within each (track, acceleration,
/// mask kind, acquisition) group.
void mark_best(std::vector<ResultRow>& rows);

/// Runs every cell over every selected volume. Per-volume failures land in
/// the failure section. When plan.output is set, writes records.jsonl,
/// failures.jsonl and the three report formats there.
ResultTable run_plan(const ExperimentPlan& plan);

struct ExternalScoring {
  std::filesystem::path recon_dir;
  std::filesystem::path corpus;
  Track track = Track::SingleCoil;
  std::string model = "external";
  int acceleration = 0;
  /// Crop applied to both sides; defaults to the ground-truth extent.
  std::optional<CropSpec> crop;
  std::optional<Split> split;
};

/// Scores `<recon_dir>/<id>.h5` reconstruction files against the corpus
/// ground truths. Missing files and shape mismatches are failures.
ResultTable score_external(const ExternalScoring& e);

enum class ReportFormat { Text, Delimited, Structured };

ReportFormat report_format_from_string(const std::string& s);
std::string extension(ReportFormat f);

std::string render_report(const ResultTable& t, ReportFormat f);
void emit_report(const ResultTable& t, ReportFormat f, const std::filesystem::path& path);
/// Writes table.txt, table.csv and table.json into `dir`.
void emit_all_reports(const ResultTable& t, const std::filesystem::path& dir);

/// Inverse of the structured format.
ResultTable parse_structured_report(const std::string& text);

std::string score_to_jsonl(const VolumeScore& s);
VolumeScore score_from_jsonl(const std::string& line);

}  // namespace mrbench
