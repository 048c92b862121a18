#include "mrbench/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "mrbench/coils.hpp"
#include "mrbench/fourier.hpp"
#include "mrbench/metrics.hpp"
#include "mrbench/phantom.hpp"

namespace mrbench {

using json = nlohmann::ordered_json;

namespace {

template <typename To, typename From, typename D>
CoilStack<To, D> cast_stack(const CoilStack<From, D>& v) {
  ComplexTensor<To> t(v.tensor().shape(), v.tensor().data().template cast<Complex<To>>());
  return CoilStack<To, D>(std::move(t), v.acquisition());
}

template <typename To, typename From>
RealVolume<To> cast_volume(const RealVolume<From>& v) {
  return RealVolume<To>(RealTensor<To>(v.tensor().shape(), v.values().template cast<To>()));
}

std::string volume_id(const CorpusConfig& cfg, Index v) {
  std::ostringstream os;
  os << cfg.id_prefix << "_" << std::setw(3) << std::setfill('0') << v;
  return os.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, path.string() + ": cannot open for writing");
  out << text;
  if (!out) throw Error(ErrorCode::Io, path.string() + ": write failed");
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, path.string() + ": cannot open");
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

json corpus_config_json(const CorpusConfig& c) {
  json j;
  j["volumes"] = c.volumes;
  j["slices"] = c.slices;
  j["height"] = c.height;
  j["width"] = c.width;
  j["coils"] = c.coils;
  j["crop"] = {c.crop.out_height, c.crop.out_width};
  j["noise_sigma"] = c.noise_sigma;
  j["jitter"] = c.jitter;
  j["acquisitions"] = c.acquisitions;
  j["split_fractions"] = c.split_fractions;
  j["seed"] = c.seed;
  j["id_prefix"] = c.id_prefix;
  return j;
}

CorpusConfig corpus_config_from_json(const json& j) {
  CorpusConfig c;
  c.volumes = j.value("volumes", c.volumes);
  c.slices = j.value("slices", c.slices);
  c.height = j.value("height", c.height);
  c.width = j.value("width", c.width);
  c.coils = j.value("coils", c.coils);
  if (j.contains("crop")) {
    const auto crop = j.at("crop").get<std::vector<Index>>();
    if (crop.size() != 2) throw Error(ErrorCode::InvalidArgument, "crop must be [height, width]");
    c.crop = {crop[0], crop[1]};
  }
  c.noise_sigma = j.value("noise_sigma", c.noise_sigma);
  c.jitter = j.value("jitter", c.jitter);
  c.acquisitions = j.value("acquisitions", c.acquisitions);
  c.split_fractions = j.value("split_fractions", c.split_fractions);
  c.seed = j.value("seed", c.seed);
  c.id_prefix = j.value("id_prefix", c.id_prefix);
  return c;
}

/// Volume ids selected by a split filter, in corpus order.
std::vector<CorpusVolume> select_volumes(const std::filesystem::path& corpus, const CorpusIndex& index,
                                         const std::optional<Split>& split, std::vector<std::string>& warnings) {
  if (!split) return index.volumes;
  const auto manifest_path = corpus / "manifest.jsonl";
  if (!std::filesystem::exists(manifest_path)) {
    warnings.push_back("no manifest.jsonl in corpus; evaluating every volume");
    return index.volumes;
  }
  const auto manifest = read_manifest(manifest_path);
  std::vector<CorpusVolume> out;
  for (const auto& v : index.volumes) {
    const auto* e = manifest.find(v.id);
    if (e && e->split == *split) out.push_back(v);
  }
  return out;
}

VolumeScore score(const RowKey& key, const std::string& id, const std::string& acquisition,
                  const RealVolume<double>& recon, const RealVolume<double>& target) {
  VolumeScore s;
  s.key = key;
  s.volume_id = id;
  s.acquisition = acquisition;
  s.nmse = nmse(recon, target);
  s.psnr = psnr(recon, target);
  s.ssim = ssim(recon, target);
  return s;
}

struct UnitResult {
  std::vector<VolumeScore> scores;
  std::vector<Failure> failures;
};

/// Runs `count` independent units on `jobs` threads; results keep unit order.
template <typename Fn>
std::vector<UnitResult> run_pool(std::size_t count, int jobs, Fn&& fn) {
  std::vector<UnitResult> results(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) results[i] = fn(i);
  };
  const auto n = static_cast<std::size_t>(std::max(1, jobs));
  if (n == 1 || count <= 1) {
    worker();
    return results;
  }
  std::vector<std::thread> threads;
  for (std::size_t t = 0; t < std::min(n, count); ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  return results;
}

bool score_less(const VolumeScore& a, const VolumeScore& b) {
  return std::tie(a.key, a.volume_id) < std::tie(b.key, b.volume_id);
}

void finish(ResultTable& t, std::vector<UnitResult>&& units) {
  for (auto& u : units) {
    for (auto& s : u.scores) t.scores.push_back(std::move(s));
    for (auto& f : u.failures) t.failures.push_back(std::move(f));
  }
  std::stable_sort(t.scores.begin(), t.scores.end(), score_less);
  std::stable_sort(t.failures.begin(), t.failures.end(), [](const Failure& a, const Failure& b) {
    return std::tie(a.key, a.volume_id) < std::tie(b.key, b.volume_id);
  });
  t.rows = aggregate(t.scores);
}

std::string failure_to_jsonl(const Failure& f) {
  json j;
  j["track"] = to_string(f.key.track);
  j["acceleration"] = f.key.acceleration;
  j["mask_kind"] = f.key.mask_kind;
  j["model"] = f.key.model;
  j["lambda"] = f.key.lambda ? json(*f.key.lambda) : json(nullptr);
  j["volume_id"] = f.volume_id;
  j["message"] = f.message;
  return j.dump();
}

void persist(const ResultTable& t, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::string records;
  for (const auto& s : t.scores) records += score_to_jsonl(s) + "\n";
  write_text(dir / "records.jsonl", records);
  std::string failures;
  for (const auto& f : t.failures) failures += failure_to_jsonl(f) + "\n";
  write_text(dir / "failures.jsonl", failures);
  emit_all_reports(t, dir);
}

void write_corpus_index(const CorpusIndex& index, const std::filesystem::path& dir) {
  json j;
  j["config"] = corpus_config_json(index.config);
  j["volumes"] = json::array();
  for (const auto& v : index.volumes) j["volumes"].push_back({{"id", v.id}, {"acquisition", v.acquisition}});
  write_text(dir / "corpus.json", j.dump(2) + "\n");
}

}  // namespace

std::filesystem::path volume_path(const std::filesystem::path& corpus, Track track, const std::string& id) {
  return corpus / to_string(track) / (id + ".h5");
}

CorpusIndex simulate_corpus(const CorpusConfig& cfg, const std::filesystem::path& dir) {
  if (cfg.volumes < 0 || cfg.slices < 1 || cfg.coils < 1) {
    throw Error(ErrorCode::InvalidArgument, "corpus needs volumes >= 0, slices >= 1, coils >= 1");
  }
  if (cfg.height < 2 || cfg.width < 2) throw Error(ErrorCode::DimensionTooSmall, "phantom must be at least 2x2");
  if (cfg.crop.out_height > cfg.height || cfg.crop.out_width > cfg.width) {
    throw Error(ErrorCode::DimensionTooSmall, "crop exceeds the phantom size");
  }
  if (cfg.acquisitions.empty()) throw Error(ErrorCode::InvalidArgument, "at least one acquisition label");
  for (const auto& a : cfg.acquisitions) acquisition_from_string(a);

  std::filesystem::create_directories(dir / to_string(Track::MultiCoil));
  std::filesystem::create_directories(dir / to_string(Track::SingleCoil));

  CorpusIndex index{cfg, {}};
  std::vector<std::string> ids;
  for (Index v = 0; v < cfg.volumes; ++v) {
    const std::string id = volume_id(cfg, v);
    const std::string label = cfg.acquisitions[static_cast<std::size_t>(v) % cfg.acquisitions.size()];
    const std::uint64_t vseed = stable_hash(cfg.seed, id);

    RealVolume<double> m(cfg.slices, cfg.height, cfg.width);
    for (Index s = 0; s < cfg.slices; ++s) {
      const auto spec = jittered_shepp_logan(cfg.height, cfg.width, splitmix64(vseed + static_cast<std::uint64_t>(s)),
                                             cfg.jitter);
      m.slice(s) = make_phantom<double>(spec).slice(0);
    }
    const double peak = m.values().maxCoeff();
    const auto sens = make_sensitivities<double>(cfg.height, cfg.width, cfg.coils, splitmix64(vseed ^ 0x5eed));
    AcquisitionSpec acq{cfg.coils, cfg.noise_sigma * peak, 0};
    KSpaceVolume<double> y = acquire(m, sens, acq, splitmix64(vseed ^ 0x0015e));
    y.set_acquisition(acquisition_from_string(label));

    VolumeAttributes attrs;
    attrs.acquisition = label;
    attrs.patient_id = id;

    VolumeRecord<float> multi;
    multi.kspace = cast_stack<float>(y);
    multi.reconstruction_rss = cast_volume<float>(rss_reconstruction(y, cfg.crop));
    multi.attributes = attrs;
    set_target_statistics(multi);
    write_volume(multi, volume_path(dir, Track::MultiCoil, id));

    // single-coil track: emulated single coil fitted to the full-FOV RSS image
    const ImageVolume<double> coil_images = ifft2c(y);
    const auto esc = fit_esc(coil_images, rss_combine(coil_images));
    const KSpaceVolume<double> ysc = esc_kspace(y, esc);
    VolumeRecord<float> single;
    single.kspace = cast_stack<float>(ysc);
    single.reconstruction_esc = cast_volume<float>(center_crop(magnitude(ifft2c(ysc)), cfg.crop));
    single.reconstruction_rss = multi.reconstruction_rss;
    single.attributes = attrs;
    set_target_statistics(single);
    write_volume(single, volume_path(dir, Track::SingleCoil, id));

    index.volumes.push_back({id, label});
    ids.push_back(id);
  }

  write_corpus_index(index, dir);
  write_manifest(build_split(ids, cfg.split_fractions, cfg.seed), dir / "manifest.jsonl");
  return index;
}

CorpusIndex read_corpus_index(const std::filesystem::path& dir) {
  const auto path = dir / "corpus.json";
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorCode::MissingDataset, path.string() + ": corpus index not found");
  }
  try {
    const auto j = json::parse(read_text(path));
    CorpusIndex index;
    index.config = corpus_config_from_json(j.at("config"));
    for (const auto& v : j.at("volumes")) {
      index.volumes.push_back({v.at("id").get<std::string>(), v.at("acquisition").get<std::string>()});
    }
    return index;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ContainerFormat, path.string() + ": " + e.what());
  }
}

CorpusConfig read_corpus_config(const std::filesystem::path& path) {
  try {
    return corpus_config_from_json(json::parse(read_text(path)));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, path.string() + ": " + e.what());
  }
}

Index write_masked_corpus(const std::filesystem::path& corpus, const std::filesystem::path& out, Split split) {
  const auto index = read_corpus_index(corpus);
  const auto manifest = read_manifest(corpus / "manifest.jsonl");
  Index written = 0;
  CorpusIndex selected{index.config, {}};
  for (const auto& v : index.volumes) {
    const auto* e = manifest.find(v.id);
    if (!e || e->split != split) continue;
    selected.volumes.push_back(v);
    for (Track track : {Track::SingleCoil, Track::MultiCoil}) {
      const auto src = volume_path(corpus, track, v.id);
      if (!std::filesystem::exists(src)) continue;
      auto rec = read_volume<float>(src, track);
      const auto mask = make_mask(rec.kspace.width(), e->policy, e->seed);
      VolumeRecord<float> test;
      test.kspace = apply_mask(rec.kspace, mask);
      test.mask = mask;
      test.attributes.acquisition = rec.attributes.acquisition;
      test.attributes.patient_id = rec.attributes.patient_id;
      test.attributes.ismrmrd_header = rec.attributes.ismrmrd_header;
      test.attributes.acceleration = e->policy.acceleration;
      test.attributes.num_low_frequency = mask.num_low_frequency;
      std::filesystem::create_directories(out / to_string(track));
      write_volume(test, volume_path(out, track, v.id));
      ++written;
    }
  }
  std::filesystem::create_directories(out);
  write_corpus_index(selected, out);
  return written;
}

void ExperimentPlan::validate() const {
  if (tracks.empty()) throw Error(ErrorCode::InvalidArgument, "plan needs at least one track");
  if (accelerations.empty()) throw Error(ErrorCode::InvalidArgument, "plan needs at least one acceleration");
  for (int r : accelerations) MaskPolicy::canonical(r);
  if (mask_kinds.empty()) throw Error(ErrorCode::InvalidArgument, "plan needs at least one mask kind");
  for (double l : lambdas) {
    if (!(l >= 0.0) || !std::isfinite(l)) throw Error(ErrorCode::InvalidArgument, "lambda must be finite and >= 0");
  }
  for (const auto& m : metrics) {
    if (m != "nmse" && m != "psnr" && m != "ssim") throw Error(ErrorCode::InvalidArgument, "unknown metric '" + m + "'");
  }
  if (max_iters < 1) throw Error(ErrorCode::InvalidArgument, "max_iters must be >= 1");
  if (jobs < 1) throw Error(ErrorCode::InvalidArgument, "jobs must be >= 1");
}

std::string plan_to_json(const ExperimentPlan& p) {
  json j;
  j["corpus"] = p.corpus.string();
  j["tracks"] = json::array();
  for (auto t : p.tracks) j["tracks"].push_back(to_string(t));
  j["accelerations"] = p.accelerations;
  j["mask_kinds"] = json::array();
  for (auto k : p.mask_kinds) j["mask_kinds"].push_back(to_string(k));
  j["lambdas"] = p.lambdas;
  j["regularizer"] = {{"kind", to_string(p.regularizer.kind)},
                      {"levels", p.regularizer.levels},
                      {"tv_inner_iters", p.regularizer.tv_inner_iters}};
  j["max_iters"] = p.max_iters;
  j["tol"] = p.tol;
  j["accelerate"] = p.accelerate;
  j["zero_filled_baseline"] = p.zero_filled_baseline;
  j["split"] = p.split ? to_string(*p.split) : "all";
  j["metrics"] = p.metrics;
  j["output"] = p.output.string();
  j["seed"] = p.seed;
  j["jobs"] = p.jobs;
  return j.dump(2) + "\n";
}

ExperimentPlan plan_from_json(const std::string& text) {
  static const std::set<std::string> known{"corpus",   "tracks",      "accelerations", "mask_kinds",
                                           "lambdas",  "regularizer", "max_iters",     "tol",
                                           "accelerate", "zero_filled_baseline", "split", "metrics",
                                           "output",   "seed",        "jobs"};
  ExperimentPlan p;
  try {
    const auto j = json::parse(text);
    for (const auto& [k, _] : j.items()) {
      if (!known.count(k)) throw Error(ErrorCode::InvalidArgument, "unknown plan key '" + k + "'");
    }
    p.corpus = j.value("corpus", std::string{});
    if (j.contains("tracks")) {
      p.tracks.clear();
      for (const auto& t : j.at("tracks")) p.tracks.push_back(track_from_string(t.get<std::string>()));
    }
    p.accelerations = j.value("accelerations", p.accelerations);
    if (j.contains("mask_kinds")) {
      p.mask_kinds.clear();
      for (const auto& k : j.at("mask_kinds")) p.mask_kinds.push_back(mask_kind_from_string(k.get<std::string>()));
    }
    p.lambdas = j.value("lambdas", p.lambdas);
    if (j.contains("regularizer")) {
      const auto& r = j.at("regularizer");
      p.regularizer.kind = regularizer_from_string(r.value("kind", std::string("tv")));
      p.regularizer.levels = r.value("levels", p.regularizer.levels);
      p.regularizer.tv_inner_iters = r.value("tv_inner_iters", p.regularizer.tv_inner_iters);
    }
    p.max_iters = j.value("max_iters", p.max_iters);
    p.tol = j.value("tol", p.tol);
    p.accelerate = j.value("accelerate", p.accelerate);
    p.zero_filled_baseline = j.value("zero_filled_baseline", p.zero_filled_baseline);
    if (j.contains("split")) {
      const auto s = j.at("split").get<std::string>();
      p.split = s == "all" ? std::nullopt : std::optional<Split>(split_from_string(s));
    }
    p.metrics = j.value("metrics", p.metrics);
    p.output = j.value("output", std::string{});
    p.seed = j.value("seed", p.seed);
    p.jobs = j.value("jobs", p.jobs);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("malformed plan: ") + e.what());
  }
  p.validate();
  return p;
}

ExperimentPlan read_plan(const std::filesystem::path& path) {
  try {
    return plan_from_json(read_text(path));
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

std::vector<PlanCell> enumerate_cells(const ExperimentPlan& p) {
  std::vector<PlanCell> cells;
  for (auto t : p.tracks)
    for (int r : p.accelerations)
      for (auto k : p.mask_kinds)
        for (double l : p.lambdas) cells.push_back({t, r, k, l});
  return cells;
}

std::vector<ResultRow> aggregate(const std::vector<VolumeScore>& scores) {
  struct Acc {
    Index n = 0, psnr_n = 0, psnr_inf = 0;
    double nmse = 0, psnr = 0, ssim = 0;
  };
  // (key, is-aggregate, acquisition)
  std::map<std::tuple<RowKey, int, std::string>, Acc> groups;
  for (const auto& s : scores) {
    for (int agg : {0, 1}) {
      auto& a = groups[{s.key, agg, agg ? kAggregateLabel : s.acquisition}];
      ++a.n;
      a.nmse += s.nmse;
      a.ssim += s.ssim;
      if (std::isinf(s.psnr) && s.psnr > 0) {
        ++a.psnr_inf;
      } else {
        a.psnr += s.psnr;
        ++a.psnr_n;
      }
    }
  }
  std::vector<ResultRow> rows;
  for (const auto& [k, a] : groups) {
    ResultRow r;
    r.key = std::get<0>(k);
    r.acquisition = std::get<2>(k);
    r.volumes = a.n;
    r.nmse = a.nmse / static_cast<double>(a.n);
    r.ssim = a.ssim / static_cast<double>(a.n);
    r.psnr = a.psnr_n > 0 ? a.psnr / static_cast<double>(a.psnr_n) : std::numeric_limits<double>::infinity();
    r.psnr_excluded = a.psnr_inf;
    rows.push_back(std::move(r));
  }
  mark_best(rows);
  return rows;
}

void mark_best(std::vector<ResultRow>& rows) {
  using Group = std::tuple<Track, int, std::string, std::string>;
  std::map<Group, std::array<double, 3>> best;
  for (const auto& r : rows) {
    const Group g{r.key.track, r.key.acceleration, r.key.mask_kind, r.acquisition};
    auto [it, fresh] = best.try_emplace(g, std::array<double, 3>{r.nmse, r.psnr, r.ssim});
    if (fresh) continue;
    auto& b = it->second;
    if (r.nmse < b[0]) b[0] = r.nmse;
    if (r.psnr > b[1]) b[1] = r.psnr;
    if (r.ssim > b[2]) b[2] = r.ssim;
  }
  for (auto& r : rows) {
    const auto& b = best.at({r.key.track, r.key.acceleration, r.key.mask_kind, r.acquisition});
    r.best_nmse = r.nmse == b[0];
    r.best_psnr = r.psnr == b[1];
    r.best_ssim = r.ssim == b[2];
  }
}

ResultTable run_plan(const ExperimentPlan& plan) {
  plan.validate();
  ResultTable table;
  table.title = "Classical baseline (" + to_string(plan.regularizer.kind) + ")";
  table.metrics = plan.metrics;

  const auto index = read_corpus_index(plan.corpus);
  const auto volumes = select_volumes(plan.corpus, index, plan.split, table.warnings);
  if (volumes.empty()) {
    table.warnings.push_back("no volumes selected from corpus " + plan.corpus.string());
    if (!plan.output.empty()) persist(table, plan.output);
    return table;
  }

  struct Unit {
    Track track;
    int acceleration;
    MaskKind kind;
    const CorpusVolume* volume;
  };
  std::vector<Unit> units;
  for (auto t : plan.tracks)
    for (int r : plan.accelerations)
      for (auto k : plan.mask_kinds)
        for (const auto& v : volumes) units.push_back({t, r, k, &v});

  auto run_unit = [&](std::size_t i) {
    const Unit& u = units[i];
    UnitResult out;
    const std::string id = u.volume->id;
    auto key_for = [&](std::string model, std::optional<double> lambda) {
      return RowKey{u.track, u.acceleration, to_string(u.kind), std::move(model), lambda};
    };
    auto fail_all = [&](const std::string& msg) {
      if (plan.zero_filled_baseline) out.failures.push_back({key_for("zero-filled", std::nullopt), id, msg});
      for (double l : plan.lambdas) out.failures.push_back({key_for(to_string(plan.regularizer.kind), l), id, msg});
    };
    try {
      const auto rec = read_volume<double>(volume_path(plan.corpus, u.track, id), u.track);
      const auto& target = rec.target();
      if (!target) throw Error(ErrorCode::MissingDataset, id + ": no ground truth for " + to_string(u.track));
      const CropSpec crop{target->height(), target->width()};
      const auto mask =
          make_mask(rec.kspace.width(), MaskPolicy::canonical(u.acceleration, u.kind), mask_seed(plan.seed, id));
      const auto y = apply_mask(rec.kspace, mask);
      const std::string acq = rec.attributes.acquisition;

      if (plan.zero_filled_baseline) {
        out.scores.push_back(score(key_for("zero-filled", std::nullopt), id, acq, zero_filled(y, mask, crop), *target));
      }
      std::optional<SensitivitySet<double>> sens;
      if (u.track == Track::MultiCoil) sens = estimate_sensitivities(y, mask);
      for (double l : plan.lambdas) {
        const RowKey key = key_for(to_string(plan.regularizer.kind), l);
        try {
          SolveConfig cfg;
          cfg.lambda = l;
          cfg.max_iters = plan.max_iters;
          cfg.regularizer = plan.regularizer;
          cfg.tol = plan.tol;
          cfg.accelerate = plan.accelerate;
          const auto res = sens ? cs_reconstruct_multicoil(y, *sens, mask, cfg, crop)
                                : cs_reconstruct_singlecoil(y, mask, cfg, crop);
          VolumeScore s = score(key, id, acq, res.image, *target);
          for (const auto& tr : res.traces) {
            s.iterations = std::max(s.iterations, tr.iterations_run);
            s.converged = s.converged && tr.converged;
          }
          out.scores.push_back(std::move(s));
        } catch (const std::exception& e) {
          out.failures.push_back({key, id, e.what()});
        }
      }
    } catch (const std::exception& e) {
      out.scores.clear();
      out.failures.clear();
      fail_all(e.what());
    }
    return out;
  };

  finish(table, run_pool(units.size(), plan.jobs, run_unit));
  if (!plan.output.empty()) persist(table, plan.output);
  return table;
}

ResultTable score_external(const ExternalScoring& e) {
  ResultTable table;
  table.title = "Reconstructions from " + e.model;
  const auto index = read_corpus_index(e.corpus);
  const auto volumes = select_volumes(e.corpus, index, e.split, table.warnings);
  if (volumes.empty()) table.warnings.push_back("no volumes selected from corpus " + e.corpus.string());
  const RowKey key{e.track, e.acceleration, "", e.model, std::nullopt};

  std::vector<UnitResult> units(volumes.size());
  for (std::size_t i = 0; i < volumes.size(); ++i) {
    const auto& v = volumes[i];
    auto& out = units[i];
    const auto recon_path = e.recon_dir / (v.id + ".h5");
    if (!std::filesystem::exists(recon_path)) {
      out.failures.push_back({key, v.id, "missing reconstruction " + recon_path.string()});
      continue;
    }
    try {
      const auto rec = read_volume<double>(volume_path(e.corpus, e.track, v.id), e.track);
      if (!rec.target()) throw Error(ErrorCode::MissingDataset, v.id + ": no ground truth");
      const auto& target = *rec.target();
      const auto recon = read_reconstruction<double>(recon_path);
      const CropSpec crop = e.crop.value_or(CropSpec{target.height(), target.width()});
      if (recon.slices() != target.slices()) {
        throw Error(ErrorCode::ShapeMismatch, v.id + ": reconstruction has " + std::to_string(recon.slices()) +
                                                  " slices, ground truth " + std::to_string(target.slices()));
      }
      RealVolume<double> a, b;
      try {
        a = center_crop(recon, crop);
        b = center_crop(target, crop);
      } catch (const Error& err) {
        throw Error(ErrorCode::ShapeMismatch, v.id + ": " + err.what());
      }
      out.scores.push_back(score(key, v.id, v.acquisition, a, b));
    } catch (const std::exception& err) {
      out.failures.push_back({key, v.id, err.what()});
    }
  }
  finish(table, std::move(units));
  return table;
}

std::string score_to_jsonl(const VolumeScore& s) {
  auto num = [](double x) { return std::isfinite(x) ? json(x) : json(x > 0 ? "inf" : (x < 0 ? "-inf" : "nan")); };
  json j;
  j["track"] = to_string(s.key.track);
  j["acceleration"] = s.key.acceleration;
  j["mask_kind"] = s.key.mask_kind;
  j["model"] = s.key.model;
  j["lambda"] = s.key.lambda ? json(*s.key.lambda) : json(nullptr);
  j["volume_id"] = s.volume_id;
  j["acquisition"] = s.acquisition;
  j["nmse"] = num(s.nmse);
  j["psnr"] = num(s.psnr);
  j["ssim"] = num(s.ssim);
  j["iterations"] = s.iterations;
  j["converged"] = s.converged;
  return j.dump();
}

VolumeScore score_from_jsonl(const std::string& line) {
  auto num = [](const json& v) {
    if (v.is_number()) return v.get<double>();
    const auto s = v.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    return std::numeric_limits<double>::quiet_NaN();
  };
  try {
    const auto j = json::parse(line);
    VolumeScore s;
    s.key.track = track_from_string(j.at("track").get<std::string>());
    s.key.acceleration = j.at("acceleration").get<int>();
    s.key.mask_kind = j.at("mask_kind").get<std::string>();
    s.key.model = j.at("model").get<std::string>();
    if (!j.at("lambda").is_null()) s.key.lambda = j.at("lambda").get<double>();
    s.volume_id = j.at("volume_id").get<std::string>();
    s.acquisition = j.at("acquisition").get<std::string>();
    s.nmse = num(j.at("nmse"));
    s.psnr = num(j.at("psnr"));
    s.ssim = num(j.at("ssim"));
    s.iterations = j.value("iterations", 0);
    s.converged = j.value("converged", true);
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ContainerFormat, std::string("malformed score record: ") + e.what());
  }
}

}  // namespace mrbench
