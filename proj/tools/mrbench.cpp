// mrbench: phantom corpora, masks, reconstructions and benchmark tables.

#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "mrbench/coils.hpp"
#include "mrbench/harness.hpp"
#include "mrbench/solver.hpp"

using namespace mrbench;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  std::string out;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, path + ": cannot open");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void print_summary(const ResultTable& t) {
  std::cout << render_report(t, ReportFormat::Text);
}

int cmd_simulate(const Globals& g, const std::string& config, std::optional<Index> volumes) {
  CorpusConfig cfg;
  if (!config.empty()) cfg = read_corpus_config(config);
  if (volumes) cfg.volumes = *volumes;
  if (g.seed) cfg.seed = *g.seed;
  if (g.out.empty()) throw Error(ErrorCode::InvalidArgument, "simulate needs --out");
  const auto index = simulate_corpus(cfg, g.out);
  std::cout << "wrote " << index.volumes.size() << " volumes to " << g.out << "\n";
  return 0;
}

int cmd_mask(const Globals& g, const std::string& corpus, const std::string& split) {
  if (g.out.empty()) throw Error(ErrorCode::InvalidArgument, "mask needs --out");
  const Index n = write_masked_corpus(corpus, g.out, split_from_string(split));
  std::cout << "wrote " << n << " masked files to " << g.out << "\n";
  return 0;
}

struct ReconOptions {
  std::string corpus;
  std::string track = "singlecoil";
  std::string method = "cs";
  int acceleration = 4;
  std::string kind = "random";
  double lambda = 0.01;
  std::string regularizer = "tv";
  int iters = 200;
  std::string split = "all";
};

int cmd_reconstruct(const Globals& g, const ReconOptions& o) {
  if (g.out.empty()) throw Error(ErrorCode::InvalidArgument, "reconstruct needs --out");
  const Track track = track_from_string(o.track);
  const auto index = read_corpus_index(o.corpus);
  std::optional<SplitManifest> manifest;
  if (o.split != "all") manifest = read_manifest(std::filesystem::path(o.corpus) / "manifest.jsonl");
  const std::uint64_t seed = g.seed.value_or(0);
  std::filesystem::create_directories(g.out);
  int failures = 0, written = 0;
  for (const auto& v : index.volumes) {
    if (manifest) {
      const auto* e = manifest->find(v.id);
      if (!e || e->split != split_from_string(o.split)) continue;
    }
    try {
      auto rec = read_volume<double>(volume_path(o.corpus, track, v.id), track);
      const SamplingMask mask =
          rec.mask ? *rec.mask
                   : make_mask(rec.kspace.width(), MaskPolicy::canonical(o.acceleration, mask_kind_from_string(o.kind)),
                               mask_seed(seed, v.id));
      const auto y = apply_mask(rec.kspace, mask);
      const auto& target = rec.target();
      const CropSpec crop = target ? CropSpec{target->height(), target->width()}
                                   : CropSpec{std::min<Index>(320, y.height()), std::min<Index>(320, y.width())};
      RealVolume<double> out;
      if (o.method == "zero-filled") {
        out = zero_filled(y, mask, crop);
      } else if (o.method == "ls") {
        if (track != Track::MultiCoil) throw Error(ErrorCode::InvalidArgument, "ls needs multicoil data");
        out = least_squares_multicoil(y, estimate_sensitivities(y, mask), mask, o.iters, crop);
      } else if (o.method == "cs") {
        SolveConfig cfg;
        cfg.lambda = o.lambda;
        cfg.max_iters = o.iters;
        cfg.regularizer.kind = regularizer_from_string(o.regularizer);
        out = track == Track::MultiCoil
                  ? cs_reconstruct_multicoil(y, estimate_sensitivities(y, mask), mask, cfg, crop).image
                  : cs_reconstruct_singlecoil(y, mask, cfg, crop).image;
      } else {
        throw Error(ErrorCode::InvalidArgument, "unknown method '" + o.method + "'");
      }
      write_reconstruction(out, std::filesystem::path(g.out) / (v.id + ".h5"));
      ++written;
    } catch (const std::exception& e) {
      std::cerr << v.id << ": " << e.what() << "\n";
      ++failures;
    }
  }
  std::cout << "wrote " << written << " reconstructions to " << g.out << "\n";
  return failures == 0 ? 0 : 1;
}

struct EvalOptions {
  std::string plan;
  std::string recon;
  std::string corpus;
  std::string track = "singlecoil";
  std::string model = "external";
  int acceleration = 0;
  std::string split = "all";
};

int cmd_evaluate(const Globals& g, const EvalOptions& o) {
  ResultTable table;
  if (!o.plan.empty()) {
    ExperimentPlan plan = read_plan(o.plan);
    if (!o.corpus.empty()) plan.corpus = o.corpus;
    if (g.seed) plan.seed = *g.seed;
    if (g.jobs > 1) plan.jobs = g.jobs;
    if (!g.out.empty()) plan.output = g.out;
    table = run_plan(plan);
  } else {
    if (o.recon.empty() || o.corpus.empty()) {
      throw Error(ErrorCode::InvalidArgument, "evaluate needs --plan, or --recon with --corpus");
    }
    ExternalScoring e;
    e.recon_dir = o.recon;
    e.corpus = o.corpus;
    e.track = track_from_string(o.track);
    e.model = o.model;
    e.acceleration = o.acceleration;
    if (o.split != "all") e.split = split_from_string(o.split);
    table = score_external(e);
    if (!g.out.empty()) {
      std::filesystem::create_directories(g.out);
      std::string records;
      for (const auto& s : table.scores) records += score_to_jsonl(s) + "\n";
      std::ofstream(std::filesystem::path(g.out) / "records.jsonl", std::ios::binary) << records;
      emit_all_reports(table, g.out);
    }
  }
  print_summary(table);
  return 0;
}

int cmd_report(const Globals& g, const std::string& table_path, const std::string& format) {
  const auto table = parse_structured_report(slurp(table_path));
  const auto f = report_format_from_string(format);
  if (g.out.empty()) {
    std::cout << render_report(table, f);
  } else {
    emit_report(table, f, g.out);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Accelerated MRI reconstruction benchmark"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  std::uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "Seed for corpora, masks and plans");
  app.add_option("--jobs", g.jobs, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--out", g.out, "Output directory (or file for report)");

  auto* sim = app.add_subcommand("simulate", "Generate a phantom corpus");
  std::string config;
  std::optional<Index> volumes;
  sim->add_option("--config", config, "Corpus recipe (JSON)")->check(CLI::ExistingFile);
  sim->add_option("--volumes", volumes, "Override the number of volumes");

  auto* mask = app.add_subcommand("mask", "Write test-style masked copies of a corpus split");
  std::string mask_corpus, mask_split = "test";
  mask->add_option("--corpus", mask_corpus)->required()->check(CLI::ExistingDirectory);
  mask->add_option("--split", mask_split);

  auto* rec = app.add_subcommand("reconstruct", "Reconstruct every corpus volume with one method");
  ReconOptions ro;
  rec->add_option("--corpus", ro.corpus)->required()->check(CLI::ExistingDirectory);
  rec->add_option("--track", ro.track);
  rec->add_option("--method", ro.method, "zero-filled | cs | ls");
  rec->add_option("--acceleration", ro.acceleration);
  rec->add_option("--kind", ro.kind, "random | equispaced");
  rec->add_option("--lambda", ro.lambda);
  rec->add_option("--regularizer", ro.regularizer, "tv | wavelet | l1");
  rec->add_option("--iters", ro.iters);
  rec->add_option("--split", ro.split);

  auto* eval = app.add_subcommand("evaluate", "Run a plan, or score external reconstructions");
  EvalOptions eo;
  eval->add_option("--plan", eo.plan)->check(CLI::ExistingFile);
  eval->add_option("--recon", eo.recon)->check(CLI::ExistingDirectory);
  eval->add_option("--corpus", eo.corpus)->check(CLI::ExistingDirectory);
  eval->add_option("--track", eo.track);
  eval->add_option("--model", eo.model);
  eval->add_option("--acceleration", eo.acceleration);
  eval->add_option("--split", eo.split);

  auto* rep = app.add_subcommand("report", "Re-render a structured report");
  std::string table_path, format = "text";
  rep->add_option("--table", table_path)->required()->check(CLI::ExistingFile);
  rep->add_option("--format", format, "text | csv | json");

  CLI11_PARSE(app, argc, argv);
  if (seed_opt->count() > 0) g.seed = seed;

  try {
    if (sim->parsed()) return cmd_simulate(g, config, volumes);
    if (mask->parsed()) return cmd_mask(g, mask_corpus, mask_split);
    if (rec->parsed()) return cmd_reconstruct(g, ro);
    if (eval->parsed()) return cmd_evaluate(g, eo);
    if (rep->parsed()) return cmd_report(g, table_path, format);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
