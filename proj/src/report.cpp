#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "mrbench/harness.hpp"

namespace mrbench {

using json = nlohmann::ordered_json;

namespace {

// Shortest representation that reads back to the same double.
std::string exact(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  (void)ec;
  return std::string(buf, end);
}

double parse_exact(const json& v) {
  if (v.is_number()) return v.get<double>();
  const auto s = v.get<std::string>();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  throw Error(ErrorCode::ContainerFormat, "bad number '" + s + "'");
}

json number(double x) { return std::isfinite(x) ? json(x) : json(exact(x)); }

std::string fixed(double x, int digits) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (std::isnan(x)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

std::string lambda_text(const std::optional<double>& l) {
  if (!l) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", *l);
  return buf;
}

bool shows(const ResultTable& t, const std::string& metric) {
  return std::find(t.metrics.begin(), t.metrics.end(), metric) != t.metrics.end();
}

std::string best_flags(const ResultTable& t, const ResultRow& r) {
  std::string out;
  auto add = [&](const char* m, bool on) {
    if (!on || !shows(t, m)) return;
    if (!out.empty()) out += ",";
    out += m;
  };
  add("nmse", r.best_nmse);
  add("psnr", r.best_psnr);
  add("ssim", r.best_ssim);
  return out.empty() ? "" : "*" + out;
}

std::string pad(const std::string& s, std::size_t w) { return s.size() >= w ? s + " " : s + std::string(w - s.size(), ' '); }

std::string render_text(const ResultTable& t) {
  std::ostringstream os;
  os << t.title << "\n";
  std::string group;
  for (const auto& r : t.rows) {
    std::ostringstream g;
    g << to_string(r.key.track);
    if (r.key.acceleration > 0) g << ", " << r.key.acceleration << "x";
    if (!r.key.mask_kind.empty()) g << ", " << r.key.mask_kind << " mask";
    if (g.str() != group) {
      group = g.str();
      os << "\n== " << group << " ==\n";
      os << pad("model", 14) << pad("lambda", 9) << pad("acquisition", 13) << pad("volumes", 9);
      if (shows(t, "nmse")) os << pad("NMSE", 10);
      if (shows(t, "psnr")) os << pad("PSNR", 9);
      if (shows(t, "ssim")) os << pad("SSIM", 8);
      os << "best\n";
    }
    os << pad(r.key.model, 14) << pad(lambda_text(r.key.lambda), 9) << pad(r.acquisition, 13)
       << pad(std::to_string(r.volumes), 9);
    if (shows(t, "nmse")) os << pad(fixed(r.nmse, 4), 10);
    if (shows(t, "psnr")) os << pad(fixed(r.psnr, 2), 9);
    if (shows(t, "ssim")) os << pad(fixed(r.ssim, 4), 8);
    os << best_flags(t, r) << "\n";
  }
  if (t.rows.empty()) os << "\n(no results)\n";
  bool excluded = false;
  for (const auto& r : t.rows) excluded = excluded || r.psnr_excluded > 0;
  if (excluded && shows(t, "psnr")) {
    os << "\nPSNR means leave out exact reconstructions (infinite PSNR):\n";
    for (const auto& r : t.rows) {
      if (r.psnr_excluded > 0) {
        os << "  " << to_string(r.key.track) << " " << r.key.model << " " << lambda_text(r.key.lambda) << " "
           << r.acquisition << ": " << r.psnr_excluded << " of " << r.volumes << "\n";
      }
    }
  }
  if (!t.failures.empty()) {
    os << "\nFailures (" << t.failures.size() << "):\n";
    for (const auto& f : t.failures) {
      os << "  " << to_string(f.key.track) << " " << f.key.acceleration << "x " << f.key.model << " "
         << lambda_text(f.key.lambda) << " " << f.volume_id << ": " << f.message << "\n";
    }
  }
  if (!t.warnings.empty()) {
    os << "\nWarnings:\n";
    for (const auto& w : t.warnings) os << "  " << w << "\n";
  }
  return os.str();
}

std::string render_csv(const ResultTable& t) {
  std::ostringstream os;
  os << "track,acceleration,mask_kind,model,lambda,acquisition,volumes,nmse,psnr,ssim,psnr_excluded,"
        "best_nmse,best_psnr,best_ssim\n";
  for (const auto& r : t.rows) {
    os << to_string(r.key.track) << "," << r.key.acceleration << "," << r.key.mask_kind << "," << r.key.model << ","
       << (r.key.lambda ? exact(*r.key.lambda) : "") << "," << r.acquisition << "," << r.volumes << ","
       << exact(r.nmse) << "," << exact(r.psnr) << "," << exact(r.ssim) << "," << r.psnr_excluded << ","
       << r.best_nmse << "," << r.best_psnr << "," << r.best_ssim << "\n";
  }
  return os.str();
}

json key_json(const RowKey& k) {
  json j;
  j["track"] = to_string(k.track);
  j["acceleration"] = k.acceleration;
  j["mask_kind"] = k.mask_kind;
  j["model"] = k.model;
  j["lambda"] = k.lambda ? json(*k.lambda) : json(nullptr);
  return j;
}

RowKey key_from_json(const json& j) {
  RowKey k;
  k.track = track_from_string(j.at("track").get<std::string>());
  k.acceleration = j.at("acceleration").get<int>();
  k.mask_kind = j.at("mask_kind").get<std::string>();
  k.model = j.at("model").get<std::string>();
  if (!j.at("lambda").is_null()) k.lambda = j.at("lambda").get<double>();
  return k;
}

std::string render_json(const ResultTable& t) {
  json j;
  j["title"] = t.title;
  j["metrics"] = t.metrics;
  j["rows"] = json::array();
  for (const auto& r : t.rows) {
    json row = key_json(r.key);
    row["acquisition"] = r.acquisition;
    row["volumes"] = r.volumes;
    row["nmse"] = number(r.nmse);
    row["psnr"] = number(r.psnr);
    row["ssim"] = number(r.ssim);
    row["psnr_excluded"] = r.psnr_excluded;
    row["best"] = {{"nmse", r.best_nmse}, {"psnr", r.best_psnr}, {"ssim", r.best_ssim}};
    j["rows"].push_back(std::move(row));
  }
  j["failures"] = json::array();
  for (const auto& f : t.failures) {
    json fj = key_json(f.key);
    fj["volume_id"] = f.volume_id;
    fj["message"] = f.message;
    j["failures"].push_back(std::move(fj));
  }
  j["warnings"] = t.warnings;
  return j.dump(2) + "\n";
}

}  // namespace

ReportFormat report_format_from_string(const std::string& s) {
  if (s == "text" || s == "text-table" || s == "txt") return ReportFormat::Text;
  if (s == "csv" || s == "delimited") return ReportFormat::Delimited;
  if (s == "json" || s == "structured") return ReportFormat::Structured;
  throw Error(ErrorCode::InvalidArgument, "unknown report format '" + s + "'");
}

std::string extension(ReportFormat f) {
  switch (f) {
    case ReportFormat::Text: return ".txt";
    case ReportFormat::Delimited: return ".csv";
    case ReportFormat::Structured: return ".json";
  }
  return ".txt";
}

std::string render_report(const ResultTable& t, ReportFormat f) {
  switch (f) {
    case ReportFormat::Text: return render_text(t);
    case ReportFormat::Delimited: return render_csv(t);
    case ReportFormat::Structured: return render_json(t);
  }
  return render_text(t);
}

void emit_report(const ResultTable& t, ReportFormat f, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, path.string() + ": cannot open for writing");
  out << render_report(t, f);
  if (!out) throw Error(ErrorCode::Io, path.string() + ": write failed");
}

void emit_all_reports(const ResultTable& t, const std::filesystem::path& dir) {
  for (auto f : {ReportFormat::Text, ReportFormat::Delimited, ReportFormat::Structured}) {
    emit_report(t, f, dir / ("table" + extension(f)));
  }
}

ResultTable parse_structured_report(const std::string& text) {
  try {
    const auto j = json::parse(text);
    ResultTable t;
    t.title = j.at("title").get<std::string>();
    t.metrics = j.at("metrics").get<std::vector<std::string>>();
    for (const auto& row : j.at("rows")) {
      ResultRow r;
      r.key = key_from_json(row);
      r.acquisition = row.at("acquisition").get<std::string>();
      r.volumes = row.at("volumes").get<Index>();
      r.nmse = parse_exact(row.at("nmse"));
      r.psnr = parse_exact(row.at("psnr"));
      r.ssim = parse_exact(row.at("ssim"));
      r.psnr_excluded = row.at("psnr_excluded").get<Index>();
      r.best_nmse = row.at("best").at("nmse").get<bool>();
      r.best_psnr = row.at("best").at("psnr").get<bool>();
      r.best_ssim = row.at("best").at("ssim").get<bool>();
      t.rows.push_back(std::move(r));
    }
    for (const auto& f : j.at("failures")) {
      t.failures.push_back({key_from_json(f), f.at("volume_id").get<std::string>(), f.at("message").get<std::string>()});
    }
    t.warnings = j.at("warnings").get<std::vector<std::string>>();
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ContainerFormat, std::string("malformed report: ") + e.what());
  }
}

}  // namespace mrbench
