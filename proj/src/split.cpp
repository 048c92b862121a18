#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "json.hpp"

#include "mrbench/dataio.hpp"
#include "mrbench/rng.hpp"

namespace mrbench {

std::string to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Validation: return "validation";
    case Split::Test: return "test";
  }
  return "train";
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "validation" || s == "val") return Split::Validation;
  if (s == "test") return Split::Test;
  throw Error(ErrorCode::InvalidArgument, "unknown split '" + s + "'");
}

const ManifestEntry* SplitManifest::find(const std::string& id) const {
  for (const auto& e : entries) {
    if (e.id == id) return &e;
  }
  return nullptr;
}

namespace {

std::array<std::size_t, 3> largest_remainder(std::size_t n, const std::array<double, 3>& f) {
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> rem{};
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    const double exact = f[i] * static_cast<double>(n);
    counts[i] = static_cast<std::size_t>(std::floor(exact));
    rem[i] = exact - std::floor(exact);
    assigned += counts[i];
  }
  std::array<std::size_t, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
  for (std::size_t k = 0; assigned < n; k = (k + 1) % 3, ++assigned) ++counts[order[k]];
  return counts;
}

}  // namespace

SplitManifest build_split(const std::vector<std::string>& volume_ids, const std::array<double, 3>& fractions,
                          std::uint64_t seed, MaskKind kind) {
  std::set<std::string> seen;
  for (const auto& id : volume_ids) {
    if (!seen.insert(id).second) throw Error(ErrorCode::DuplicateId, "duplicate volume id '" + id + "'");
  }
  for (double f : fractions) {
    if (!(f >= 0.0)) throw Error(ErrorCode::InvalidArgument, "split fractions must be non-negative");
  }
  const double total = fractions[0] + fractions[1] + fractions[2];
  if (std::abs(total - 1.0) > 1e-9) {
    throw Error(ErrorCode::InvalidArgument, "split fractions sum to " + std::to_string(total) + ", not 1");
  }

  const std::size_t n = volume_ids.size();
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    std::swap(perm[i - 1], perm[rng.below(i)]);
  }
  const auto counts = largest_remainder(n, fractions);

  std::vector<Split> split_of(n);
  for (std::size_t k = 0; k < n; ++k) {
    split_of[perm[k]] = k < counts[0] ? Split::Train : k < counts[0] + counts[1] ? Split::Validation : Split::Test;
  }

  SplitManifest m;
  m.entries.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int accel = rng.below(2) == 0 ? 4 : 8;
    m.entries.push_back({volume_ids[i], split_of[i], MaskPolicy::canonical(accel, kind),
                         stable_hash(seed, volume_ids[i])});
  }
  return m;
}

void write_manifest(const SplitManifest& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, path.string() + ": cannot open for writing");
  for (const auto& e : m.entries) {
    nlohmann::ordered_json j;
    j["id"] = e.id;
    j["split"] = to_string(e.split);
    j["kind"] = to_string(e.policy.kind);
    j["acceleration"] = e.policy.acceleration;
    j["center_fraction"] = e.policy.center_fraction;
    j["seed"] = e.seed;
    out << j.dump() << "\n";
  }
  if (!out) throw Error(ErrorCode::Io, path.string() + ": write failed");
}

SplitManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, path.string() + ": cannot open");
  SplitManifest m;
  std::set<std::string> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    try {
      const auto j = nlohmann::json::parse(line);
      ManifestEntry e;
      e.id = j.at("id").get<std::string>();
      e.split = split_from_string(j.at("split").get<std::string>());
      e.policy.kind = mask_kind_from_string(j.at("kind").get<std::string>());
      e.policy.acceleration = j.at("acceleration").get<int>();
      e.policy.center_fraction = j.at("center_fraction").get<double>();
      e.seed = j.at("seed").get<std::uint64_t>();
      if (!seen.insert(e.id).second) throw Error(ErrorCode::DuplicateId, where + ": duplicate id '" + e.id + "'");
      m.entries.push_back(std::move(e));
    } catch (const nlohmann::json::exception& ex) {
      throw Error(ErrorCode::ContainerFormat, where + ": " + ex.what());
    }
  }
  return m;
}

}  // namespace mrbench
