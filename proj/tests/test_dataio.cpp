#include <hdf5.h>

#include <cstring>
#include <fstream>
#include <map>
#include <random>

#include "doctest.h"
#include "mrbench/dataio.hpp"
#include "oracles.hpp"

using namespace mrbench;
using oracle::C;

namespace {

KSpaceVolume<float> random_kspace(Index s, Index c, Index h, Index w, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  KSpaceVolume<float> k(s, c, h, w);
  for (Index p = 0; p < s * c; ++p) k.tensor().plane(p) = oracle::random_plane(h, w, g).cast<std::complex<float>>();
  return k;
}

RealVolume<float> random_real(Index s, Index h, Index w, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  RealVolume<float> v(s, h, w);
  for (Index k = 0; k < s; ++k) v.slice(k) = oracle::random_real_plane(h, w, g).cast<float>();
  return v;
}

VolumeRecord<float> train_record(Index coils, std::uint64_t seed) {
  VolumeRecord<float> r;
  r.kspace = random_kspace(2, coils, 12, 10, seed);
  r.attributes.acquisition = "CORPD_FBK";
  r.attributes.patient_id = "abc123";
  r.attributes.ismrmrd_header = "<ismrmrdHeader><x/></ismrmrdHeader>";
  if (coils == 1) {
    r.reconstruction_esc = random_real(2, 8, 8, seed + 1);
    r.reconstruction_rss = random_real(2, 8, 8, seed + 2);
  } else {
    r.reconstruction_rss = random_real(2, 8, 8, seed + 1);
  }
  set_target_statistics(r);
  return r;
}

VolumeRecord<float> test_record(Index coils, std::uint64_t seed) {
  VolumeRecord<float> r;
  const auto mask = make_random_mask(32, MaskPolicy{4, 0.125, MaskKind::Random}, seed);
  r.kspace = apply_mask(random_kspace(1, coils, 8, 32, seed), mask);
  r.mask = mask;
  r.attributes.acceleration = 4;
  r.attributes.num_low_frequency = mask.num_low_frequency;
  return r;
}

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return ErrorCode::Io;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("train-style round trip is bit-identical") {
  const auto dir = oracle::scratch("dataio-train");
  for (Index coils : {1, 4}) {
    const auto r = train_record(coils, 10 + coils);
    const auto path = dir / ("v" + std::to_string(coils) + ".h5");
    write_volume(r, path);
    const auto back = read_volume<float>(path);
    CHECK(back.kspace == r.kspace);
    CHECK(back.kspace.acquisition() == Acquisition::PD);
    CHECK(back.reconstruction_rss.has_value() == r.reconstruction_rss.has_value());
    if (r.reconstruction_rss) CHECK(*back.reconstruction_rss == *r.reconstruction_rss);
    if (r.reconstruction_esc) CHECK(*back.reconstruction_esc == *r.reconstruction_esc);
    CHECK(back.attributes.acquisition == "CORPD_FBK");
    CHECK(back.attributes.patient_id == "abc123");
    CHECK(back.attributes.ismrmrd_header == r.attributes.ismrmrd_header);
    CHECK(back.attributes.norm == r.attributes.norm);
    CHECK(back.attributes.max == r.attributes.max);
    CHECK(!back.attributes.acceleration);
    CHECK(!back.mask);
    CHECK(back.track() == (coils == 1 ? Track::SingleCoil : Track::MultiCoil));
  }
}

TEST_CASE("test-style round trip keeps the mask and its provenance") {
  const auto dir = oracle::scratch("dataio-test");
  const auto r = test_record(3, 99);
  write_volume(r, dir / "t.h5");
  const auto back = read_volume<float>(dir / "t.h5", Track::MultiCoil);
  CHECK(back.kspace == r.kspace);
  REQUIRE(back.mask);
  CHECK(back.mask->keep == r.mask->keep);
  CHECK(back.mask->seed == 99);
  CHECK(back.mask->kind == MaskKind::Random);
  CHECK(back.mask->center_fraction == 0.125);
  CHECK(back.mask->acceleration_nominal == 4);
  CHECK(back.mask->num_low_frequency == 4);
  CHECK(back.attributes.acceleration == 4);
  CHECK(!back.reconstruction_rss);
}

TEST_CASE("double precision round trip") {
  const auto dir = oracle::scratch("dataio-double");
  VolumeRecord<double> r;
  std::mt19937_64 g(3);
  r.kspace = KSpaceVolume<double>(1, 2, 6, 6);
  for (Index c = 0; c < 2; ++c) r.kspace.plane(0, c) = oracle::random_plane(6, 6, g);
  RealVolume<double> gt(1, 6, 6);
  gt.slice(0) = oracle::random_real_plane(6, 6, g);
  r.reconstruction_rss = gt;
  set_target_statistics(r);
  write_volume(r, dir / "d.h5");
  const auto back = read_volume<double>(dir / "d.h5");
  CHECK(back.kspace == r.kspace);
  CHECK(*back.reconstruction_rss == gt);
}

TEST_CASE("invariant violations are rejected at write") {
  const auto dir = oracle::scratch("dataio-invariants");
  auto r = train_record(4, 5);
  *r.attributes.norm *= 1.01;
  CHECK(code_of([&] { write_volume(r, dir / "a.h5"); }) == ErrorCode::InvariantViolation);
  CHECK(!std::filesystem::exists(dir / "a.h5"));

  r = train_record(4, 5);
  *r.attributes.norm *= 1.0 + 1e-8;
  CHECK_NOTHROW(write_volume(r, dir / "tiny.h5"));

  auto t = test_record(2, 6);
  t.reconstruction_rss = random_real(1, 8, 8, 7);
  CHECK(code_of([&] { write_volume(t, dir / "b.h5"); }) == ErrorCode::InvariantViolation);

  t = test_record(2, 6);
  t.attributes.num_low_frequency = 7;
  CHECK(code_of([&] { write_volume(t, dir / "c.h5"); }) == ErrorCode::InvariantViolation);

  auto nan = train_record(1, 8);
  nan.kspace.tensor().data()[3] = std::complex<float>(std::nanf(""), 0.0f);
  CHECK(code_of([&] { write_volume(nan, dir / "d.h5"); }) == ErrorCode::InvariantViolation);

  VolumeRecord<float> bare;
  bare.kspace = random_kspace(1, 2, 4, 4, 9);
  CHECK(!check_record(bare).empty());
}

TEST_CASE("read errors") {
  const auto dir = oracle::scratch("dataio-errors");
  CHECK(code_of([&] { read_volume<float>(dir / "missing.h5"); }) == ErrorCode::Io);

  {
    const hid_t f = H5Fcreate((dir / "nokspace.h5").c_str(), H5F_ACC_TRUNC, H5P_DEFAULT, H5P_DEFAULT);
    const hsize_t dims[1] = {4};
    const hid_t space = H5Screate_simple(1, dims, nullptr);
    const hid_t ds = H5Dcreate2(f, "mask", H5T_STD_U8LE, space, H5P_DEFAULT, H5P_DEFAULT, H5P_DEFAULT);
    H5Dclose(ds);
    H5Sclose(space);
    H5Fclose(f);
  }
  try {
    read_volume<float>(dir / "nokspace.h5");
    FAIL("expected MissingDataset");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingDataset);
    CHECK(std::string(e.what()).find("kspace") != std::string::npos);
  }

  write_volume(train_record(1, 11), dir / "single.h5");
  CHECK(code_of([&] { read_volume<float>(dir / "single.h5", Track::MultiCoil); }) == ErrorCode::ShapeMismatch);
  write_volume(train_record(3, 12), dir / "multi.h5");
  CHECK(code_of([&] { read_volume<float>(dir / "multi.h5", Track::SingleCoil); }) == ErrorCode::ShapeMismatch);

  const auto bytes = slurp(dir / "multi.h5");
  std::ofstream(dir / "trunc.h5", std::ios::binary).write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
  CHECK(code_of([&] { read_volume<float>(dir / "trunc.h5"); }) == ErrorCode::ContainerFormat);
  std::ofstream(dir / "text.h5") << "not a container";
  CHECK(code_of([&] { read_volume<float>(dir / "text.h5"); }) == ErrorCode::ContainerFormat);
}

TEST_CASE("reconstruction files") {
  const auto dir = oracle::scratch("dataio-recon");
  const auto v = random_real(3, 5, 7, 13);
  write_reconstruction(v, dir / "r.h5");
  CHECK(read_reconstruction<float>(dir / "r.h5") == v);
  CHECK(read_reconstruction<double>(dir / "r.h5").values().isApprox(v.values().cast<double>(), 0.0));
}

TEST_CASE("CFL header and byte layout") {
  const auto dir = oracle::scratch("dataio-cfl");
  ComplexTensor<float> k(Shape{1, 640, 368, 15});
  write_cfl(k, dir / "kspace");
  CHECK(slurp(dir / "kspace.hdr") == "# Dimensions\n1 640 368 15\n");
  CHECK(std::filesystem::file_size(dir / "kspace.cfl") == 640u * 368u * 15u * 8u);

  ComplexTensor<float> t(Shape{2, 2});
  t.data() << std::complex<float>(1, 2), std::complex<float>(3, 4), std::complex<float>(5, 6), std::complex<float>(7, 8);
  write_cfl(t, dir / "small");
  const auto raw = slurp(dir / "small.cfl");
  REQUIRE(raw.size() == 32);
  const float expect[8] = {1, 2, 5, 6, 3, 4, 7, 8};
  for (int i = 0; i < 8; ++i) {
    unsigned char le[4];
    std::memcpy(le, raw.data() + 4 * i, 4);
    const std::uint32_t bits = le[0] | (le[1] << 8) | (le[2] << 16) | (static_cast<std::uint32_t>(le[3]) << 24);
    float f;
    std::memcpy(&f, &bits, 4);
    CHECK(f == expect[i]);
  }
  CHECK(read_cfl<float>(dir / "small") == t);
}

TEST_CASE("CFL round trip rewrites identical bytes") {
  const auto dir = oracle::scratch("dataio-cfl-rt");
  std::mt19937_64 g(14);
  ComplexTensor<float> t(Shape{3, 4, 5});
  for (Index i = 0; i < t.size(); ++i) {
    const auto p = oracle::random_plane(1, 1, g);
    t.data()[i] = std::complex<float>(p(0, 0));
  }
  write_cfl(t, dir / "a");
  const auto back = read_cfl<float>(dir / "a");
  CHECK(back == t);
  write_cfl(back, dir / "b");
  CHECK(slurp(dir / "a.cfl") == slurp(dir / "b.cfl"));
  CHECK(slurp(dir / "a.hdr") == slurp(dir / "b.hdr"));

  std::filesystem::resize_file(dir / "b.cfl", 40);
  CHECK(code_of([&] { read_cfl<float>(dir / "b"); }) == ErrorCode::SizeMismatch);
}

TEST_CASE("split manifests") {
  std::vector<std::string> ids;
  for (int i = 0; i < 1000; ++i) ids.push_back("vol" + std::to_string(i));

  const auto all_train = build_split(std::vector<std::string>(ids.begin(), ids.begin() + 10), {1, 0, 0}, 1);
  for (const auto& e : all_train.entries) CHECK(e.split == Split::Train);

  const auto m = build_split(ids, {0.7, 0.15, 0.15}, 42);
  std::map<Split, int> counts;
  std::map<int, int> accels;
  for (const auto& e : m.entries) {
    ++counts[e.split];
    ++accels[e.policy.acceleration];
    CHECK(e.policy.center_fraction == (e.policy.acceleration == 4 ? 0.08 : 0.04));
    CHECK(e.seed == stable_hash(42, e.id));
  }
  CHECK(std::abs(counts[Split::Train] - 700) <= 1);
  CHECK(std::abs(counts[Split::Validation] - 150) <= 1);
  CHECK(std::abs(counts[Split::Test] - 150) <= 1);
  CHECK(accels[4] + accels[8] == 1000);
  CHECK(accels[4] > 400);
  CHECK(accels[8] > 400);

  const auto again = build_split(ids, {0.7, 0.15, 0.15}, 42);
  REQUIRE(again.entries.size() == m.entries.size());
  for (std::size_t i = 0; i < m.entries.size(); ++i) {
    CHECK(again.entries[i].id == m.entries[i].id);
    CHECK(again.entries[i].split == m.entries[i].split);
    CHECK(again.entries[i].policy.acceleration == m.entries[i].policy.acceleration);
  }
  const auto other = build_split(ids, {0.7, 0.15, 0.15}, 43);
  int moved = 0;
  for (const auto& e : other.entries) moved += e.split != m.find(e.id)->split;
  CHECK(moved > 0);

  ids.push_back("vol3");
  CHECK(code_of([&] { build_split(ids, {0.7, 0.15, 0.15}, 1); }) == ErrorCode::DuplicateId);
  ids.pop_back();
  CHECK(code_of([&] { build_split(ids, {0.5, 0.2, 0.2}, 1); }) == ErrorCode::InvalidArgument);

  const auto dir = oracle::scratch("dataio-split");
  write_manifest(m, dir / "manifest.jsonl");
  const auto read = read_manifest(dir / "manifest.jsonl");
  REQUIRE(read.entries.size() == m.entries.size());
  for (std::size_t i = 0; i < m.entries.size(); ++i) {
    CHECK(read.entries[i].id == m.entries[i].id);
    CHECK(read.entries[i].seed == m.entries[i].seed);
    CHECK(read.entries[i].policy.kind == m.entries[i].policy.kind);
  }
  write_manifest(read, dir / "again.jsonl");
  CHECK(slurp(dir / "manifest.jsonl") == slurp(dir / "again.jsonl"));
  CHECK(m.find("nope") == nullptr);
}
