#include "mrbench/dataio.hpp"

#include <hdf5.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <sstream>

namespace mrbench {

namespace {

/// Owning HDF5 identifier.
class Handle {
 public:
  using Closer = herr_t (*)(hid_t);

  Handle(hid_t id, Closer close) : id_(id), close_(close) {}
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  Handle(Handle&& o) noexcept : id_(o.id_), close_(o.close_) { o.id_ = -1; }
  ~Handle() {
    if (id_ >= 0) close_(id_);
  }

  hid_t get() const { return id_; }
  bool valid() const { return id_ >= 0; }

 private:
  hid_t id_;
  Closer close_;
};

// The system HDF5 library is not built thread-safe; every entry point that
// touches it holds this lock.
std::recursive_mutex& hdf5_mutex() {
  static std::recursive_mutex m;
  return m;
}

void silence_hdf5() {
  static std::once_flag once;
  std::call_once(once, [] { H5Eset_auto2(H5E_DEFAULT, nullptr, nullptr); });
}

std::string context(const std::filesystem::path& path, const std::string& what) {
  return path.string() + ": " + what;
}

template <typename T>
hid_t memory_type() {
  return std::is_same_v<T, float> ? H5T_NATIVE_FLOAT : H5T_NATIVE_DOUBLE;
}

template <typename T>
hid_t file_type() {
  return std::is_same_v<T, float> ? H5T_IEEE_F32LE : H5T_IEEE_F64LE;
}

template <typename T>
std::string complex_encoding() {
  return std::string(std::is_same_v<T, float> ? "float32" : "float64") +
         " (real, imag) pairs on the innermost axis";
}

Handle create_dataset(hid_t parent, const std::string& name, const std::vector<hsize_t>& dims,
                      hid_t ftype, hid_t mtype, const void* data, const std::filesystem::path& path) {
  Handle space(H5Screate_simple(static_cast<int>(dims.size()), dims.data(), nullptr), H5Sclose);
  Handle ds(H5Dcreate2(parent, name.c_str(), ftype, space.get(), H5P_DEFAULT, H5P_DEFAULT, H5P_DEFAULT),
            H5Dclose);
  if (!ds.valid() || H5Dwrite(ds.get(), mtype, H5S_ALL, H5S_ALL, H5P_DEFAULT, data) < 0) {
    throw Error(ErrorCode::Io, context(path, "failed to write dataset " + name));
  }
  return ds;
}

void write_string_attr(hid_t obj, const std::string& name, const std::string& value) {
  Handle type(H5Tcopy(H5T_C_S1), H5Tclose);
  H5Tset_size(type.get(), std::max<std::size_t>(value.size(), 1));
  H5Tset_strpad(type.get(), H5T_STR_NULLPAD);
  Handle space(H5Screate(H5S_SCALAR), H5Sclose);
  Handle attr(H5Acreate2(obj, name.c_str(), type.get(), space.get(), H5P_DEFAULT, H5P_DEFAULT), H5Aclose);
  std::string padded = value.empty() ? std::string(1, '\0') : value;
  if (!attr.valid() || H5Awrite(attr.get(), type.get(), padded.data()) < 0) {
    throw Error(ErrorCode::Io, "failed to write attribute " + name);
  }
}

template <typename V>
void write_scalar_attr(hid_t obj, const std::string& name, V value) {
  const hid_t ftype = std::is_floating_point_v<V> ? H5T_IEEE_F64LE : H5T_STD_I64LE;
  const hid_t mtype = std::is_floating_point_v<V> ? H5T_NATIVE_DOUBLE : H5T_NATIVE_INT64;
  Handle space(H5Screate(H5S_SCALAR), H5Sclose);
  Handle attr(H5Acreate2(obj, name.c_str(), ftype, space.get(), H5P_DEFAULT, H5P_DEFAULT), H5Aclose);
  if (!attr.valid() || H5Awrite(attr.get(), mtype, &value) < 0) {
    throw Error(ErrorCode::Io, "failed to write attribute " + name);
  }
}

std::optional<Handle> open_attr(hid_t obj, const std::string& name) {
  if (H5Aexists(obj, name.c_str()) <= 0) return std::nullopt;
  return Handle(H5Aopen(obj, name.c_str(), H5P_DEFAULT), H5Aclose);
}

std::optional<std::string> read_string_attr(hid_t obj, const std::string& name) {
  auto attr = open_attr(obj, name);
  if (!attr) return std::nullopt;
  Handle type(H5Aget_type(attr->get()), H5Tclose);
  if (H5Tget_class(type.get()) != H5T_STRING) {
    throw Error(ErrorCode::AttributeType, "attribute " + name + " is not a string");
  }
  if (H5Tis_variable_str(type.get()) > 0) {
    Handle mem(H5Tcopy(H5T_C_S1), H5Tclose);
    H5Tset_size(mem.get(), H5T_VARIABLE);
    char* buf = nullptr;
    if (H5Aread(attr->get(), mem.get(), &buf) < 0) {
      throw Error(ErrorCode::AttributeType, "unreadable string attribute " + name);
    }
    std::string out = buf ? buf : "";
    H5free_memory(buf);
    return out;
  }
  const std::size_t n = H5Tget_size(type.get());
  std::string out(n, '\0');
  if (H5Aread(attr->get(), type.get(), out.data()) < 0) {
    throw Error(ErrorCode::AttributeType, "unreadable string attribute " + name);
  }
  out.erase(std::find(out.begin(), out.end(), '\0'), out.end());
  return out;
}

std::optional<double> read_double_attr(hid_t obj, const std::string& name) {
  auto attr = open_attr(obj, name);
  if (!attr) return std::nullopt;
  Handle type(H5Aget_type(attr->get()), H5Tclose);
  const auto cls = H5Tget_class(type.get());
  if (cls != H5T_FLOAT && cls != H5T_INTEGER) {
    throw Error(ErrorCode::AttributeType, "attribute " + name + " is not numeric");
  }
  double v = 0.0;
  if (H5Aread(attr->get(), H5T_NATIVE_DOUBLE, &v) < 0) {
    throw Error(ErrorCode::AttributeType, "unreadable attribute " + name);
  }
  return v;
}

std::optional<std::int64_t> read_int_attr(hid_t obj, const std::string& name) {
  auto attr = open_attr(obj, name);
  if (!attr) return std::nullopt;
  Handle type(H5Aget_type(attr->get()), H5Tclose);
  if (H5Tget_class(type.get()) != H5T_INTEGER) {
    throw Error(ErrorCode::AttributeType, "attribute " + name + " is not an integer");
  }
  std::int64_t v = 0;
  if (H5Aread(attr->get(), H5T_NATIVE_INT64, &v) < 0) {
    throw Error(ErrorCode::AttributeType, "unreadable attribute " + name);
  }
  return v;
}

bool has_dataset(hid_t file, const std::string& name) {
  return H5Lexists(file, name.c_str(), H5P_DEFAULT) > 0;
}

Handle open_dataset(hid_t file, const std::string& name, const std::filesystem::path& path) {
  if (!has_dataset(file, name)) {
    throw Error(ErrorCode::MissingDataset, context(path, "missing dataset '" + name + "'"));
  }
  Handle ds(H5Dopen2(file, name.c_str(), H5P_DEFAULT), H5Dclose);
  if (!ds.valid()) throw Error(ErrorCode::ContainerFormat, context(path, "cannot open " + name));
  return ds;
}

std::vector<hsize_t> dataset_dims(hid_t ds) {
  Handle space(H5Dget_space(ds), H5Sclose);
  const int rank = H5Sget_simple_extent_ndims(space.get());
  std::vector<hsize_t> dims(static_cast<std::size_t>(std::max(rank, 0)));
  H5Sget_simple_extent_dims(space.get(), dims.data(), nullptr);
  return dims;
}

Shape to_shape(const std::vector<hsize_t>& dims) { return Shape(dims.begin(), dims.end()); }

template <typename T>
void write_complex(hid_t file, const std::string& name, const ComplexTensor<T>& t, bool drop_coil_axis,
                   const std::filesystem::path& path) {
  std::vector<hsize_t> dims;
  for (Index a = 0; a < t.rank(); ++a) {
    if (drop_coil_axis && a == 1) continue;
    dims.push_back(static_cast<hsize_t>(t.extent(a)));
  }
  dims.push_back(2);
  Handle ds = create_dataset(file, name, dims, file_type<T>(), memory_type<T>(), t.data().data(), path);
  write_string_attr(ds.get(), "complex_encoding", complex_encoding<T>());
}

template <typename T>
ComplexTensor<T> read_complex(hid_t file, const std::string& name, const std::filesystem::path& path) {
  Handle ds = open_dataset(file, name, path);
  auto dims = dataset_dims(ds.get());
  Handle type(H5Dget_type(ds.get()), H5Tclose);
  const auto cls = H5Tget_class(type.get());
  if (cls == H5T_COMPOUND) {
    // interleaved {r, i} compound, as written by h5py for complex arrays
    if (H5Tget_nmembers(type.get()) != 2) {
      throw Error(ErrorCode::ContainerFormat, context(path, name + " has an unsupported compound type"));
    }
    Handle mem(H5Tcreate(H5T_COMPOUND, 2 * sizeof(T)), H5Tclose);
    char* n0 = H5Tget_member_name(type.get(), 0);
    char* n1 = H5Tget_member_name(type.get(), 1);
    H5Tinsert(mem.get(), n0, 0, memory_type<T>());
    H5Tinsert(mem.get(), n1, sizeof(T), memory_type<T>());
    H5free_memory(n0);
    H5free_memory(n1);
    ComplexTensor<T> t(to_shape(dims));
    if (H5Dread(ds.get(), mem.get(), H5S_ALL, H5S_ALL, H5P_DEFAULT, t.data().data()) < 0) {
      throw Error(ErrorCode::ContainerFormat, context(path, "failed to read " + name));
    }
    return t;
  }
  if (cls != H5T_FLOAT || dims.empty() || dims.back() != 2) {
    throw Error(ErrorCode::ContainerFormat,
                context(path, name + " is not a complex array (expected a trailing axis of 2)"));
  }
  dims.pop_back();
  ComplexTensor<T> t(to_shape(dims));
  if (H5Dread(ds.get(), memory_type<T>(), H5S_ALL, H5S_ALL, H5P_DEFAULT, t.data().data()) < 0) {
    throw Error(ErrorCode::ContainerFormat, context(path, "failed to read " + name));
  }
  return t;
}

template <typename T>
void write_real(hid_t file, const std::string& name, const RealVolume<T>& v,
                const std::filesystem::path& path) {
  const std::vector<hsize_t> dims{static_cast<hsize_t>(v.slices()), static_cast<hsize_t>(v.height()),
                                  static_cast<hsize_t>(v.width())};
  create_dataset(file, name, dims, file_type<T>(), memory_type<T>(), v.values().data(), path);
}

template <typename T>
RealVolume<T> read_real(hid_t file, const std::string& name, const std::filesystem::path& path) {
  Handle ds = open_dataset(file, name, path);
  const auto dims = dataset_dims(ds.get());
  if (dims.size() != 3) {
    throw Error(ErrorCode::ShapeMismatch,
                context(path, name + " must be (slices, height, width), got " + shape_string(to_shape(dims))));
  }
  Handle type(H5Dget_type(ds.get()), H5Tclose);
  if (H5Tget_class(type.get()) != H5T_FLOAT) {
    throw Error(ErrorCode::ContainerFormat, context(path, name + " is not a real floating-point array"));
  }
  RealTensor<T> t(to_shape(dims));
  if (H5Dread(ds.get(), memory_type<T>(), H5S_ALL, H5S_ALL, H5P_DEFAULT, t.data().data()) < 0) {
    throw Error(ErrorCode::ContainerFormat, context(path, "failed to read " + name));
  }
  return RealVolume<T>(std::move(t));
}

Handle open_file(const std::filesystem::path& path) {
  silence_hdf5();
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorCode::Io, context(path, "no such file"));
  }
  if (H5Fis_hdf5(path.c_str()) <= 0) {
    throw Error(ErrorCode::ContainerFormat, context(path, "not a readable HDF5 container"));
  }
  Handle file(H5Fopen(path.c_str(), H5F_ACC_RDONLY, H5P_DEFAULT), H5Fclose);
  if (!file.valid()) throw Error(ErrorCode::ContainerFormat, context(path, "cannot open container"));
  return file;
}

Handle create_file(const std::filesystem::path& path) {
  silence_hdf5();
  Handle file(H5Fcreate(path.c_str(), H5F_ACC_TRUNC, H5P_DEFAULT, H5P_DEFAULT), H5Fclose);
  if (!file.valid()) throw Error(ErrorCode::Io, context(path, "cannot create container"));
  return file;
}

bool close_to(double a, double b) {
  return std::abs(a - b) <= kAttributeTolerance * std::max(std::abs(b), 1e-300);
}

}  // namespace

template <typename T>
std::vector<Violation> check_record(const VolumeRecord<T>& r) {
  std::vector<Violation> out = validate_volume(r.kspace);
  const auto& a = r.attributes;
  const Index slices = r.kspace.slices();
  for (const auto* gt : {&r.reconstruction_rss, &r.reconstruction_esc}) {
    if (*gt && (*gt)->slices() != slices) {
      out.push_back({"ground-truth slice count differs from k-space", std::nullopt});
    }
  }
  if (r.mask) {
    if (r.reconstruction_rss || r.reconstruction_esc) {
      out.push_back({"test-style record (mask present) must not carry ground truths", std::nullopt});
    }
    if (r.mask->width() != r.kspace.width()) {
      out.push_back({"mask length differs from k-space width", std::nullopt});
    }
    if (!a.acceleration) out.push_back({"test-style record needs acceleration", std::nullopt});
    if (!a.num_low_frequency) {
      out.push_back({"test-style record needs num_low_frequency", std::nullopt});
    } else if (*a.num_low_frequency != r.mask->num_low_frequency) {
      out.push_back({"num_low_frequency attribute disagrees with the mask", std::nullopt});
    }
    if (a.norm || a.max) out.push_back({"norm/max are only stored for train/validation records", std::nullopt});
    return out;
  }
  if (a.acceleration || a.num_low_frequency) {
    out.push_back({"acceleration/num_low_frequency are only stored for test records", std::nullopt});
  }
  const auto& target = r.target();
  if (!target) {
    out.push_back({std::string("train/validation record needs ") +
                       (r.track() == Track::SingleCoil ? "reconstruction_esc" : "reconstruction_rss"),
                   std::nullopt});
    return out;
  }
  const double norm = std::sqrt(target->values().template cast<double>().square().sum());
  const double max = static_cast<double>(target->values().maxCoeff());
  if (!a.norm) {
    out.push_back({"missing norm attribute", std::nullopt});
  } else if (!close_to(*a.norm, norm)) {
    out.push_back({"norm attribute " + std::to_string(*a.norm) + " != target norm " + std::to_string(norm),
                   std::nullopt});
  }
  if (!a.max) {
    out.push_back({"missing max attribute", std::nullopt});
  } else if (!close_to(*a.max, max)) {
    out.push_back({"max attribute " + std::to_string(*a.max) + " != target max " + std::to_string(max),
                   std::nullopt});
  }
  return out;
}

template <typename T>
void set_target_statistics(VolumeRecord<T>& r) {
  const auto& target = r.target();
  if (!target) throw Error(ErrorCode::InvariantViolation, "record has no target volume");
  r.attributes.norm = std::sqrt(target->values().template cast<double>().square().sum());
  r.attributes.max = static_cast<double>(target->values().maxCoeff());
}

template <typename T>
void write_volume(const VolumeRecord<T>& r, const std::filesystem::path& path) {
  std::lock_guard lock(hdf5_mutex());
  const auto violations = check_record(r);
  if (!violations.empty()) {
    std::string msg = "record violates container invariants:";
    for (const auto& v : violations) msg += "\n  " + v.message;
    throw Error(ErrorCode::InvariantViolation, context(path, msg));
  }
  Handle file = create_file(path);
  const hid_t f = file.get();
  write_complex(f, "kspace", r.kspace.tensor(), r.track() == Track::SingleCoil, path);
  if (r.reconstruction_rss) write_real(f, "reconstruction_rss", *r.reconstruction_rss, path);
  if (r.reconstruction_esc) write_real(f, "reconstruction_esc", *r.reconstruction_esc, path);
  if (r.mask) {
    std::vector<std::uint8_t> bits(r.mask->keep.begin(), r.mask->keep.end());
    Handle ds = create_dataset(f, "mask", {static_cast<hsize_t>(bits.size())}, H5T_STD_U8LE,
                               H5T_NATIVE_UINT8, bits.data(), path);
    write_string_attr(ds.get(), "kind", to_string(r.mask->kind));
    write_scalar_attr(ds.get(), "center_fraction", r.mask->center_fraction);
    write_scalar_attr(ds.get(), "seed", static_cast<std::int64_t>(r.mask->seed));
    write_scalar_attr(ds.get(), "acceleration", static_cast<std::int64_t>(r.mask->acceleration_nominal));
  }
  const auto& a = r.attributes;
  write_string_attr(f, "acquisition", a.acquisition);
  write_string_attr(f, "patient_id", a.patient_id);
  if (a.norm) write_scalar_attr(f, "norm", *a.norm);
  if (a.max) write_scalar_attr(f, "max", *a.max);
  if (a.acceleration) write_scalar_attr(f, "acceleration", *a.acceleration);
  if (a.num_low_frequency) write_scalar_attr(f, "num_low_frequency", *a.num_low_frequency);
  if (a.ismrmrd_header) write_string_attr(f, "ismrmrd_header", *a.ismrmrd_header);
  if (H5Fflush(f, H5F_SCOPE_GLOBAL) < 0) throw Error(ErrorCode::Io, context(path, "flush failed"));
}

template <typename T>
VolumeRecord<T> read_volume(const std::filesystem::path& path, std::optional<Track> expected) {
  std::lock_guard lock(hdf5_mutex());
  Handle file = open_file(path);
  const hid_t f = file.get();
  VolumeRecord<T> r;

  ComplexTensor<T> k = read_complex<T>(f, "kspace", path);
  Track track;
  if (k.rank() == 3) {
    track = Track::SingleCoil;
    k = ComplexTensor<T>(Shape{k.extent(0), 1, k.extent(1), k.extent(2)}, std::move(k.data()));
  } else if (k.rank() == 4) {
    track = Track::MultiCoil;
  } else {
    throw Error(ErrorCode::ShapeMismatch,
                context(path, "kspace must be rank 3 or 4, got " + shape_string(k.shape())));
  }
  if (expected && *expected != track) {
    throw Error(ErrorCode::ShapeMismatch, context(path, "expected a " + to_string(*expected) +
                                                            " file, found " + to_string(track) + " kspace " +
                                                            shape_string(k.shape())));
  }

  try {
    auto& a = r.attributes;
    a.acquisition = read_string_attr(f, "acquisition").value_or("SYNTHETIC");
    a.patient_id = read_string_attr(f, "patient_id").value_or("");
    a.norm = read_double_attr(f, "norm");
    a.max = read_double_attr(f, "max");
    a.acceleration = read_int_attr(f, "acceleration");
    a.num_low_frequency = read_int_attr(f, "num_low_frequency");
    a.ismrmrd_header = read_string_attr(f, "ismrmrd_header");
  } catch (const Error& e) {
    throw Error(e.code(), context(path, e.what()));
  }

  Acquisition label = Acquisition::Synthetic;
  try {
    label = acquisition_from_string(r.attributes.acquisition);
  } catch (const Error&) {
    // unrecognised protocol names are kept verbatim in the attribute
  }
  r.kspace = KSpaceVolume<T>(std::move(k), label);

  if (has_dataset(f, "reconstruction_rss")) r.reconstruction_rss = read_real<T>(f, "reconstruction_rss", path);
  if (has_dataset(f, "reconstruction_esc")) r.reconstruction_esc = read_real<T>(f, "reconstruction_esc", path);
  if (has_dataset(f, "mask")) {
    Handle ds = open_dataset(f, "mask", path);
    const auto dims = dataset_dims(ds.get());
    hsize_t n = 1;
    for (auto d : dims) n *= d;
    if (static_cast<Index>(n) != r.kspace.width()) {
      throw Error(ErrorCode::ShapeMismatch, context(path, "mask has " + std::to_string(n) +
                                                              " elements, k-space width is " +
                                                              std::to_string(r.kspace.width())));
    }
    std::vector<std::uint8_t> bits(n);
    if (H5Dread(ds.get(), H5T_NATIVE_UINT8, H5S_ALL, H5S_ALL, H5P_DEFAULT, bits.data()) < 0) {
      throw Error(ErrorCode::ContainerFormat, context(path, "unreadable mask"));
    }
    SamplingMask m;
    m.keep.resize(bits.size());
    for (std::size_t j = 0; j < bits.size(); ++j) m.keep[j] = bits[j] != 0;
    m.kind = mask_kind_from_string(read_string_attr(ds.get(), "kind").value_or("random"));
    m.center_fraction = read_double_attr(ds.get(), "center_fraction").value_or(0.0);
    m.seed = static_cast<std::uint64_t>(read_int_attr(ds.get(), "seed").value_or(0));
    m.acceleration_nominal = static_cast<int>(
        read_int_attr(ds.get(), "acceleration").value_or(r.attributes.acceleration.value_or(1)));
    m.num_low_frequency = r.attributes.num_low_frequency.value_or(0);
    r.mask = std::move(m);
  }

  const auto violations = check_record(r);
  if (!violations.empty()) {
    std::string msg = "invalid record:";
    for (const auto& v : violations) msg += "\n  " + v.message;
    throw Error(ErrorCode::InvariantViolation, context(path, msg));
  }
  return r;
}

template <typename T>
void write_reconstruction(const RealVolume<T>& v, const std::filesystem::path& path) {
  std::lock_guard lock(hdf5_mutex());
  Handle file = create_file(path);
  write_real(file.get(), "reconstruction", v, path);
}

template <typename T>
RealVolume<T> read_reconstruction(const std::filesystem::path& path) {
  std::lock_guard lock(hdf5_mutex());
  Handle file = open_file(path);
  return read_real<T>(file.get(), "reconstruction", path);
}

#define MRBENCH_INSTANTIATE(T)                                                                     \
  template std::vector<Violation> check_record<T>(const VolumeRecord<T>&);                         \
  template void set_target_statistics<T>(VolumeRecord<T>&);                                        \
  template void write_volume<T>(const VolumeRecord<T>&, const std::filesystem::path&);             \
  template VolumeRecord<T> read_volume<T>(const std::filesystem::path&, std::optional<Track>);     \
  template void write_reconstruction<T>(const RealVolume<T>&, const std::filesystem::path&);       \
  template RealVolume<T> read_reconstruction<T>(const std::filesystem::path&);

MRBENCH_INSTANTIATE(float)
MRBENCH_INSTANTIATE(double)

#undef MRBENCH_INSTANTIATE

}  // namespace mrbench
