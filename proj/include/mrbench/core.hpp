#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mrbench {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

enum class ErrorCode {
  InvalidArgument,
  ShapeMismatch,
  DimensionTooSmall,
  InvalidBitmask,
  InfeasiblePolicy,
  TooManyLevels,
  MalformedPyramid,
  NegativeThreshold,
  TooFewCalibrationLines,
  ZeroReference,
  TooSmallImage,
  Divergence,
  MissingDataset,
  AttributeType,
  ContainerFormat,
  InvariantViolation,
  SizeMismatch,
  DuplicateId,
  Io,
};

/// Exception carried by every fallible operation in the toolkit.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

template <typename T>
using Complex = std::complex<T>;

template <typename Elem>
using PlaneOf = Eigen::Array<Elem, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// One complex 2-D plane (height x width), row-major.
template <typename T>
using Plane = PlaneOf<Complex<T>>;

template <typename T>
using RealPlane = PlaneOf<T>;

inline Index shape_product(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
  std::string out = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(shape[i]);
  }
  return out + ")";
}

/// Dense row-major n-d array. The last two axes are always (height, width).
template <typename Elem>
class Tensor {
 public:
  using Element = Elem;
  using Storage = Eigen::Array<Elem, Eigen::Dynamic, 1>;
  using PlaneMap = Eigen::Map<PlaneOf<Elem>>;
  using ConstPlaneMap = Eigen::Map<const PlaneOf<Elem>>;

  Tensor() = default;

  explicit Tensor(Shape shape) : shape_(std::move(shape)) {
    check_extents();
    data_ = Storage::Zero(shape_product(shape_));
  }

  Tensor(Shape shape, Storage data) : shape_(std::move(shape)), data_(std::move(data)) {
    check_extents();
    if (shape_product(shape_) != data_.size()) {
      throw Error(ErrorCode::ShapeMismatch,
                  "tensor shape " + shape_string(shape_) + " does not match " +
                      std::to_string(data_.size()) + " samples");
    }
  }

  const Shape& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index extent(Index axis) const { return shape_.at(static_cast<std::size_t>(axis)); }
  Index size() const { return data_.size(); }

  Storage& data() { return data_; }
  const Storage& data() const { return data_; }

  Index height() const { return extent(rank() - 2); }
  Index width() const { return extent(rank() - 1); }
  Index plane_size() const { return height() * width(); }
  Index plane_count() const { return plane_size() == 0 ? 0 : size() / plane_size(); }

  PlaneMap plane(Index p) {
    return PlaneMap(data_.data() + p * plane_size(), height(), width());
  }
  ConstPlaneMap plane(Index p) const {
    return ConstPlaneMap(data_.data() + p * plane_size(), height(), width());
  }

  bool all_finite() const {
    return std::all_of(data_.data(), data_.data() + data_.size(), [](const Elem& v) {
      return std::isfinite(std::real(v)) && std::isfinite(std::imag(v));
    });
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && (a.data_ == b.data_).all();
  }

 private:
  void check_extents() const {
    for (Index e : shape_) {
      if (e < 0) throw Error(ErrorCode::InvalidArgument, "negative tensor extent");
    }
  }

  Shape shape_;
  Storage data_;
};

template <typename T>
using ComplexTensor = Tensor<Complex<T>>;

template <typename T>
using RealTensor = Tensor<T>;

enum class Acquisition { PD, PDFS, AXT1, AXT1POST, AXT2, AXFLAIR, Synthetic };

inline std::string to_string(Acquisition a) {
  switch (a) {
    case Acquisition::PD: return "PD";
    case Acquisition::PDFS: return "PDFS";
    case Acquisition::AXT1: return "AXT1";
    case Acquisition::AXT1POST: return "AXT1POST";
    case Acquisition::AXT2: return "AXT2";
    case Acquisition::AXFLAIR: return "AXFLAIR";
    case Acquisition::Synthetic: return "SYNTHETIC";
  }
  return "SYNTHETIC";
}

inline Acquisition acquisition_from_string(const std::string& s) {
  for (auto a : {Acquisition::PD, Acquisition::PDFS, Acquisition::AXT1, Acquisition::AXT1POST,
                 Acquisition::AXT2, Acquisition::AXFLAIR, Acquisition::Synthetic}) {
    if (to_string(a) == s) return a;
  }
  // knee files label the protocol with a CORPD / CORPDFS prefix
  if (s == "CORPD" || s == "CORPD_FBK") return Acquisition::PD;
  if (s == "CORPDFS" || s == "CORPDFS_FBK") return Acquisition::PDFS;
  throw Error(ErrorCode::InvalidArgument, "unknown acquisition label '" + s + "'");
}

struct KSpaceDomain {};
struct ImageDomain {};

/// Complex (slice, coil, height, width) stack. Single-coil data keeps a coil
/// axis of extent 1.
template <typename T, typename Domain>
class CoilStack {
 public:
  using Scalar = T;

  CoilStack() = default;

  CoilStack(Index slices, Index coils, Index height, Index width,
            Acquisition label = Acquisition::Synthetic)
      : tensor_(Shape{slices, coils, height, width}), label_(label) {}

  explicit CoilStack(ComplexTensor<T> tensor, Acquisition label = Acquisition::Synthetic)
      : tensor_(std::move(tensor)), label_(label) {
    if (tensor_.rank() != 4) {
      throw Error(ErrorCode::ShapeMismatch,
                  "coil stack requires (slice, coil, height, width), got " +
                      shape_string(tensor_.shape()));
    }
  }

  const ComplexTensor<T>& tensor() const { return tensor_; }
  ComplexTensor<T>& tensor() { return tensor_; }

  Index slices() const { return tensor_.extent(0); }
  Index coils() const { return tensor_.extent(1); }
  Index height() const { return tensor_.extent(2); }
  Index width() const { return tensor_.extent(3); }

  Acquisition acquisition() const { return label_; }
  void set_acquisition(Acquisition a) { label_ = a; }

  auto plane(Index slice, Index coil) { return tensor_.plane(slice * coils() + coil); }
  auto plane(Index slice, Index coil) const { return tensor_.plane(slice * coils() + coil); }

  friend bool operator==(const CoilStack& a, const CoilStack& b) {
    return a.tensor_ == b.tensor_;
  }

 private:
  ComplexTensor<T> tensor_;
  Acquisition label_ = Acquisition::Synthetic;
};

template <typename T>
using KSpaceVolume = CoilStack<T, KSpaceDomain>;

template <typename T>
using ImageVolume = CoilStack<T, ImageDomain>;

/// Real (slice, height, width) volume; reconstructions and ground truths.
template <typename T>
class RealVolume {
 public:
  using Scalar = T;

  RealVolume() = default;
  RealVolume(Index slices, Index height, Index width)
      : tensor_(Shape{slices, height, width}) {}

  explicit RealVolume(RealTensor<T> tensor) : tensor_(std::move(tensor)) {
    if (tensor_.rank() != 3) {
      throw Error(ErrorCode::ShapeMismatch,
                  "real volume requires (slice, height, width), got " +
                      shape_string(tensor_.shape()));
    }
  }

  const RealTensor<T>& tensor() const { return tensor_; }
  RealTensor<T>& tensor() { return tensor_; }

  Index slices() const { return tensor_.extent(0); }
  Index height() const { return tensor_.extent(1); }
  Index width() const { return tensor_.extent(2); }

  auto slice(Index s) { return tensor_.plane(s); }
  auto slice(Index s) const { return tensor_.plane(s); }

  const auto& values() const { return tensor_.data(); }

  bool is_magnitude() const { return (tensor_.data() >= T(0)).all(); }

  friend bool operator==(const RealVolume& a, const RealVolume& b) {
    return a.tensor_ == b.tensor_;
  }

 private:
  RealTensor<T> tensor_;
};

struct CropSpec {
  Index out_height = 320;
  Index out_width = 320;
};

/// First retained index along an axis. The extra pixel of an odd remainder
/// stays on the low-index side.
inline Index crop_offset(Index in, Index out) { return (in - out + 1) / 2; }

template <typename Elem>
Tensor<Elem> center_crop(const Tensor<Elem>& t, const CropSpec& c) {
  if (t.rank() < 2) throw Error(ErrorCode::InvalidArgument, "crop needs a 2-D plane");
  if (c.out_height < 1 || c.out_width < 1 || c.out_height > t.height() ||
      c.out_width > t.width()) {
    throw Error(ErrorCode::DimensionTooSmall,
                "cannot crop " + std::to_string(t.height()) + "x" + std::to_string(t.width()) +
                    " to " + std::to_string(c.out_height) + "x" + std::to_string(c.out_width));
  }
  Shape out_shape = t.shape();
  out_shape[out_shape.size() - 2] = c.out_height;
  out_shape[out_shape.size() - 1] = c.out_width;
  Tensor<Elem> out(out_shape);
  const Index r0 = crop_offset(t.height(), c.out_height);
  const Index c0 = crop_offset(t.width(), c.out_width);
  for (Index p = 0; p < t.plane_count(); ++p) {
    out.plane(p) = t.plane(p).block(r0, c0, c.out_height, c.out_width);
  }
  return out;
}

template <typename T>
RealVolume<T> center_crop(const RealVolume<T>& v, const CropSpec& c) {
  return RealVolume<T>(center_crop(v.tensor(), c));
}

template <typename T, typename D>
CoilStack<T, D> center_crop(const CoilStack<T, D>& v, const CropSpec& c) {
  return CoilStack<T, D>(center_crop(v.tensor(), c), v.acquisition());
}

struct Violation {
  std::string message;
  std::optional<Index> flat_index;
};

template <typename T>
std::vector<Violation> validate_volume(const KSpaceVolume<T>& v) {
  std::vector<Violation> out;
  const auto& t = v.tensor();
  if (t.rank() != 4) {
    out.push_back({"rank must be 4 (slice, coil, height, width)", std::nullopt});
    return out;
  }
  if (v.coils() < 1) out.push_back({"coil_count >= 1", std::nullopt});
  if (v.height() < 2) out.push_back({"H >= 2", std::nullopt});
  if (v.width() < 2) out.push_back({"W >= 2", std::nullopt});
  if (shape_product(t.shape()) != t.size()) {
    out.push_back({"extent product != sample count", std::nullopt});
  }
  const auto* p = t.data().data();
  for (Index i = 0; i < t.size(); ++i) {
    if (!std::isfinite(p[i].real()) || !std::isfinite(p[i].imag())) {
      out.push_back({"non-finite sample at flat index " + std::to_string(i), i});
    }
  }
  return out;
}

/// Complex modulus per sample, dropping the coil axis when it has extent 1.
template <typename T>
RealVolume<T> magnitude(const ImageVolume<T>& v) {
  if (v.coils() != 1) {
    throw Error(ErrorCode::ShapeMismatch, "magnitude() expects a single-coil image");
  }
  RealTensor<T> t(Shape{v.slices(), v.height(), v.width()}, v.tensor().data().abs());
  return RealVolume<T>(std::move(t));
}

}  // namespace mrbench
