#include "mrbench/dataio.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace mrbench {

namespace {

std::filesystem::path with_suffix(const std::filesystem::path& base, const char* suffix) {
  return std::filesystem::path(base.string() + suffix);
}

// Row-major flat offset of every sample, listed in column-major (first axis
// fastest) order.
std::vector<Index> column_major_order(const Shape& shape) {
  const std::size_t rank = shape.size();
  std::vector<Index> stride(rank, 1);
  for (std::size_t a = rank; a-- > 1;) stride[a - 1] = stride[a] * shape[a];
  const Index total = shape_product(shape);
  std::vector<Index> order;
  order.reserve(static_cast<std::size_t>(total));
  std::vector<Index> idx(rank, 0);
  for (Index n = 0; n < total; ++n) {
    Index off = 0;
    for (std::size_t a = 0; a < rank; ++a) off += idx[a] * stride[a];
    order.push_back(off);
    for (std::size_t a = 0; a < rank; ++a) {
      if (++idx[a] < shape[a]) break;
      idx[a] = 0;
    }
  }
  return order;
}

void put_le(std::string& buf, float v) {
  auto bits = std::bit_cast<std::uint32_t>(v);
  for (int b = 0; b < 4; ++b) buf.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
}

float get_le(const unsigned char* p) {
  std::uint32_t bits = 0;
  for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(p[b]) << (8 * b);
  return std::bit_cast<float>(bits);
}

}  // namespace

template <typename T>
void write_cfl(const ComplexTensor<T>& t, const std::filesystem::path& base) {
  const auto hdr_path = with_suffix(base, ".hdr");
  const auto cfl_path = with_suffix(base, ".cfl");
  {
    std::ofstream hdr(hdr_path, std::ios::binary);
    if (!hdr) throw Error(ErrorCode::Io, hdr_path.string() + ": cannot open for writing");
    hdr << "# Dimensions\n";
    for (Index a = 0; a < t.rank(); ++a) hdr << (a ? " " : "") << t.extent(a);
    hdr << "\n";
    if (!hdr) throw Error(ErrorCode::Io, hdr_path.string() + ": write failed");
  }
  std::string buf;
  buf.reserve(static_cast<std::size_t>(t.size()) * 8);
  const auto* p = t.data().data();
  for (Index off : column_major_order(t.shape())) {
    put_le(buf, static_cast<float>(p[off].real()));
    put_le(buf, static_cast<float>(p[off].imag()));
  }
  std::ofstream cfl(cfl_path, std::ios::binary);
  if (!cfl) throw Error(ErrorCode::Io, cfl_path.string() + ": cannot open for writing");
  cfl.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!cfl) throw Error(ErrorCode::Io, cfl_path.string() + ": write failed");
}

template <typename T>
ComplexTensor<T> read_cfl(const std::filesystem::path& base) {
  const auto hdr_path = with_suffix(base, ".hdr");
  const auto cfl_path = with_suffix(base, ".cfl");
  std::ifstream hdr(hdr_path);
  if (!hdr) throw Error(ErrorCode::Io, hdr_path.string() + ": cannot open");
  Shape shape;
  std::string line;
  while (std::getline(hdr, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream in(line);
    long long e = 0;
    while (in >> e) {
      if (e < 0) throw Error(ErrorCode::ContainerFormat, hdr_path.string() + ": negative extent");
      shape.push_back(static_cast<Index>(e));
    }
    if (!in.eof()) throw Error(ErrorCode::ContainerFormat, hdr_path.string() + ": malformed extents");
    break;
  }
  if (shape.empty()) throw Error(ErrorCode::ContainerFormat, hdr_path.string() + ": no dimensions line");

  std::ifstream cfl(cfl_path, std::ios::binary);
  if (!cfl) throw Error(ErrorCode::Io, cfl_path.string() + ": cannot open");
  std::string buf((std::istreambuf_iterator<char>(cfl)), std::istreambuf_iterator<char>());
  const Index total = shape_product(shape);
  if (static_cast<Index>(buf.size()) != total * 8) {
    throw Error(ErrorCode::SizeMismatch, cfl_path.string() + ": header declares " + std::to_string(total) +
                                             " samples but data holds " + std::to_string(buf.size()) +
                                             " bytes");
  }
  ComplexTensor<T> t(shape);
  auto* p = t.data().data();
  const auto* bytes = reinterpret_cast<const unsigned char*>(buf.data());
  Index n = 0;
  for (Index off : column_major_order(shape)) {
    p[off] = Complex<T>(get_le(bytes + 8 * n), get_le(bytes + 8 * n + 4));
    ++n;
  }
  return t;
}

template void write_cfl<float>(const ComplexTensor<float>&, const std::filesystem::path&);
template void write_cfl<double>(const ComplexTensor<double>&, const std::filesystem::path&);
template ComplexTensor<float> read_cfl<float>(const std::filesystem::path&);
template ComplexTensor<double> read_cfl<double>(const std::filesystem::path&);

}  // namespace mrbench
