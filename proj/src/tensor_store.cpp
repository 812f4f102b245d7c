#include "awe/tensor_store.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "awe/error.hpp"

namespace awe {
namespace {

static_assert(sizeof(float) == 4);

template <typename T>
void put_le(std::ostream& out, T value) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  U bits = std::bit_cast<U>(value);
  unsigned char bytes[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<unsigned char>(bits >> (8 * i));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(U));
}

template <typename U>
U decode_le(const unsigned char* bytes) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(bytes[i]) << (8 * i);
  return v;
}

template <typename U>
U get_le(std::istream& in, const std::filesystem::path& path, const char* what) {
  unsigned char bytes[sizeof(U)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(U)))
    throw FormatError(path.string() + ": truncated header (" + what + ")");
  return decode_le<U>(bytes);
}

Shape read_header(std::istream& in, const std::filesystem::path& path) {
  char magic[4];
  if (!in.read(magic, 4)) throw FormatError(path.string() + ": truncated header (magic)");
  if (std::memcmp(magic, kTensorMagic, 4) != 0) throw FormatError(path.string() + ": bad magic bytes");
  auto version = get_le<std::uint32_t>(in, path, "version");
  if (version != kTensorVersion)
    throw FormatError(path.string() + ": unsupported version " + std::to_string(version));
  auto ndims = get_le<std::uint32_t>(in, path, "ndims");
  if (ndims != 2 && ndims != 3)
    throw FormatError(path.string() + ": ndims must be 2 or 3, got " + std::to_string(ndims));
  Shape dims(ndims);
  for (auto& d : dims) {
    d = get_le<std::uint64_t>(in, path, "dims");
    if (d == 0) throw FormatError(path.string() + ": zero-length dimension");
  }
  return dims;
}

}  // namespace

std::span<const float> Tensor::row(std::uint64_t r) const {
  if (dims.size() != 2) throw ShapeError("row() needs a 2-D tensor");
  if (r >= dims[0]) throw ShapeError("row index out of range");
  return std::span<const float>(data).subspan(r * dims[1], dims[1]);
}

std::span<const float> Tensor::frame(std::uint64_t layer, std::uint64_t f) const {
  if (dims.size() != 3) throw ShapeError("frame() needs a 3-D tensor");
  if (layer >= dims[0] || f >= dims[1]) throw ShapeError("frame index out of range");
  return std::span<const float>(data).subspan((layer * dims[1] + f) * dims[2], dims[2]);
}

std::uint64_t element_count(const Shape& dims) {
  std::uint64_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

void check_shape(const Shape& dims) {
  if (dims.size() != 2 && dims.size() != 3)
    throw ShapeError("tensor rank must be 2 or 3, got " + std::to_string(dims.size()));
  for (auto d : dims)
    if (d == 0) throw ShapeError("tensor dimensions must be >= 1");
}

void write_tensor(const Shape& dims, std::span<const float> data, const std::filesystem::path& path) {
  check_shape(dims);
  if (element_count(dims) != data.size())
    throw ShapeError("payload has " + std::to_string(data.size()) + " floats, shape needs " +
                     std::to_string(element_count(dims)));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(kTensorMagic, 4);
  put_le(out, kTensorVersion);
  put_le(out, static_cast<std::uint32_t>(dims.size()));
  for (auto d : dims) put_le(out, d);
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size() * sizeof(float)));
  } else {
    for (float f : data) put_le(out, f);
  }
  if (!out) throw IoError("write failed: " + path.string());
}

Shape read_tensor_shape(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_header(in, path);
}

Tensor read_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  Tensor t;
  t.dims = read_header(in, path);
  const auto n = element_count(t.dims);
  const auto header_end = in.tellg();
  in.seekg(0, std::ios::end);
  const auto payload_bytes = static_cast<std::uint64_t>(in.tellg() - header_end);
  if (payload_bytes != n * sizeof(float))
    throw FormatError(path.string() + ": payload is " + std::to_string(payload_bytes) +
                      " bytes, header implies " + std::to_string(n * sizeof(float)));
  in.seekg(header_end);
  t.data.resize(n);
  in.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(n * sizeof(float)));
  if (!in) throw FormatError(path.string() + ": truncated payload");
  if constexpr (std::endian::native != std::endian::little) {
    for (auto& f : t.data) {
      auto bits = std::bit_cast<std::uint32_t>(f);
      unsigned char b[4];
      std::memcpy(b, &bits, 4);
      f = std::bit_cast<float>(decode_le<std::uint32_t>(b));
    }
  }
  return t;
}

}  // namespace awe
