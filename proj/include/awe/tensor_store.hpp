#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace awe {

// On-disk layout (all little-endian):
//   bytes 0-3   magic "AWET"
//   bytes 4-7   version (u32), currently 1
//   bytes 8-11  ndims (u32), 2 or 3
//   ndims x u64 dims
//   payload: f32, row-major
inline constexpr char kTensorMagic[4] = {'A', 'W', 'E', 'T'};
inline constexpr std::uint32_t kTensorVersion = 1;

using Shape = std::vector<std::uint64_t>;

struct Tensor {
  Shape dims;
  std::vector<float> data;

  std::size_t rank() const { return dims.size(); }
  std::uint64_t dim(std::size_t i) const { return dims.at(i); }

  // Row `row` of a 2-D tensor, or frame `row` of layer `layer` of a 3-D one.
  std::span<const float> row(std::uint64_t row) const;
  std::span<const float> frame(std::uint64_t layer, std::uint64_t frame) const;
};

std::uint64_t element_count(const Shape& dims);

// Throws ShapeError if the shape is not a valid tensor-file shape.
void check_shape(const Shape& dims);

void write_tensor(const Shape& dims, std::span<const float> data,
                  const std::filesystem::path& path);
inline void write_tensor(const Tensor& t, const std::filesystem::path& path) {
  write_tensor(t.dims, t.data, path);
}

Tensor read_tensor(const std::filesystem::path& path);

// Reads only the header; used by manifest validation to check frame counts
// without pulling whole payloads into memory.
Shape read_tensor_shape(const std::filesystem::path& path);

}  // namespace awe
