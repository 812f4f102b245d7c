#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "awe/manifest.hpp"
#include "awe/tensor_store.hpp"

namespace awe {

// Frames [first, last) of one layer.
struct FrameSpan {
  std::uint64_t first = 0;
  std::uint64_t last = 0;
  std::uint32_t layer = 0;

  std::uint64_t size() const { return last - first; }
  bool operator==(const FrameSpan&) const = default;
};

struct FrameGeometry {
  double stride_s = 0.020;
  double window_s = 0.025;
};

// Frame i covers [i*stride, i*stride + window). Returns every frame whose
// window overlaps [start_s, end_s), clamped to [0, n_frames). If nothing
// overlaps after clamping (aligner drift past the end), returns the single
// frame nearest to start_s and sets *fell_back.
FrameSpan time_to_frame_span(double start_s, double end_s, double stride_s, double window_s,
                             std::uint64_t n_frames, bool* fell_back = nullptr);

// Element-wise mean. Accumulates in double.
std::vector<float> pool_word(std::span<const std::span<const float>> frames);

struct LayeredUtterance {
  std::string id;
  Tensor audio;  // [n_layers, n_frames, dim]
  std::uint32_t label = 0;

  std::uint32_t n_layers() const { return static_cast<std::uint32_t>(audio.dim(0)); }
  std::uint64_t n_frames() const { return audio.dim(1); }
  std::uint64_t dim() const { return audio.dim(2); }
};

struct AweRecord {
  std::string word;
  std::string utterance_id;
  std::uint32_t layer = 0;
  std::uint32_t token_index = 0;
  std::vector<float> vector;
  std::uint64_t n_frames_pooled = 0;
};

// One record per (alignment x requested layer), ordered by (token_index, layer).
// Words are lowercased.
std::vector<AweRecord> build_awes(const LayeredUtterance& utterance, const std::vector<WordAlignment>& alignments,
                                  std::span<const std::uint32_t> layers, FrameGeometry geometry = {});

// Parses "0..12", "3", "0,4,9" or "all" (needs n_layers) into a sorted list.
std::vector<std::uint32_t> parse_layer_list(const std::string& text, std::uint32_t n_layers);

// Directory holding one [n_rows, dim] TensorFile per layer (layer_XX.awet)
// and index.tsv mapping row -> (utterance_id, word, token_index). Rows are
// aligned across layers.
struct AweStoreRow {
  std::string utterance_id;
  std::string word;
  std::uint32_t token_index = 0;
};

struct AweStore {
  std::vector<std::uint32_t> layers;
  std::vector<AweStoreRow> rows;

  static std::filesystem::path layer_path(const std::filesystem::path& dir, std::uint32_t layer);
  // Records of one layer, rebuilt from the index and that layer's tensor.
  std::vector<AweRecord> load_layer(const std::filesystem::path& dir, std::uint32_t layer) const;
};

AweStore load_awe_store(const std::filesystem::path& dir);

// Pools every utterance in the manifest and writes the store. Utterances are
// processed in manifest order; the result does not depend on that order
// beyond row numbering, which follows (utterance_id, token_index).
AweStore build_awe_store(const Manifest& manifest, const std::filesystem::path& manifest_root,
                         std::span<const std::uint32_t> layers, const std::filesystem::path& out_dir);

}  // namespace awe
