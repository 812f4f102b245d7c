#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace awe {

inline constexpr int kManifestSchemaVersion = 1;

struct WordAlignment {
  std::string word;  // lowercase
  double start_s = 0.0;
  double end_s = 0.0;
  std::uint32_t token_index = 0;  // position of the word in the transcript
};

struct UtteranceEntry {
  std::string id;
  std::string audio_tensor_path;    // [n_layers, n_frames, dim]
  std::string lexical_tensor_path;  // [n_rows, dim]
  std::string alignment_path;       // one JSON record per line
  std::string label;
  std::string transcript;
  std::uint64_t n_frames = 0;
  // Optional 1-layer Mel stream on the same frame grid.
  std::string mel_tensor_path;
  // Lexical rows belonging to each transcript word (sub-token groups). Empty
  // means row i is word i.
  std::vector<std::vector<std::uint32_t>> lexical_groups;
};

struct Manifest {
  int schema_version = kManifestSchemaVersion;
  std::string corpus_name;
  std::uint32_t n_layers = 13;
  double frame_stride_s = 0.020;
  double frame_window_s = 0.025;
  std::vector<std::string> label_set;
  std::string lexical_layer = "final";
  std::vector<UtteranceEntry> utterances;

  // Index of `label` in label_set, or nullopt.
  std::optional<std::size_t> label_index(const std::string& label) const;
};

Manifest load_manifest(const std::filesystem::path& path);
void save_manifest(const Manifest& manifest, const std::filesystem::path& path);

std::vector<WordAlignment> load_alignments(const std::filesystem::path& path);
void save_alignments(const std::vector<WordAlignment>& alignments, const std::filesystem::path& path);

// Whitespace-split, lowercased transcript words.
std::vector<std::string> transcript_words(const std::string& transcript);

struct ValidationProblem {
  std::string utterance_id;  // empty for corpus-level problems
  std::string invariant;     // short tag, e.g. "unique-id", "missing-file"
  std::string detail;

  auto operator<=>(const ValidationProblem&) const = default;
};

struct ValidationReport {
  std::vector<ValidationProblem> problems;  // sorted
  bool ok() const { return problems.empty(); }
};

// Checks every manifest invariant against files under `root` (relative paths
// in the manifest resolve against it). Output is sorted, so it does not depend
// on utterance order.
ValidationReport validate_manifest(const Manifest& manifest, const std::filesystem::path& root);

}  // namespace awe
