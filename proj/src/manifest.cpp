#include "awe/manifest.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "awe/error.hpp"
#include "awe/tensor_store.hpp"

namespace awe {

using nlohmann::json;
namespace fs = std::filesystem;

std::optional<std::size_t> Manifest::label_index(const std::string& label) const {
  auto it = std::find(label_set.begin(), label_set.end(), label);
  if (it == label_set.end()) return std::nullopt;
  return static_cast<std::size_t>(it - label_set.begin());
}

namespace {

json to_json(const UtteranceEntry& u) {
  json j = {{"id", u.id},
            {"audio_tensor_path", u.audio_tensor_path},
            {"lexical_tensor_path", u.lexical_tensor_path},
            {"alignment_path", u.alignment_path},
            {"label", u.label},
            {"transcript", u.transcript},
            {"n_frames", u.n_frames}};
  if (!u.mel_tensor_path.empty()) j["mel_tensor_path"] = u.mel_tensor_path;
  if (!u.lexical_groups.empty()) j["lexical_groups"] = u.lexical_groups;
  return j;
}

UtteranceEntry utterance_from_json(const json& j) {
  UtteranceEntry u;
  u.id = j.at("id").get<std::string>();
  u.audio_tensor_path = j.at("audio_tensor_path").get<std::string>();
  u.lexical_tensor_path = j.at("lexical_tensor_path").get<std::string>();
  u.alignment_path = j.at("alignment_path").get<std::string>();
  u.label = j.at("label").get<std::string>();
  u.transcript = j.value("transcript", "");
  u.n_frames = j.at("n_frames").get<std::uint64_t>();
  u.mel_tensor_path = j.value("mel_tensor_path", "");
  if (j.contains("lexical_groups"))
    u.lexical_groups = j.at("lexical_groups").get<std::vector<std::vector<std::uint32_t>>>();
  return u;
}

}  // namespace

Manifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  try {
    Manifest m;
    m.schema_version = j.value("schema_version", kManifestSchemaVersion);
    if (m.schema_version != kManifestSchemaVersion)
      throw FormatError(path.string() + ": unsupported schema_version " + std::to_string(m.schema_version));
    m.corpus_name = j.value("corpus_name", "");
    m.n_layers = j.value("n_layers", 13u);
    m.frame_stride_s = j.value("frame_stride_s", 0.020);
    m.frame_window_s = j.value("frame_window_s", 0.025);
    m.label_set = j.at("label_set").get<std::vector<std::string>>();
    m.lexical_layer = j.value("lexical_layer", "final");
    for (const auto& u : j.at("utterances")) m.utterances.push_back(utterance_from_json(u));
    return m;
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void save_manifest(const Manifest& m, const fs::path& path) {
  json utts = json::array();
  for (const auto& u : m.utterances) utts.push_back(to_json(u));
  json j = {{"schema_version", m.schema_version},
            {"corpus_name", m.corpus_name},
            {"n_layers", m.n_layers},
            {"frame_stride_s", m.frame_stride_s},
            {"frame_window_s", m.frame_window_s},
            {"label_set", m.label_set},
            {"lexical_layer", m.lexical_layer},
            {"utterances", utts}};
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write manifest " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<WordAlignment> load_alignments(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open alignment file " + path.string());
  std::vector<WordAlignment> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = json::parse(line);
      WordAlignment a;
      a.word = j.at("word").get<std::string>();
      a.start_s = j.at("start_s").get<double>();
      a.end_s = j.at("end_s").get<double>();
      a.token_index = j.at("token_index").get<std::uint32_t>();
      out.push_back(std::move(a));
    } catch (const json::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void save_alignments(const std::vector<WordAlignment>& alignments, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write alignment file " + path.string());
  for (const auto& a : alignments) {
    json j = {{"word", a.word}, {"start_s", a.start_s}, {"end_s", a.end_s}, {"token_index", a.token_index}};
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<std::string> transcript_words(const std::string& transcript) {
  std::istringstream in(transcript);
  std::vector<std::string> words;
  std::string w;
  while (in >> w) {
    std::transform(w.begin(), w.end(), w.begin(), [](unsigned char c) { return std::tolower(c); });
    words.push_back(std::move(w));
  }
  return words;
}

namespace {

// Shape of a tensor file, checked all the way to the payload size.
std::optional<Shape> probe_tensor(const fs::path& path, std::string& error) {
  try {
    auto dims = read_tensor_shape(path);
    const std::uint64_t header = 12 + 8 * dims.size();
    const std::uint64_t expected = header + element_count(dims) * sizeof(float);
    if (fs::file_size(path) != expected) {
      error = "payload size does not match header";
      return std::nullopt;
    }
    return dims;
  } catch (const Error& e) {
    error = e.what();
    return std::nullopt;
  }
}

class Checker {
 public:
  Checker(const Manifest& m, const fs::path& root) : m_(m), root_(root) {}

  std::vector<ValidationProblem> run() {
    check_corpus();
    std::map<std::string, int> id_counts;
    for (const auto& u : m_.utterances) ++id_counts[u.id];
    for (const auto& [id, count] : id_counts)
      if (count > 1) add(id, "unique-id", "utterance id appears " + std::to_string(count) + " times");
    for (const auto& u : m_.utterances) check_utterance(u);
    std::sort(problems_.begin(), problems_.end());
    problems_.erase(std::unique(problems_.begin(), problems_.end()), problems_.end());
    return std::move(problems_);
  }

 private:
  void add(const std::string& id, std::string invariant, std::string detail) {
    problems_.push_back({id, std::move(invariant), std::move(detail)});
  }

  fs::path resolve(const std::string& p) const {
    fs::path path(p);
    return path.is_absolute() ? path : root_ / path;
  }

  void check_corpus() {
    if (m_.n_layers < 1) add("", "n-layers", "n_layers must be >= 1");
    if (!(m_.frame_stride_s > 0)) add("", "frame-geometry", "frame_stride_s must be > 0");
    if (!(m_.frame_window_s >= m_.frame_stride_s)) add("", "frame-geometry", "frame_window_s must be >= frame_stride_s");
    if (m_.label_set.empty()) add("", "label-set", "label_set is empty");
    std::set<std::string> seen(m_.label_set.begin(), m_.label_set.end());
    if (seen.size() != m_.label_set.size()) add("", "label-set", "label_set has duplicates");
  }

  std::optional<Shape> tensor(const UtteranceEntry& u, const std::string& rel, const char* what) {
    if (rel.empty()) {
      add(u.id, "missing-file", std::string(what) + " path is empty");
      return std::nullopt;
    }
    auto path = resolve(rel);
    if (!fs::exists(path)) {
      add(u.id, "missing-file", std::string(what) + " not found: " + rel);
      return std::nullopt;
    }
    std::string err;
    auto dims = probe_tensor(path, err);
    if (!dims) add(u.id, "parse", std::string(what) + ": " + err);
    return dims;
  }

  void check_utterance(const UtteranceEntry& u) {
    if (!m_.label_index(u.label)) add(u.id, "label-in-set", "label '" + u.label + "' not in label_set");
    if (u.n_frames < 1) add(u.id, "n-frames", "n_frames must be >= 1");
    const auto words = transcript_words(u.transcript);

    if (auto dims = tensor(u, u.audio_tensor_path, "audio tensor")) {
      if (dims->size() != 3) {
        add(u.id, "audio-shape", "audio tensor must be 3-D");
      } else {
        if ((*dims)[0] != m_.n_layers)
          add(u.id, "audio-shape", "audio tensor has " + std::to_string((*dims)[0]) + " layers, manifest says " +
                                       std::to_string(m_.n_layers));
        if ((*dims)[1] != u.n_frames)
          add(u.id, "n-frames", "audio tensor has " + std::to_string((*dims)[1]) + " frames, manifest says " +
                                    std::to_string(u.n_frames));
      }
    }

    if (auto dims = tensor(u, u.lexical_tensor_path, "lexical tensor")) {
      if (dims->size() != 2) {
        add(u.id, "lexical-shape", "lexical tensor must be 2-D");
      } else if (u.lexical_groups.empty()) {
        if ((*dims)[0] != words.size())
          add(u.id, "lexical-shape", "lexical tensor has " + std::to_string((*dims)[0]) + " rows for " +
                                         std::to_string(words.size()) + " transcript words");
      } else {
        if (u.lexical_groups.size() != words.size())
          add(u.id, "lexical-groups", "lexical_groups size differs from transcript word count");
        for (const auto& g : u.lexical_groups) {
          if (g.empty()) add(u.id, "lexical-groups", "empty sub-token group");
          for (auto r : g)
            if (r >= (*dims)[0]) add(u.id, "lexical-groups", "group row " + std::to_string(r) + " out of range");
        }
      }
    }

    if (!u.mel_tensor_path.empty()) {
      if (auto dims = tensor(u, u.mel_tensor_path, "mel tensor")) {
        if (dims->size() != 3 || (*dims)[0] != 1) {
          add(u.id, "mel-shape", "mel tensor must be [1, n_frames, n_mels]");
        } else {
          auto diff = static_cast<long long>((*dims)[1]) - static_cast<long long>(u.n_frames);
          if (diff > 1 || diff < -1) add(u.id, "mel-shape", "mel frame count off the speech frame grid");
        }
      }
    }

    check_alignments(u, words);
  }

  void check_alignments(const UtteranceEntry& u, const std::vector<std::string>& words) {
    if (u.alignment_path.empty()) {
      add(u.id, "missing-file", "alignment path is empty");
      return;
    }
    auto path = resolve(u.alignment_path);
    if (!fs::exists(path)) {
      add(u.id, "missing-file", "alignment file not found: " + u.alignment_path);
      return;
    }
    std::vector<WordAlignment> aligns;
    try {
      aligns = load_alignments(path);
    } catch (const Error& e) {
      add(u.id, "parse", e.what());
      return;
    }
    // Small tolerance for times written with finite decimal precision.
    constexpr double kTol = 1e-6;
    const double duration =
        u.n_frames == 0 ? 0.0 : static_cast<double>(u.n_frames - 1) * m_.frame_stride_s + m_.frame_window_s;
    for (std::size_t i = 0; i < aligns.size(); ++i) {
      const auto& a = aligns[i];
      const std::string where = "alignment " + std::to_string(i) + " ('" + a.word + "')";
      if (!(a.start_s >= 0.0) || !(a.end_s > a.start_s)) add(u.id, "alignment-interval", where + ": need 0 <= start < end");
      if (a.end_s > duration + kTol) add(u.id, "alignment-duration", where + ": ends after the last frame");
      if (i > 0 && a.start_s < aligns[i - 1].start_s) add(u.id, "alignment-sorted", where + ": not sorted by start");
      if (i > 0 && a.start_s < aligns[i - 1].end_s - kTol) add(u.id, "alignment-overlap", where + ": overlaps previous word");
      if (a.token_index >= words.size()) {
        add(u.id, "alignment-token", where + ": token_index beyond transcript");
      } else if (words[a.token_index] != a.word) {
        add(u.id, "alignment-token", where + ": word differs from transcript word '" + words[a.token_index] + "'");
      }
      bool lower = std::none_of(a.word.begin(), a.word.end(), [](unsigned char c) { return std::isupper(c); });
      if (!lower) add(u.id, "alignment-case", where + ": word is not lowercase");
    }
  }

  const Manifest& m_;
  fs::path root_;
  std::vector<ValidationProblem> problems_;
};

}  // namespace

ValidationReport validate_manifest(const Manifest& manifest, const fs::path& root) {
  return ValidationReport{Checker(manifest, root).run()};
}

}  // namespace awe
