#include "awe/awe_builder.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "awe/error.hpp"

namespace awe {

namespace fs = std::filesystem;

namespace {

// Times are seconds with at most microsecond meaning; boundaries that touch
// within this tolerance do not count as overlap.
constexpr double kTimeTol = 1e-9;

std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

}  // namespace

FrameSpan time_to_frame_span(double start_s, double end_s, double stride_s, double window_s, std::uint64_t n_frames,
                             bool* fell_back) {
  if (!(end_s > start_s)) throw IntervalError("word end must be after start");
  if (!(start_s >= 0.0)) throw IntervalError("word start must be >= 0");
  if (!(stride_s > 0.0) || !(window_s >= stride_s)) throw ParameterError("need stride > 0 and window >= stride");
  if (n_frames < 1) throw ParameterError("utterance has no frames");
  if (fell_back) *fell_back = false;

  auto overlaps = [&](double i) {
    const double t0 = i * stride_s;
    return t0 < end_s - kTimeTol && t0 + window_s > start_s + kTimeTol;
  };

  // First frame whose window end passes start_s, last frame starting before end_s.
  double lo = std::max(0.0, std::floor((start_s - window_s) / stride_s));
  while (lo > 0 && overlaps(lo - 1)) --lo;
  while (!overlaps(lo) && lo * stride_s < end_s) ++lo;
  double hi = std::ceil(end_s / stride_s);
  while (hi > lo && !overlaps(hi - 1)) --hi;
  while (overlaps(hi)) ++hi;

  const double n = static_cast<double>(n_frames);
  const double first = std::min(lo, n);
  const double last = std::min(hi, n);
  if (first < last) return {static_cast<std::uint64_t>(first), static_cast<std::uint64_t>(last), 0};

  if (fell_back) *fell_back = true;
  const double nearest = std::clamp(std::round(start_s / stride_s), 0.0, n - 1);
  const auto f = static_cast<std::uint64_t>(nearest);
  return {f, f + 1, 0};
}

std::vector<float> pool_word(std::span<const std::span<const float>> frames) {
  if (frames.empty()) throw EmptySpanError("cannot pool an empty frame sequence");
  const std::size_t dim = frames.front().size();
  std::vector<double> acc(dim, 0.0);
  for (const auto& f : frames) {
    if (f.size() != dim) throw ShapeError("ragged frame dimensions in pooled span");
    for (std::size_t j = 0; j < dim; ++j) acc[j] += f[j];
  }
  std::vector<float> out(dim);
  const double n = static_cast<double>(frames.size());
  for (std::size_t j = 0; j < dim; ++j) out[j] = static_cast<float>(acc[j] / n);
  return out;
}

std::vector<AweRecord> build_awes(const LayeredUtterance& utt, const std::vector<WordAlignment>& alignments,
                                  std::span<const std::uint32_t> layers, FrameGeometry geometry) {
  if (utt.audio.rank() != 3) throw ShapeError(utt.id + ": audio tensor must be [layers, frames, dim]");
  for (auto layer : layers)
    if (layer >= utt.n_layers())
      throw LayerError(utt.id + ": layer " + std::to_string(layer) + " not in tensor with " +
                       std::to_string(utt.n_layers()) + " layers");

  std::vector<const WordAlignment*> order;
  order.reserve(alignments.size());
  for (const auto& a : alignments) order.push_back(&a);
  std::stable_sort(order.begin(), order.end(),
                   [](const auto* a, const auto* b) { return a->token_index < b->token_index; });

  std::vector<std::uint32_t> sorted_layers(layers.begin(), layers.end());
  std::sort(sorted_layers.begin(), sorted_layers.end());
  sorted_layers.erase(std::unique(sorted_layers.begin(), sorted_layers.end()), sorted_layers.end());

  std::vector<AweRecord> out;
  out.reserve(order.size() * sorted_layers.size());
  std::vector<std::span<const float>> frames;
  for (const auto* a : order) {
    FrameSpan span;
    bool fell_back = false;
    try {
      span = time_to_frame_span(a->start_s, a->end_s, geometry.stride_s, geometry.window_s, utt.n_frames(),
                                &fell_back);
    } catch (const Error& e) {
      throw IntervalError(utt.id + " word '" + a->word + "': " + e.what());
    }
    if (fell_back)
      warn(utt.id + " word '" + a->word + "' [" + std::to_string(a->start_s) + ", " + std::to_string(a->end_s) +
           ") lies past the last frame; using nearest frame " + std::to_string(span.first));
    const std::string word = lowercase(a->word);
    for (auto layer : sorted_layers) {
      frames.clear();
      for (auto f = span.first; f < span.last; ++f) frames.push_back(utt.audio.frame(layer, f));
      AweRecord rec;
      rec.word = word;
      rec.utterance_id = utt.id;
      rec.layer = layer;
      rec.token_index = a->token_index;
      try {
        rec.vector = pool_word(frames);
      } catch (const Error& e) {
        throw ShapeError(utt.id + " word '" + a->word + "': " + e.what());
      }
      rec.n_frames_pooled = span.size();
      out.push_back(std::move(rec));
    }
  }
  return out;
}

std::vector<std::uint32_t> parse_layer_list(const std::string& text, std::uint32_t n_layers) {
  std::vector<std::uint32_t> out;
  auto bad = [&] { return ParameterError("bad layer list '" + text + "'"); };
  if (lowercase(text) == "all") {
    for (std::uint32_t l = 0; l < n_layers; ++l) out.push_back(l);
    return out;
  }
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) throw bad();
    try {
      auto dots = item.find("..");
      if (dots != std::string::npos) {
        auto a = std::stoul(item.substr(0, dots));
        auto b = std::stoul(item.substr(dots + 2));
        if (b < a) throw bad();
        for (auto l = a; l <= b; ++l) out.push_back(static_cast<std::uint32_t>(l));
      } else {
        out.push_back(static_cast<std::uint32_t>(std::stoul(item)));
      }
    } catch (const std::logic_error&) {
      throw bad();
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  for (auto l : out)
    if (l >= n_layers) throw LayerError("layer " + std::to_string(l) + " out of range 0.." + std::to_string(n_layers - 1));
  if (out.empty()) throw bad();
  return out;
}

fs::path AweStore::layer_path(const fs::path& dir, std::uint32_t layer) {
  char name[32];
  std::snprintf(name, sizeof name, "layer_%02u.awet", layer);
  return dir / name;
}

std::vector<AweRecord> AweStore::load_layer(const fs::path& dir, std::uint32_t layer) const {
  if (std::find(layers.begin(), layers.end(), layer) == layers.end())
    throw LayerError("AWE store has no layer " + std::to_string(layer));
  auto t = read_tensor(layer_path(dir, layer));
  if (t.rank() != 2 || t.dim(0) != rows.size())
    throw FormatError(layer_path(dir, layer).string() + ": row count differs from index");
  std::vector<AweRecord> out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto r = t.row(i);
    out[i].word = rows[i].word;
    out[i].utterance_id = rows[i].utterance_id;
    out[i].token_index = rows[i].token_index;
    out[i].layer = layer;
    out[i].vector.assign(r.begin(), r.end());
  }
  return out;
}

AweStore load_awe_store(const fs::path& dir) {
  AweStore store;
  std::ifstream meta(dir / "store.json");
  if (!meta) throw IoError("no AWE store at " + dir.string());
  try {
    auto j = nlohmann::json::parse(meta);
    store.layers = j.at("layers").get<std::vector<std::uint32_t>>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError((dir / "store.json").string() + ": " + e.what());
  }
  std::ifstream index(dir / "index.tsv");
  if (!index) throw IoError("missing " + (dir / "index.tsv").string());
  std::string line;
  std::getline(index, line);  // header
  std::size_t lineno = 1;
  while (std::getline(index, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string row, utt, word, tok;
    if (!std::getline(ss, row, '\t') || !std::getline(ss, utt, '\t') || !std::getline(ss, word, '\t') ||
        !std::getline(ss, tok, '\t'))
      throw FormatError("index.tsv:" + std::to_string(lineno) + ": expected 4 columns");
    store.rows.push_back({utt, word, static_cast<std::uint32_t>(std::stoul(tok))});
  }
  return store;
}

AweStore build_awe_store(const Manifest& manifest, const fs::path& root, std::span<const std::uint32_t> layers,
                         const fs::path& out_dir) {
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : root / p; };
  std::vector<std::vector<AweRecord>> per_utt;
  for (const auto& u : manifest.utterances) {
    LayeredUtterance lu{u.id, read_tensor(resolve(u.audio_tensor_path)), 0};
    auto aligns = load_alignments(resolve(u.alignment_path));
    per_utt.push_back(build_awes(lu, aligns, layers, {manifest.frame_stride_s, manifest.frame_window_s}));
  }
  std::vector<std::size_t> order(per_utt.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](auto a, auto b) { return manifest.utterances[a].id < manifest.utterances[b].id; });

  std::vector<std::uint32_t> sorted_layers(layers.begin(), layers.end());
  std::sort(sorted_layers.begin(), sorted_layers.end());
  sorted_layers.erase(std::unique(sorted_layers.begin(), sorted_layers.end()), sorted_layers.end());
  const std::size_t n_layers = sorted_layers.size();

  AweStore store;
  store.layers = sorted_layers;
  std::vector<std::vector<float>> payload(n_layers);
  std::uint64_t dim = 0;
  for (auto i : order) {
    const auto& recs = per_utt[i];
    for (std::size_t r = 0; r < recs.size(); r += n_layers) {
      store.rows.push_back({recs[r].utterance_id, recs[r].word, recs[r].token_index});
      for (std::size_t l = 0; l < n_layers; ++l) {
        const auto& v = recs[r + l].vector;
        dim = v.size();
        payload[l].insert(payload[l].end(), v.begin(), v.end());
      }
    }
  }
  if (store.rows.empty()) throw EmptyVocabularyError("corpus produced no word embeddings");

  fs::create_directories(out_dir);
  for (std::size_t l = 0; l < n_layers; ++l)
    write_tensor({store.rows.size(), dim}, payload[l], AweStore::layer_path(out_dir, sorted_layers[l]));
  std::ofstream index(out_dir / "index.tsv", std::ios::trunc);
  if (!index) throw IoError("cannot write " + (out_dir / "index.tsv").string());
  index << "row\tutterance_id\tword\ttoken_index\n";
  for (std::size_t r = 0; r < store.rows.size(); ++r)
    index << r << '\t' << store.rows[r].utterance_id << '\t' << store.rows[r].word << '\t'
          << store.rows[r].token_index << '\n';
  std::ofstream meta(out_dir / "store.json", std::ios::trunc);
  meta << nlohmann::json{{"layers", sorted_layers}, {"n_rows", store.rows.size()}, {"dim", dim}}.dump(2) << '\n';
  if (!index || !meta) throw IoError("failed writing AWE store index");
  return store;
}

}  // namespace awe
