#include "awe/neighborhood.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "awe/error.hpp"

namespace awe {

namespace fs = std::filesystem;

EmbeddingSpace::EmbeddingSpace(std::map<std::string, std::vector<double>> entries, std::string side)
    : side_(std::move(side)) {
  if (entries.empty()) throw EmptyVocabularyError("embedding space has no words");
  dim_ = entries.begin()->second.size();
  if (dim_ == 0) throw ShapeError("embedding vectors must have dimension >= 1");
  words_.reserve(entries.size());
  data_.reserve(entries.size() * dim_);
  for (auto& [word, vec] : entries) {
    if (vec.size() != dim_)
      throw ShapeError("word '" + word + "' has dimension " + std::to_string(vec.size()) + ", expected " +
                       std::to_string(dim_));
    const double n = l2_norm(vec);
    if (n == 0.0) throw DegenerateVectorError("word '" + word + "' has a zero vector");
    if (!std::isfinite(n)) throw NumericError("word '" + word + "' has a non-finite vector");
    words_.push_back(word);
    data_.insert(data_.end(), vec.begin(), vec.end());
    norms_.push_back(n);
  }
}

std::optional<std::size_t> EmbeddingSpace::index_of(const std::string& word) const {
  auto it = std::lower_bound(words_.begin(), words_.end(), word);
  if (it == words_.end() || *it != word) return std::nullopt;
  return static_cast<std::size_t>(it - words_.begin());
}

bool EmbeddingSpace::contains(const std::string& word) const { return index_of(word).has_value(); }

std::span<const double> EmbeddingSpace::vector(const std::string& word) const {
  auto i = index_of(word);
  if (!i) throw UnknownWordError("'" + word + "' not in " + (side_.empty() ? "space" : side_ + " space"));
  return vector(*i);
}

EmbeddingSpace EmbeddingSpace::restricted_to(std::span<const std::string> vocabulary) const {
  std::map<std::string, std::vector<double>> entries;
  for (const auto& w : vocabulary)
    if (auto i = index_of(w)) {
      auto v = vector(*i);
      entries.emplace(w, std::vector<double>(v.begin(), v.end()));
    }
  return EmbeddingSpace(std::move(entries), side_);
}

EmbeddingSpace EmbeddingSpace::scaled(double factor) const {
  std::map<std::string, std::vector<double>> entries;
  for (std::size_t i = 0; i < words_.size(); ++i) {
    auto v = vector(i);
    std::vector<double> s(v.begin(), v.end());
    for (auto& x : s) x *= factor;
    entries.emplace(words_[i], std::move(s));
  }
  return EmbeddingSpace(std::move(entries), side_);
}

std::vector<std::string> shared_vocabulary(const EmbeddingSpace& a, const EmbeddingSpace& b) {
  std::vector<std::string> out;
  std::set_intersection(a.words().begin(), a.words().end(), b.words().begin(), b.words().end(),
                        std::back_inserter(out));
  return out;
}

EmbeddingSpace aggregate_word_types(std::span<const AweRecord> records, std::size_t min_count, std::string side) {
  if (!records.empty()) {
    const auto layer = records.front().layer;
    for (const auto& r : records)
      if (r.layer != layer) throw LayerError("aggregate_word_types needs records from a single layer");
  }
  std::map<std::string, std::pair<std::vector<double>, std::size_t>> acc;
  for (const auto& r : records) {
    auto& [sum, count] = acc[r.word];
    if (sum.empty()) sum.assign(r.vector.size(), 0.0);
    if (sum.size() != r.vector.size()) throw ShapeError("word '" + r.word + "' has ragged occurrence vectors");
    for (std::size_t j = 0; j < sum.size(); ++j) sum[j] += r.vector[j];
    ++count;
  }
  std::map<std::string, std::vector<double>> entries;
  for (auto& [word, sc] : acc) {
    auto& [sum, count] = sc;
    if (count < min_count) continue;
    for (auto& x : sum) x /= static_cast<double>(count);
    entries.emplace(word, std::move(sum));
  }
  if (entries.empty())
    throw EmptyVocabularyError("no word type has at least " + std::to_string(min_count) + " occurrences");
  return EmbeddingSpace(std::move(entries), std::move(side));
}

double dot(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw ShapeError("dimension mismatch in dot product");
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
  return s;
}

double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

namespace {

// Shared by cosine() and knn() so both produce bit-identical scores.
double cosine_from_norms(std::span<const double> u, std::span<const double> v, double nu, double nv) {
  return std::clamp(dot(u, v) / (nu * nv), -1.0, 1.0);
}

}  // namespace

double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw ShapeError("cosine of vectors with different dimensions");
  const double nu = l2_norm(u), nv = l2_norm(v);
  if (nu == 0.0 || nv == 0.0) throw DegenerateVectorError("cosine with a zero vector");
  return cosine_from_norms(u, v, nu, nv);
}

NeighborSet knn(const std::string& word, const EmbeddingSpace& space, std::size_t k) {
  auto target = space.index_of(word);
  if (!target) throw UnknownWordError("'" + word + "' not in " + (space.side().empty() ? "space" : space.side()));
  if (k < 1 || k > space.size() - 1)
    throw ParameterError("K=" + std::to_string(k) + " outside 1.." + std::to_string(space.size() - 1));

  const auto q = space.vector(*target);
  const double qn = space.norm(*target);
  std::vector<std::pair<double, std::size_t>> scored;
  scored.reserve(space.size() - 1);
  for (std::size_t i = 0; i < space.size(); ++i) {
    if (i == *target) continue;
    scored.emplace_back(cosine_from_norms(q, space.vector(i), qn, space.norm(i)), i);
  }
  // Word list is sorted, so index order is lexicographic order.
  auto better = [](const auto& a, const auto& b) { return a.first != b.first ? a.first > b.first : a.second < b.second; };
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k), scored.end(), better);

  NeighborSet out{word, {}};
  out.neighbors.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.neighbors.push_back({space.words()[scored[i].second], scored[i].first});
  return out;
}

double jaccard(std::span<const std::string> a, std::span<const std::string> b) {
  std::set<std::string> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  if (sa.empty() && sb.empty()) throw UndefinedError("Jaccard of two empty sets");
  std::size_t inter = 0;
  for (const auto& w : sa) inter += sb.count(w);
  const std::size_t uni = sa.size() + sb.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

namespace {

std::vector<std::string> neighbor_words(const NeighborSet& s, std::size_t k) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < k && i < s.neighbors.size(); ++i) out.push_back(s.neighbors[i].word);
  return out;
}

}  // namespace

double lns(const std::string& word, const EmbeddingSpace& acoustic, const EmbeddingSpace& lexical, std::size_t k) {
  if (!acoustic.contains(word)) throw UnknownWordError("'" + word + "' not in acoustic space");
  if (!lexical.contains(word)) throw UnknownWordError("'" + word + "' not in lexical space");
  auto a = neighbor_words(knn(word, acoustic, k), k);
  auto b = neighbor_words(knn(word, lexical, k), k);
  return jaccard(a, b);
}

double mean_lns(const EmbeddingSpace& acoustic, const EmbeddingSpace& lexical, std::size_t k) {
  const auto vocab = shared_vocabulary(acoustic, lexical);
  if (vocab.empty()) throw EmptyVocabularyError("acoustic and lexical spaces share no words");
  double sum = 0.0;
  for (const auto& w : vocab) sum += lns(w, acoustic, lexical, k);
  return sum / static_cast<double>(vocab.size());
}

LnsReport lns_layer_report(const std::map<std::uint32_t, EmbeddingSpace>& acoustic_layers,
                           const EmbeddingSpace& lexical, std::span<const std::size_t> ks) {
  if (ks.empty()) throw ParameterError("no K values given");
  LnsReport report;
  report.ks.assign(ks.begin(), ks.end());
  std::sort(report.ks.begin(), report.ks.end());
  report.ks.erase(std::unique(report.ks.begin(), report.ks.end()), report.ks.end());
  const std::size_t k_max = report.ks.back();

  for (const auto& [layer, full_acoustic] : acoustic_layers) {
    const auto vocab = shared_vocabulary(full_acoustic, lexical);
    if (vocab.empty())
      throw EmptyVocabularyError("layer " + std::to_string(layer) + ": no words shared with the lexical space");
    if (report.ks.front() < 1 || k_max > vocab.size() - 1)
      throw ParameterError("layer " + std::to_string(layer) + ": K up to " + std::to_string(k_max) +
                           " needs a shared vocabulary of at least " + std::to_string(k_max + 1) + " words, have " +
                           std::to_string(vocab.size()));
    const auto acoustic = full_acoustic.restricted_to(vocab);
    const auto lex = lexical.restricted_to(vocab);

    // Neighbour order is a strict total order, so the K-set is a prefix of the
    // K_max list.
    std::vector<double> sums(report.ks.size(), 0.0);
    for (const auto& w : vocab) {
      const auto na = knn(w, acoustic, k_max);
      const auto nl = knn(w, lex, k_max);
      for (std::size_t i = 0; i < report.ks.size(); ++i)
        sums[i] += jaccard(neighbor_words(na, report.ks[i]), neighbor_words(nl, report.ks[i]));
    }
    for (std::size_t i = 0; i < report.ks.size(); ++i)
      report.rows.push_back({layer, report.ks[i], sums[i] / static_cast<double>(vocab.size()), vocab.size()});
  }
  return report;
}

LnsReport lns_layer_report(const AweStore& store, const fs::path& store_dir, const EmbeddingSpace& lexical,
                           std::span<const std::size_t> ks, std::size_t min_count) {
  std::map<std::uint32_t, EmbeddingSpace> layers;
  for (auto layer : store.layers) {
    auto records = store.load_layer(store_dir, layer);
    layers.emplace(layer, aggregate_word_types(records, min_count, "acoustic L" + std::to_string(layer)));
  }
  return lns_layer_report(layers, lexical, ks);
}

std::vector<NeighborTableRow> neighbor_table(std::span<const std::string> words, const EmbeddingSpace& acoustic,
                                             const EmbeddingSpace& lexical, std::size_t k) {
  std::vector<NeighborTableRow> rows;
  for (const auto& w : words) {
    if (!acoustic.contains(w)) throw UnknownWordError("'" + w + "' not in acoustic space");
    if (!lexical.contains(w)) throw UnknownWordError("'" + w + "' not in lexical space");
    NeighborTableRow row;
    row.word = w;
    row.lexical = knn(w, lexical, k).neighbors;
    row.acoustic = knn(w, acoustic, k).neighbors;
    std::set<std::string> lex;
    for (const auto& n : row.lexical) lex.insert(n.word);
    for (const auto& n : row.acoustic)
      if (lex.count(n.word)) row.shared.push_back(n.word);
    std::sort(row.shared.begin(), row.shared.end());
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string format_neighbor_table(std::span<const NeighborTableRow> rows) {
  std::ostringstream out;
  out << "word\tlexical_neighbors\tacoustic_neighbors\n";
  auto list = [](const NeighborTableRow& row, const std::vector<Neighbor>& ns) {
    std::string s;
    for (std::size_t i = 0; i < ns.size(); ++i) {
      if (i) s += ", ";
      bool shared = std::binary_search(row.shared.begin(), row.shared.end(), ns[i].word);
      s += shared ? "*" + ns[i].word + "*" : ns[i].word;
    }
    return s;
  };
  for (const auto& row : rows) out << row.word << '\t' << list(row, row.lexical) << '\t' << list(row, row.acoustic) << '\n';
  return out.str();
}

EmbeddingSpace lexical_space_from_manifest(const Manifest& manifest, const fs::path& root, std::size_t min_count) {
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : root / p; };
  std::map<std::string, std::pair<std::vector<double>, std::size_t>> acc;
  for (const auto& u : manifest.utterances) {
    const auto words = transcript_words(u.transcript);
    const auto lex = read_tensor(resolve(u.lexical_tensor_path));
    if (lex.rank() != 2) throw ShapeError(u.id + ": lexical tensor must be 2-D");
    for (std::size_t w = 0; w < words.size(); ++w) {
      std::vector<std::uint32_t> rows;
      if (u.lexical_groups.empty())
        rows = {static_cast<std::uint32_t>(w)};
      else
        rows = u.lexical_groups.at(w);
      std::vector<double> word_vec(lex.dim(1), 0.0);
      for (auto r : rows) {
        auto v = lex.row(r);
        for (std::size_t j = 0; j < v.size(); ++j) word_vec[j] += v[j];
      }
      for (auto& x : word_vec) x /= static_cast<double>(rows.size());
      auto& [sum, count] = acc[words[w]];
      if (sum.empty()) sum.assign(word_vec.size(), 0.0);
      for (std::size_t j = 0; j < sum.size(); ++j) sum[j] += word_vec[j];
      ++count;
    }
  }
  std::map<std::string, std::vector<double>> entries;
  for (auto& [word, sc] : acc) {
    if (sc.second < min_count) continue;
    for (auto& x : sc.first) x /= static_cast<double>(sc.second);
    entries.emplace(word, std::move(sc.first));
  }
  if (entries.empty()) throw EmptyVocabularyError("lexical space is empty");
  return EmbeddingSpace(std::move(entries), "lexical");
}

void save_space(const EmbeddingSpace& space, const fs::path& path) {
  std::vector<float> data;
  data.reserve(space.size() * space.dimension());
  for (std::size_t i = 0; i < space.size(); ++i)
    for (double x : space.vector(i)) data.push_back(static_cast<float>(x));
  write_tensor({space.size(), space.dimension()}, data, path);
  std::ofstream vocab(path.string() + ".vocab", std::ios::trunc);
  for (const auto& w : space.words()) vocab << w << '\n';
  if (!vocab) throw IoError("cannot write " + path.string() + ".vocab");
}

EmbeddingSpace load_space(const fs::path& path, std::string side) {
  const auto t = read_tensor(path);
  if (t.rank() != 2) throw ShapeError(path.string() + ": embedding space tensor must be 2-D");
  std::ifstream vocab(path.string() + ".vocab");
  if (!vocab) throw IoError("missing vocabulary file " + path.string() + ".vocab");
  std::map<std::string, std::vector<double>> entries;
  std::string w;
  std::uint64_t row = 0;
  while (std::getline(vocab, w)) {
    if (w.empty()) continue;
    if (row >= t.dim(0)) throw FormatError(path.string() + ".vocab has more words than tensor rows");
    auto v = t.row(row++);
    if (!entries.emplace(w, std::vector<double>(v.begin(), v.end())).second)
      throw FormatError(path.string() + ".vocab: duplicate word '" + w + "'");
  }
  if (row != t.dim(0)) throw FormatError(path.string() + ".vocab has fewer words than tensor rows");
  return EmbeddingSpace(std::move(entries), std::move(side));
}

}  // namespace awe
