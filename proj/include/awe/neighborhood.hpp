#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "awe/awe_builder.hpp"

namespace awe {

// One vector per word type. Immutable after construction; safe to query from
// several threads.
class EmbeddingSpace {
 public:
  // side is a free-form tag such as "acoustic L9" or "lexical".
  EmbeddingSpace(std::map<std::string, std::vector<double>> entries, std::string side = "");

  std::size_t size() const { return words_.size(); }
  std::size_t dimension() const { return dim_; }
  const std::string& side() const { return side_; }
  const std::vector<std::string>& words() const { return words_; }  // sorted

  bool contains(const std::string& word) const;
  std::optional<std::size_t> index_of(const std::string& word) const;
  std::span<const double> vector(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }
  std::span<const double> vector(const std::string& word) const;
  double norm(std::size_t i) const { return norms_[i]; }

  // Space restricted to `vocabulary` (words absent here are ignored).
  EmbeddingSpace restricted_to(std::span<const std::string> vocabulary) const;
  // Same entries with every vector multiplied by `factor`.
  EmbeddingSpace scaled(double factor) const;

 private:
  std::vector<std::string> words_;
  std::vector<double> data_;
  std::vector<double> norms_;
  std::size_t dim_ = 0;
  std::string side_;
};

// Sorted intersection of the two vocabularies.
std::vector<std::string> shared_vocabulary(const EmbeddingSpace& a, const EmbeddingSpace& b);

// Word-type vectors as the mean of each type's occurrence vectors, keeping
// types with at least min_count occurrences.
EmbeddingSpace aggregate_word_types(std::span<const AweRecord> records, std::size_t min_count,
                                    std::string side = "acoustic");

double l2_norm(std::span<const double> v);
double dot(std::span<const double> u, std::span<const double> v);
double cosine(std::span<const double> u, std::span<const double> v);

struct Neighbor {
  std::string word;
  double score = 0.0;
  bool operator==(const Neighbor&) const = default;
};

struct NeighborSet {
  std::string word;
  std::vector<Neighbor> neighbors;  // by score desc, then word asc
};

// Exact K nearest neighbours under cosine, target excluded. Ties on equal
// score resolve by lexicographic word order.
NeighborSet knn(const std::string& word, const EmbeddingSpace& space, std::size_t k);

// |a ∩ b| / |a ∪ b|.
double jaccard(std::span<const std::string> a, std::span<const std::string> b);

// Jaccard of the two K-neighbour sets. Both spaces should already share a
// vocabulary (see shared_vocabulary), otherwise the candidate pools differ.
double lns(const std::string& word, const EmbeddingSpace& acoustic, const EmbeddingSpace& lexical, std::size_t k);

// Mean LNS over the whole (shared) vocabulary.
double mean_lns(const EmbeddingSpace& acoustic, const EmbeddingSpace& lexical, std::size_t k);

struct LnsRow {
  std::uint32_t layer = 0;
  std::size_t k = 0;
  double mean_lns = 0.0;
  std::size_t vocab_size = 0;
};

struct LnsReport {
  std::vector<std::size_t> ks;
  std::vector<LnsRow> rows;  // ordered by (layer, K)
};

inline const std::vector<std::size_t> kDefaultLnsKs = {5, 10, 25, 50};

// For each layer in the store and each K: restrict the layer's word-type
// space and the lexical space to their shared vocabulary, then average LNS.
// K values that do not fit the vocabulary (K > |V|-1) are rejected.
LnsReport lns_layer_report(const AweStore& store, const std::filesystem::path& store_dir,
                           const EmbeddingSpace& lexical, std::span<const std::size_t> ks, std::size_t min_count);

// Same computation over in-memory per-layer spaces.
LnsReport lns_layer_report(const std::map<std::uint32_t, EmbeddingSpace>& acoustic_layers,
                           const EmbeddingSpace& lexical, std::span<const std::size_t> ks);

struct NeighborTableRow {
  std::string word;
  std::vector<Neighbor> lexical;
  std::vector<Neighbor> acoustic;
  std::vector<std::string> shared;  // words present in both lists, sorted
};

std::vector<NeighborTableRow> neighbor_table(std::span<const std::string> words, const EmbeddingSpace& acoustic,
                                             const EmbeddingSpace& lexical, std::size_t k = 5);

// Plain-text rendering; shared neighbours are wrapped in *asterisks*.
std::string format_neighbor_table(std::span<const NeighborTableRow> rows);

// Lexical word-type space from the corpus' lexical tensors: sub-token rows are
// averaged per word first, then occurrences are averaged per word type.
EmbeddingSpace lexical_space_from_manifest(const Manifest& manifest, const std::filesystem::path& root,
                                           std::size_t min_count = 1);

// Word-type space stored as a [V, dim] tensor plus a sidecar "<path>.vocab"
// with one word per line in row order.
void save_space(const EmbeddingSpace& space, const std::filesystem::path& path);
EmbeddingSpace load_space(const std::filesystem::path& path, std::string side = "lexical");

}  // namespace awe
