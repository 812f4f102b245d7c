#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "awe/awe_builder.hpp"
#include "awe/manifest.hpp"
#include "awe/nn.hpp"

namespace awe::ser {

enum class Feature { mel, raw, awe };
enum class Fusion { none, concat, cross_attention };
enum class TextVector { token_mean, first_token };

std::string to_string(Feature f);
std::string to_string(Fusion f);
std::string to_string(TextVector t);
Feature parse_feature(const std::string& s);
Fusion parse_fusion(const std::string& s);  // accepts "xattn" and "cross_attention"
TextVector parse_text_vector(const std::string& s);

struct ExperimentConfig {
  Feature feature = Feature::raw;
  Fusion fusion = Fusion::none;
  std::optional<std::uint32_t> layer;  // nullopt = every layer
  double split_ratio = 0.8;
  std::size_t n_runs = 5;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  nn::TrainConfig train;  // seed is replaced per run
  std::size_t hidden1 = 128;
  std::size_t hidden2 = 16;
  std::size_t d_model = 128;
  TextVector text_vector = TextVector::token_mean;
  bool force_mel_cross_attention = false;
  std::filesystem::path manifest_path;
  // Worker threads for independent runs; 0 = hardware concurrency. Does not
  // affect results.
  std::size_t jobs = 0;
};

// Throws ConfigError on an invalid combination.
void validate_config(const ExperimentConfig& config);

// Hex FNV-1a hash over every result-affecting setting. Neither jobs nor the
// manifest location is included, so a relocated copy of a corpus reports the
// same fingerprint.
std::string fingerprint(const ExperimentConfig& config);

struct UtteranceData {
  std::string id;
  std::size_t label = 0;
  Tensor audio;  // [n_layers, n_frames, dim]
  std::optional<Tensor> mel;
  Tensor lexical;  // [n_rows, dim]
  std::vector<WordAlignment> alignments;
};

// A manifest with all streams loaded into memory; read-only once built.
struct Corpus {
  Manifest manifest;
  std::filesystem::path root;
  std::vector<UtteranceData> utterances;

  std::size_t n_classes() const { return manifest.label_set.size(); }
  std::uint32_t n_layers() const { return manifest.n_layers; }
};

// Loads every stream; validates the manifest first and throws ConfigError
// listing the problems if it is not clean.
Corpus load_corpus(const std::filesystem::path& manifest_path);

struct Dataset {
  std::vector<nn::Example> examples;
  nn::ModelShape shape;  // n_classes and input dims filled in
  std::vector<std::string> skipped;  // utterance ids dropped (no aligned words)
};

Dataset assemble_dataset(const Corpus& corpus, const ExperimentConfig& config, std::uint32_t layer);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Seeded shuffle of 0..n-1; the first floor(ratio*n) indices train.
Split split(std::size_t n, double ratio, std::uint64_t seed);

double weighted_accuracy(std::span<const std::size_t> predictions, std::span<const std::size_t> labels);

double mean_of(std::span<const double> xs);
double population_std(std::span<const double> xs);

struct RunReport {
  std::string fingerprint;
  Feature feature = Feature::raw;
  Fusion fusion = Fusion::none;
  std::uint32_t layer = 0;
  std::vector<std::uint64_t> seeds;
  std::vector<double> wa;  // one per seed
  double mean_wa = 0.0;
  double std_wa = 0.0;
  double wall_time_s = 0.0;
};

// Trains one model per seed. Each seed re-draws both the split and the
// initialisation.
RunReport run_experiment(const Corpus& corpus, const ExperimentConfig& config);
RunReport run_experiment(const Dataset& dataset, const ExperimentConfig& config, std::uint32_t layer);

struct SweepRow {
  std::uint32_t layer = 0;
  Feature feature = Feature::raw;
  Fusion fusion = Fusion::none;
  std::optional<RunReport> report;  // empty when the layer failed
  std::string error;
};

struct SweepReport {
  std::vector<SweepRow> rows;  // ordered by layer, then fusion in request order
  bool all_ok() const;
};

// One run per (layer, fusion). config.layer limits the sweep to one layer
// when set. Failed layers become marked rows.
SweepReport layer_sweep(const Corpus& corpus, const ExperimentConfig& config, std::span<const Fusion> fusions);

}  // namespace awe::ser
