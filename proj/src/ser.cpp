#include "awe/ser.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <iostream>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "awe/error.hpp"

namespace awe::ser {

namespace fs = std::filesystem;

std::string to_string(Feature f) {
  switch (f) {
    case Feature::mel: return "mel";
    case Feature::raw: return "raw";
    case Feature::awe: return "awe";
  }
  return "?";
}

std::string to_string(Fusion f) {
  switch (f) {
    case Fusion::none: return "none";
    case Fusion::concat: return "concat";
    case Fusion::cross_attention: return "xattn";
  }
  return "?";
}

std::string to_string(TextVector t) { return t == TextVector::token_mean ? "token_mean" : "first_token"; }

Feature parse_feature(const std::string& s) {
  if (s == "mel") return Feature::mel;
  if (s == "raw") return Feature::raw;
  if (s == "awe") return Feature::awe;
  throw ConfigError("unknown feature '" + s + "' (mel|raw|awe)");
}

Fusion parse_fusion(const std::string& s) {
  if (s == "none") return Fusion::none;
  if (s == "concat") return Fusion::concat;
  if (s == "xattn" || s == "cross_attention") return Fusion::cross_attention;
  throw ConfigError("unknown fusion '" + s + "' (none|concat|xattn)");
}

TextVector parse_text_vector(const std::string& s) {
  if (s == "token_mean") return TextVector::token_mean;
  if (s == "first_token") return TextVector::first_token;
  throw ConfigError("unknown text vector '" + s + "' (token_mean|first_token)");
}

void validate_config(const ExperimentConfig& c) {
  if (c.feature == Feature::mel && c.fusion == Fusion::cross_attention && !c.force_mel_cross_attention)
    throw ConfigError("mel + cross-attention is disabled; pass the force flag to run it anyway");
  if (!(c.split_ratio > 0.0 && c.split_ratio < 1.0)) throw ConfigError("split ratio must be in (0, 1)");
  if (c.n_runs < 1) throw ConfigError("need at least one run");
  if (c.n_runs != c.seeds.size())
    throw ConfigError("n_runs is " + std::to_string(c.n_runs) + " but " + std::to_string(c.seeds.size()) +
                      " seeds were given");
  const auto& t = c.train;
  if (!(t.learning_rate > 0) || t.batch_size < 1 || t.epochs < 1 || !(t.beta1 > 0 && t.beta1 < 1) ||
      !(t.beta2 > 0 && t.beta2 < 1) || !(t.epsilon > 0))
    throw ConfigError("training hyperparameters must be positive (betas in (0, 1))");
  if (c.hidden1 < 1 || c.hidden2 < 1 || c.d_model < 1) throw ConfigError("layer sizes must be >= 1");
}

std::string fingerprint(const ExperimentConfig& c) {
  std::ostringstream s;
  s.precision(17);
  s << "feature=" << to_string(c.feature) << ";fusion=" << to_string(c.fusion)
    << ";layer=" << (c.layer ? std::to_string(*c.layer) : "all") << ";split=" << c.split_ratio
    << ";runs=" << c.n_runs << ";seeds=";
  for (auto seed : c.seeds) s << seed << ',';
  s << ";lr=" << c.train.learning_rate << ";batch=" << c.train.batch_size << ";epochs=" << c.train.epochs
    << ";b1=" << c.train.beta1 << ";b2=" << c.train.beta2 << ";eps=" << c.train.epsilon << ";h1=" << c.hidden1
    << ";h2=" << c.hidden2 << ";dmodel=" << c.d_model << ";text=" << to_string(c.text_vector);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s.str()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Corpus load_corpus(const fs::path& manifest_path) {
  Corpus c;
  c.manifest = load_manifest(manifest_path);
  c.root = manifest_path.parent_path();
  auto report = validate_manifest(c.manifest, c.root);
  if (!report.ok()) {
    std::string msg = manifest_path.string() + " has " + std::to_string(report.problems.size()) + " problem(s)";
    for (std::size_t i = 0; i < report.problems.size() && i < 5; ++i)
      msg += "\n  " + report.problems[i].utterance_id + " [" + report.problems[i].invariant + "] " +
             report.problems[i].detail;
    throw ConfigError(msg);
  }
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : c.root / p; };
  for (const auto& u : c.manifest.utterances) {
    UtteranceData d;
    d.id = u.id;
    d.label = *c.manifest.label_index(u.label);
    d.audio = read_tensor(resolve(u.audio_tensor_path));
    if (!u.mel_tensor_path.empty()) d.mel = read_tensor(resolve(u.mel_tensor_path));
    d.lexical = read_tensor(resolve(u.lexical_tensor_path));
    d.alignments = load_alignments(resolve(u.alignment_path));
    c.utterances.push_back(std::move(d));
  }
  return c;
}

namespace {

nn::Mat layer_frames(const Tensor& t, std::uint32_t layer) {
  const auto n = static_cast<Eigen::Index>(t.dim(1));
  const auto d = static_cast<Eigen::Index>(t.dim(2));
  nn::Mat m(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    auto f = t.frame(layer, static_cast<std::uint64_t>(i));
    for (Eigen::Index j = 0; j < d; ++j) m(i, j) = f[static_cast<std::size_t>(j)];
  }
  return m;
}

nn::Mat lexical_rows(const Tensor& t) {
  const auto n = static_cast<Eigen::Index>(t.dim(0));
  const auto d = static_cast<Eigen::Index>(t.dim(1));
  nn::Mat m(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    auto r = t.row(static_cast<std::uint64_t>(i));
    for (Eigen::Index j = 0; j < d; ++j) m(i, j) = r[static_cast<std::size_t>(j)];
  }
  return m;
}

template <typename Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn&& fn) {
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  jobs = std::min(jobs, n);
  if (jobs <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < jobs; ++w)
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (auto& t : workers) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace

Dataset assemble_dataset(const Corpus& corpus, const ExperimentConfig& config, std::uint32_t layer) {
  validate_config(config);
  Dataset ds;
  const bool xattn = config.fusion == Fusion::cross_attention;
  const bool needs_text = config.fusion != Fusion::none;
  if (config.feature == Feature::mel) {
    if (layer != 0) throw LayerError("the mel stream has a single layer (0)");
  } else if (layer >= corpus.n_layers()) {
    throw LayerError("layer " + std::to_string(layer) + " out of range 0.." + std::to_string(corpus.n_layers() - 1));
  }
  const FrameGeometry geometry{corpus.manifest.frame_stride_s, corpus.manifest.frame_window_s};
  const std::uint32_t layers[] = {layer};

  for (const auto& u : corpus.utterances) {
    nn::Mat audio_seq;
    switch (config.feature) {
      case Feature::mel:
        if (!u.mel) throw ConfigError(u.id + ": feature=mel but the utterance has no mel stream");
        audio_seq = layer_frames(*u.mel, 0);
        break;
      case Feature::raw:
        audio_seq = layer_frames(u.audio, layer);
        break;
      case Feature::awe: {
        LayeredUtterance lu{u.id, u.audio, static_cast<std::uint32_t>(u.label)};
        const auto records = build_awes(lu, u.alignments, layers, geometry);
        if (records.empty()) {
          warn(u.id + " has no aligned words; skipped for feature=awe");
          ds.skipped.push_back(u.id);
          continue;
        }
        audio_seq.resize(static_cast<Eigen::Index>(records.size()), static_cast<Eigen::Index>(records[0].vector.size()));
        for (std::size_t r = 0; r < records.size(); ++r)
          for (std::size_t j = 0; j < records[r].vector.size(); ++j)
            audio_seq(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = records[r].vector[j];
        break;
      }
    }

    nn::Example ex;
    ex.label = u.label;
    if (xattn) {
      ex.audio_seq = std::move(audio_seq);
      ex.text_seq = lexical_rows(u.lexical);
    } else {
      nn::Vec audio_vec = nn::pool_sequence(audio_seq);
      if (needs_text) {
        nn::Mat text = lexical_rows(u.lexical);
        nn::Vec text_vec =
            config.text_vector == TextVector::token_mean ? nn::pool_sequence(text) : nn::Vec(text.row(0).transpose());
        ex.features = nn::concat_fuse(audio_vec, text_vec);
      } else {
        ex.features = std::move(audio_vec);
      }
    }
    ds.examples.push_back(std::move(ex));
  }
  if (ds.examples.empty()) throw ConfigError("no usable utterances for this configuration");

  auto& s = ds.shape;
  s.n_classes = corpus.n_classes();
  s.hidden1 = config.hidden1;
  s.hidden2 = config.hidden2;
  s.d_model = config.d_model;
  s.cross_attention = xattn;
  const auto& first = ds.examples.front();
  if (xattn) {
    s.audio_dim = static_cast<std::size_t>(first.audio_seq.cols());
    s.text_dim = static_cast<std::size_t>(first.text_seq.cols());
  } else {
    s.input_dim = static_cast<std::size_t>(first.features.size());
  }
  return ds;
}

Split split(std::size_t n, double ratio, std::uint64_t seed) {
  if (n == 0) throw SplitError("cannot split an empty dataset");
  if (!(ratio > 0.0 && ratio < 1.0)) throw SplitError("ratio must be in (0, 1)");
  // The epsilon absorbs representation error such as 0.8 * 10 = 7.999...
  const auto n_train = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) + 1e-9));
  if (n_train == 0 || n_train >= n)
    throw SplitError("split of " + std::to_string(n) + " examples at ratio " + std::to_string(ratio) +
                     " leaves one side empty");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  nn::Rng rng(seed);
  rng.shuffle(order);
  return {std::vector<std::size_t>(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train)),
          std::vector<std::size_t>(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end())};
}

double weighted_accuracy(std::span<const std::size_t> predictions, std::span<const std::size_t> labels) {
  if (predictions.size() != labels.size())
    throw ShapeError("predictions and labels differ in length");
  if (labels.empty()) throw ShapeError("weighted accuracy of an empty set");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) correct += predictions[i] == labels[i];
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

double mean_of(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double population_std(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  const double m = mean_of(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(xs.size()));
}

RunReport run_experiment(const Dataset& dataset, const ExperimentConfig& config, std::uint32_t layer) {
  validate_config(config);
  const auto t0 = std::chrono::steady_clock::now();
  RunReport r;
  r.fingerprint = fingerprint(config);
  r.feature = config.feature;
  r.fusion = config.fusion;
  r.layer = layer;
  r.seeds = config.seeds;
  r.wa.assign(config.seeds.size(), 0.0);

  parallel_for(config.seeds.size(), config.jobs, [&](std::size_t i) {
    const auto seed = config.seeds[i];
    const auto parts = split(dataset.examples.size(), config.split_ratio, seed);
    std::vector<nn::Example> train_set;
    train_set.reserve(parts.train.size());
    for (auto idx : parts.train) train_set.push_back(dataset.examples[idx]);
    nn::TrainConfig tc = config.train;
    tc.seed = seed;
    const auto model = nn::train(train_set, dataset.shape, tc);
    std::vector<std::size_t> preds, labels;
    for (auto idx : parts.test) {
      preds.push_back(model.predict(dataset.examples[idx]));
      labels.push_back(dataset.examples[idx].label);
    }
    r.wa[i] = weighted_accuracy(preds, labels);
  });

  r.mean_wa = mean_of(r.wa);
  r.std_wa = population_std(r.wa);
  r.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

RunReport run_experiment(const Corpus& corpus, const ExperimentConfig& config) {
  if (!config.layer) throw ConfigError("run_experiment needs a single layer; use layer_sweep for all layers");
  try {
    const auto ds = assemble_dataset(corpus, config, *config.layer);
    return run_experiment(ds, config, *config.layer);
  } catch (const Error& e) {
    throw Error(e.kind(), e.message() + " [config " + fingerprint(config) + "]");
  }
}

bool SweepReport::all_ok() const {
  return std::all_of(rows.begin(), rows.end(), [](const SweepRow& r) { return r.report.has_value(); });
}

SweepReport layer_sweep(const Corpus& corpus, const ExperimentConfig& config, std::span<const Fusion> fusions) {
  validate_config(config);
  if (fusions.empty()) throw ConfigError("no fusion variants requested");
  std::vector<std::uint32_t> layers;
  if (config.layer) {
    layers.push_back(*config.layer);
  } else {
    const std::uint32_t n = config.feature == Feature::mel ? 1 : corpus.n_layers();
    for (std::uint32_t l = 0; l < n; ++l) layers.push_back(l);
  }

  SweepReport out;
  for (auto l : layers)
    for (auto f : fusions) out.rows.push_back({l, config.feature, f, std::nullopt, {}});

  // Runs inside each row stay sequential; rows are the parallel unit.
  parallel_for(out.rows.size(), config.jobs, [&](std::size_t i) {
    auto& row = out.rows[i];
    ExperimentConfig c = config;
    c.layer = row.layer;
    c.fusion = row.fusion;
    c.jobs = 1;
    try {
      row.report = run_experiment(corpus, c);
    } catch (const std::exception& e) {
      row.error = e.what();
      warn("layer " + std::to_string(row.layer) + " fusion " + to_string(row.fusion) + " failed: " + e.what());
    }
  });
  return out;
}

}  // namespace awe::ser
