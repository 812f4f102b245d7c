// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
// criterion fails. Details go to stdout after each verdict.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "awe/awe_builder.hpp"
#include "awe/error.hpp"
#include "awe/neighborhood.hpp"
#include "awe/nn.hpp"
#include "awe/report.hpp"
#include "awe/ser.hpp"
#include "awe/synth.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace awe;
using Entries = std::map<std::string, std::vector<double>>;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

std::string word_name(std::size_t i) {
  auto digits = std::to_string(i);
  return "w" + std::string(digits.size() < 4 ? 4 - digits.size() : 0, '0') + digits;
}

Entries gaussian_entries(std::size_t n, std::size_t dim, nn::Rng& rng) {
  Entries e;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> v(dim);
    for (auto& x : v) x = rng.normal();
    e.emplace(word_name(i), std::move(v));
  }
  return e;
}

// Vectors drawn from a small pool of integer directions and multiplied by
// powers of two, so many exact cosine ties occur.
Entries tied_entries(std::size_t n, std::size_t dim, nn::Rng& rng) {
  const std::size_t pool_size = 2 + rng.below(12);
  std::vector<std::vector<double>> pool;
  while (pool.size() < pool_size) {
    std::vector<double> v(dim);
    bool nonzero = false;
    for (auto& x : v) {
      x = static_cast<double>(rng.below(5)) - 2.0;
      nonzero = nonzero || x != 0.0;
    }
    if (nonzero) pool.push_back(std::move(v));
  }
  Entries e;
  for (std::size_t i = 0; i < n; ++i) {
    auto v = pool[rng.below(pool.size())];
    const double scale = std::ldexp(1.0, static_cast<int>(rng.below(4)));
    for (auto& x : v) x *= scale;
    e.emplace(word_name(i), std::move(v));
  }
  return e;
}

std::vector<std::string> words_of(const NeighborSet& s) {
  std::vector<std::string> out;
  for (const auto& n : s.neighbors) out.push_back(n.word);
  return out;
}

Verdict knn_oracle_equivalence() {
  const auto t0 = Clock::now();
  nn::Rng rng(2024);
  std::size_t queries = 0, mismatches = 0, tie_spaces = 0;
  for (int s = 0; s < 50; ++s) {
    const std::size_t n = 2 + rng.below(499);
    const std::size_t dim = 1 + rng.below(64);
    const bool ties = s % 3 == 0;
    tie_spaces += ties;
    auto entries = ties ? tied_entries(n, dim, rng) : gaussian_entries(n, dim, rng);
    EmbeddingSpace space(entries);
    for (const auto& w : space.words()) {
      const std::size_t k = 1 + rng.below(n - 1);
      ++queries;
      if (words_of(knn(w, space, k)) != oracle::knn(entries, w, k)) ++mismatches;
    }
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && secs < 60.0,
          "50 spaces (" + std::to_string(tie_spaces) + " with forced ties), " + std::to_string(queries) +
              " queries, " + std::to_string(mismatches) + " mismatches, " + fmt("%.1f s", secs) + " (limit 60 s)"};
}

// Scaling multiplies every coordinate, which rounds. When two neighbours tie
// exactly at the K boundary that rounding can break the tie either way, so
// tied spaces are scaled by powers of two (exact); generic factors are used
// on the tie-free Gaussian spaces. Tie flips under a generic factor are
// counted for information only.
Verdict lns_identity_and_bounds() {
  nn::Rng rng(99);
  std::size_t checks = 0, failures = 0, rounding_flips = 0;
  std::string first_failure;
  auto fail = [&](const std::string& what) {
    if (failures++ == 0) first_failure = what;
  };
  for (std::size_t v = 2; v <= 100; ++v) {
    const std::size_t dim = 1 + rng.below(12);
    const bool tied = v % 4 == 0;
    EmbeddingSpace a(gaussian_entries(v, dim, rng));
    EmbeddingSpace b(tied ? tied_entries(v, dim, rng) : gaussian_entries(v, dim, rng));
    const double factor = v % 2 ? 3.7 : 1e-3;
    const auto a_scaled = a.scaled(factor);
    const auto b_scaled = b.scaled(tied ? 8.0 : 1.0 / factor + 0.25);
    const auto b_generic = b.scaled(1000.25);
    for (const auto& w : a.words()) {
      for (std::size_t k = 1; k < v; ++k) {
        checks += 6;
        const std::string at = "|V|=" + std::to_string(v) + " w=" + w + " K=" + std::to_string(k);
        if (lns(w, a, a, k) != 1.0) fail("identity " + at);
        if (lns(w, b, b, k) != 1.0) fail("identity " + at);
        const double ab = lns(w, a, b, k);
        if (!(ab >= 0.0 && ab <= 1.0)) fail("bounds " + at);
        if (lns(w, b, a, k) != ab) fail("symmetry " + at);
        if (lns(w, a_scaled, b, k) != ab) fail("scaling A " + at);
        if (lns(w, a, b_scaled, k) != ab) fail("scaling B " + at);
        if (tied && lns(w, a, b_generic, k) != ab) ++rounding_flips;
      }
    }
  }
  return {failures == 0, "every |V| in 2..100, every word, every K in 1..|V|-1: " + std::to_string(checks) +
                             " checks, " + std::to_string(failures) + " failures" +
                             (failures ? " (first: " + first_failure + ")" : "") +
                             "; tied spaces under a non-power-of-two factor: " + std::to_string(rounding_flips) +
                             " rounding tie flips (informational)"};
}

// With independent random spaces the K-neighbour set of a word in one space
// is a uniform K-subset of the other |V|-1 words and independent of its set
// in the other space, so mean LNS has the hypergeometric Jaccard expectation.
// Each "layer" below is an independent space scored against one fixed
// lexical space; conditional on that space the layer means are i.i.d.
Verdict random_lns_calibration() {
  nn::Rng rng(314);
  const std::size_t vocab = 150, dim = 16, n_layers = 80;
  std::map<std::uint32_t, EmbeddingSpace> layers;
  for (std::uint32_t l = 0; l < n_layers; ++l) layers.emplace(l, EmbeddingSpace(gaussian_entries(vocab, dim, rng)));
  EmbeddingSpace lexical(gaussian_entries(vocab, dim, rng));
  const auto report = lns_layer_report(layers, lexical, kDefaultLnsKs);

  bool pass = true;
  std::ostringstream detail;
  detail << n_layers << " independent spaces, |V|=" << vocab << ":";
  for (std::size_t k : kDefaultLnsKs) {
    std::vector<double> means;
    for (const auto& row : report.rows)
      if (row.k == k) means.push_back(row.mean_lns);
    const double m = ser::mean_of(means);
    double ss = 0.0;
    for (double x : means) ss += (x - m) * (x - m);
    const double se = std::sqrt(ss / static_cast<double>(means.size() - 1)) / std::sqrt(static_cast<double>(means.size()));
    const double expected = oracle::expected_random_jaccard(static_cast<long>(vocab - 1), static_cast<long>(k));
    const double z = (m - expected) / se;
    const double naive = static_cast<double>(k) / static_cast<double>(vocab - 1);
    pass = pass && std::abs(z) <= 3.0;
    detail << "\n    K=" << k << " mean " << fmt("%.5f", m) << " expected " << fmt("%.5f", expected) << " z "
           << fmt("%+.2f", z) << "  [K/(|V|-1) = " << fmt("%.5f", naive) << ", z " << fmt("%+.1f", (m - naive) / se)
           << "]";
  }
  return {pass, detail.str()};
}

Verdict pooling_oracle() {
  // Part 1: build_awes against direct averages on random utterances whose
  // word boundaries sit on a 1 ms grid.
  nn::Rng rng(5150);
  const long stride = 20, window = 25;
  double worst = 0.0;
  std::size_t records = 0, span_mismatch = 0;
  for (int u = 0; u < 60; ++u) {
    const std::uint64_t n_frames = 1 + rng.below(150);
    const std::uint32_t n_layers = 13;
    const std::uint64_t dim = 1 + rng.below(24);
    LayeredUtterance utt;
    utt.id = "u" + std::to_string(u);
    utt.audio.dims = {n_layers, n_frames, dim};
    utt.audio.data.resize(n_layers * n_frames * dim);
    for (auto& x : utt.audio.data) x = static_cast<float>(rng.normal() * 3.0);
    const long duration_ms = static_cast<long>(n_frames - 1) * stride + window;
    std::vector<WordAlignment> words;
    long cursor = 0;
    while (cursor < duration_ms - 1 && words.size() < 30) {
      const long start = cursor + static_cast<long>(rng.below(40));
      if (start >= duration_ms - 1) break;
      const long end = std::min(duration_ms, start + 1 + static_cast<long>(rng.below(300)));
      words.push_back({"W" + std::to_string(words.size()), start / 1000.0, end / 1000.0,
                       static_cast<std::uint32_t>(words.size())});
      cursor = end;
    }
    std::vector<std::uint32_t> all_layers(n_layers);
    std::iota(all_layers.begin(), all_layers.end(), 0u);
    const auto recs = build_awes(utt, words, all_layers);
    for (const auto& r : recs) {
      const auto& w = words[r.token_index];
      const auto [first, last] = oracle::frame_span_ms(std::lround(w.start_s * 1000), std::lround(w.end_s * 1000),
                                                       stride, window, n_frames);
      if (r.n_frames_pooled != last - first) ++span_mismatch;
      for (std::uint64_t d = 0; d < dim; ++d) {
        double sum = 0.0;
        for (auto f = first; f < last; ++f) sum += utt.audio.data[(r.layer * n_frames + f) * dim + d];
        const double expected = sum / static_cast<double>(last - first);
        worst = std::max(worst, std::abs(expected - r.vector[d]) / std::max(1.0, std::abs(expected)));
      }
      ++records;
    }
  }

  // Part 2: every (start, end) pair on a 1 ms grid over a 2 s utterance.
  const std::uint64_t n_frames = 100;
  std::size_t pairs = 0, grid_mismatch = 0;
  for (long start = 0; start < 2000; ++start) {
    for (long end = start + 1; end <= 2000; ++end) {
      ++pairs;
      const auto got = time_to_frame_span(start / 1000.0, end / 1000.0, 0.020, 0.025, n_frames);
      const auto [first, last] = oracle::frame_span_ms(start, end, stride, window, n_frames);
      if (got.first != first || got.last != last) ++grid_mismatch;
    }
  }
  const bool pass = worst <= 1e-6 && span_mismatch == 0 && grid_mismatch == 0;
  return {pass, std::to_string(records) + " records, worst relative error " + fmt("%.2e", worst) +
                    " (limit 1e-6), " + std::to_string(span_mismatch) + " span mismatches; grid " +
                    std::to_string(pairs) + " pairs, " + std::to_string(grid_mismatch) + " mismatches"};
}

nn::Mat random_mat(Eigen::Index r, Eigen::Index c, nn::Rng& rng) {
  nn::Mat m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

void randomize_biases(nn::Model& m, nn::Rng& rng) {
  for (auto* b : {&m.mlp.b1, &m.mlp.b2, &m.mlp.b3}) *b = random_mat(b->rows(), 1, rng) * 0.1;
}

Verdict gradient_correctness() {
  const int seeds = 25;
  double worst[3] = {0, 0, 0};
  std::string where[3];
  auto track = [&](int path, const oracle::GradCheck& g, int seed) {
    if (g.max_rel_error > worst[path]) {
      worst[path] = g.max_rel_error;
      where[path] = g.worst + " seed " + std::to_string(seed);
    }
  };
  for (int seed = 0; seed < seeds; ++seed) {
    nn::Rng rng(7000 + seed);
    const std::size_t classes = 2 + rng.below(4);

    // Plain MLP on dense features.
    {
      const std::size_t d = 1 + rng.below(12);
      nn::ModelShape shape{.n_classes = classes, .hidden1 = 16, .hidden2 = 6, .input_dim = d};
      auto m = nn::Model::init(shape, seed);
      randomize_biases(m, rng);
      std::vector<nn::Example> batch(6);
      for (auto& ex : batch) {
        ex.features = random_mat(static_cast<Eigen::Index>(d), 1, rng);
        ex.label = rng.below(classes);
      }
      track(0, oracle::finite_difference_check(m, batch), seed);
    }
    // Concatenation fusion: pooled audio sequence joined with a text vector.
    {
      const std::size_t da = 1 + rng.below(8), dt = 1 + rng.below(8);
      nn::ModelShape shape{.n_classes = classes, .hidden1 = 16, .hidden2 = 6, .input_dim = da + dt};
      auto m = nn::Model::init(shape, seed + 100);
      randomize_biases(m, rng);
      std::vector<nn::Example> batch(6);
      for (auto& ex : batch) {
        nn::Mat audio = random_mat(static_cast<Eigen::Index>(1 + rng.below(5)), static_cast<Eigen::Index>(da), rng);
        nn::Mat text = random_mat(1, static_cast<Eigen::Index>(dt), rng);
        ex.features = nn::concat_fuse(nn::pool_sequence(audio), text.row(0).transpose());
        ex.label = rng.below(classes);
      }
      track(1, oracle::finite_difference_check(m, batch), seed);
    }
    // Bidirectional cross-attention feeding the classifier.
    {
      const std::size_t da = 1 + rng.below(6), dt = 1 + rng.below(6), dm = 2 + rng.below(7);
      nn::ModelShape shape{.n_classes = classes, .hidden1 = 12, .hidden2 = 5, .cross_attention = true,
                           .audio_dim = da, .text_dim = dt, .d_model = dm};
      auto m = nn::Model::init(shape, seed + 200);
      randomize_biases(m, rng);
      std::vector<nn::Example> batch(5);
      for (auto& ex : batch) {
        ex.audio_seq = random_mat(static_cast<Eigen::Index>(1 + rng.below(6)), static_cast<Eigen::Index>(da), rng);
        ex.text_seq = random_mat(static_cast<Eigen::Index>(1 + rng.below(4)), static_cast<Eigen::Index>(dt), rng);
        ex.label = rng.below(classes);
      }
      track(2, oracle::finite_difference_check(m, batch), seed);
    }
  }
  const bool pass = worst[0] <= 1e-4 && worst[1] <= 1e-4 && worst[2] <= 1e-4;
  return {pass, std::to_string(seeds) + " seeds per path; worst relative error mlp " + fmt("%.2e", worst[0]) +
                    " (" + where[0] + "), concat " + fmt("%.2e", worst[1]) + " (" + where[1] + "), xattn " +
                    fmt("%.2e", worst[2]) + " (" + where[2] + "); limit 1e-4"};
}

const std::vector<ser::Fusion> kFusions = {ser::Fusion::none, ser::Fusion::concat, ser::Fusion::cross_attention};

ser::ExperimentConfig base_config(const std::filesystem::path& manifest, ser::Feature feature,
                                  std::optional<std::uint32_t> layer) {
  ser::ExperimentConfig c;
  c.manifest_path = manifest;
  c.feature = feature;
  c.layer = layer;
  return c;
}

Verdict synthetic_ser(const TempDir& tmp) {
  synth::SynthConfig sc;  // 4 classes, 200 utterances, separation 5 x noise
  synth::generate_synthetic_corpus(sc, tmp / "sep5");
  sc.separation = 0.0;
  synth::generate_synthetic_corpus(sc, tmp / "sep0");
  const auto strong = ser::load_corpus(tmp / "sep5/manifest.json");
  const auto null = ser::load_corpus(tmp / "sep0/manifest.json");

  bool pass = true;
  std::ostringstream detail;
  const std::uint32_t layer = 9;
  for (auto feature : {ser::Feature::raw, ser::Feature::awe}) {
    const auto cfg = base_config(tmp / "sep5/manifest.json", feature, layer);
    const auto t0 = Clock::now();
    const auto sweep = ser::layer_sweep(strong, cfg, kFusions);
    const double secs = seconds_since(t0);
    pass = pass && sweep.all_ok() && secs < 300.0;
    detail << "\n    separation 5, " << ser::to_string(feature) << " layer " << layer << ": sweep "
           << fmt("%.1f s", secs) << " (limit 300 s)";
    for (const auto& row : sweep.rows) {
      const double wa = row.report ? row.report->mean_wa : 0.0;
      pass = pass && row.report && wa >= 0.95;
      detail << "; " << ser::to_string(row.fusion) << " " << fmt("%.3f", wa);
    }
  }
  // Chance is 1/4. A run's WA on n_test examples has binomial spread
  // sqrt(p(1-p)/n_test); the mean over runs divides that by sqrt(runs).
  for (auto feature : {ser::Feature::raw, ser::Feature::awe}) {
    const auto cfg = base_config(tmp / "sep0/manifest.json", feature, layer);
    const auto sweep = ser::layer_sweep(null, cfg, kFusions);
    pass = pass && sweep.all_ok();
    const double chance = 1.0 / static_cast<double>(null.n_classes());
    const auto n_test = null.utterances.size() - ser::split(null.utterances.size(), cfg.split_ratio, 1).train.size();
    const double se = std::sqrt(chance * (1 - chance) / static_cast<double>(n_test)) /
                      std::sqrt(static_cast<double>(cfg.n_runs));
    detail << "\n    separation 0, " << ser::to_string(feature) << ": chance " << fmt("%.3f", chance) << " +/- 3 x "
           << fmt("%.4f", se);
    for (const auto& row : sweep.rows) {
      const double wa = row.report ? row.report->mean_wa : -1.0;
      pass = pass && row.report && std::abs(wa - chance) <= 3.0 * se;
      detail << "; " << ser::to_string(row.fusion) << " " << fmt("%.3f", wa);
    }
  }
  return {pass, detail.str()};
}

// Shared by the planted-layer and report-shape criteria.
struct PlantedSweep {
  ser::SweepReport report;
  double seconds = 0.0;
};

PlantedSweep run_planted_sweep(const TempDir& tmp) {
  synth::SynthConfig sc;
  sc.signal_layers = {3};
  synth::generate_synthetic_corpus(sc, tmp / "planted");
  const auto corpus = ser::load_corpus(tmp / "planted/manifest.json");
  const auto t0 = Clock::now();
  PlantedSweep out;
  out.report = ser::layer_sweep(corpus, base_config(tmp / "planted/manifest.json", ser::Feature::awe, std::nullopt),
                                kFusions);
  out.seconds = seconds_since(t0);
  return out;
}

Verdict planted_layer(const PlantedSweep& sweep) {
  bool pass = sweep.report.all_ok();
  std::ostringstream detail;
  detail << "awe, 13 layers x 3 fusions, " << fmt("%.1f s", sweep.seconds);
  for (auto fusion : kFusions) {
    double planted = -1.0, best_other = -1.0;
    std::uint32_t best_other_layer = 0;
    for (const auto& row : sweep.report.rows) {
      if (row.fusion != fusion || !row.report) continue;
      if (row.layer == 3) planted = row.report->mean_wa;
      else if (row.report->mean_wa > best_other) {
        best_other = row.report->mean_wa;
        best_other_layer = row.layer;
      }
    }
    pass = pass && planted > best_other;
    detail << "\n    " << ser::to_string(fusion) << ": layer 3 " << fmt("%.3f", planted) << ", best other layer "
           << best_other_layer << " " << fmt("%.3f", best_other);
  }
  return {pass, detail.str()};
}

Verdict determinism(const TempDir& tmp) {
  // Two independently generated copies of the corpus, each run twice.
  synth::SynthConfig sc;
  sc.n_utterances = 120;
  sc.n_layers = 4;
  synth::generate_synthetic_corpus(sc, tmp / "det_a");
  synth::generate_synthetic_corpus(sc, tmp / "det_b");
  std::vector<std::string> sweep_csvs, run_csvs, files;
  for (const char* copy : {"det_a", "det_a", "det_b"}) {
    const auto manifest = tmp / (std::string(copy) + "/manifest.json");
    const auto corpus = ser::load_corpus(manifest);
    auto cfg = base_config(manifest, ser::Feature::awe, std::nullopt);
    cfg.train.epochs = 20;
    cfg.jobs = sweep_csvs.size() + 1;  // thread count must not matter
    const auto sweep = ser::layer_sweep(corpus, cfg, kFusions);
    sweep_csvs.push_back(report::sweep_csv(sweep));
    cfg.layer = 2;
    run_csvs.push_back(report::run_csv(ser::run_experiment(corpus, cfg)));
    const auto out = tmp / ("det_out_" + std::to_string(files.size()) + ".csv");
    report::emit_report(sweep, report::Format::plot_data, out);
    files.push_back(slurp(out) + slurp(out.string() + ".series.json"));
  }
  auto same = [](const std::vector<std::string>& v) { return v[0] == v[1] && v[1] == v[2]; };
  std::string differ;
  if (!same(sweep_csvs)) differ += " sweep-csv";
  if (!same(run_csvs)) differ += " run-csv";
  if (!same(files)) differ += " emitted-files";
  const bool pass = differ.empty();
  return {pass, "awe 4-layer sweep and single run, 20 epochs, 3 repetitions (two corpus copies, 1-3 worker threads): "
                "sweep CSV " + std::to_string(sweep_csvs[0].size()) + " bytes, run CSV " +
                    std::to_string(run_csvs[0].size()) + " bytes, emitted files " + std::to_string(files[0].size()) +
                    " bytes, " + (pass ? "all byte-identical" : "differ:" + differ)};
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

Verdict report_shapes(const TempDir& tmp, const PlantedSweep& planted) {
  const auto sweep_lines = split_lines(report::sweep_csv(planted.report));
  const std::size_t sweep_rows = sweep_lines.size() - 1;

  // LNS over a pooled store of the planted corpus.
  const auto manifest = load_manifest(tmp / "planted/manifest.json");
  std::vector<std::uint32_t> layers(manifest.n_layers);
  std::iota(layers.begin(), layers.end(), 0u);
  const auto store = build_awe_store(manifest, tmp / "planted", layers, tmp / "planted_store");
  const auto lexical = lexical_space_from_manifest(manifest, tmp / "planted");
  const auto lns = lns_layer_report(store, tmp / "planted_store", lexical, kDefaultLnsKs, 1);
  const auto lns_lines = split_lines(report::lns_csv(lns));
  bool lns_ok = lns_lines.size() == 53 && lns_lines[0] == "layer,K,mean_lns,vocab_size";
  for (std::size_t i = 1; i < lns_lines.size() && lns_ok; ++i) {
    const auto& r = lns.rows[i - 1];
    lns_ok = std::count(lns_lines[i].begin(), lns_lines[i].end(), ',') == 3 && r.layer == (i - 1) / 4 &&
             r.k == kDefaultLnsKs[(i - 1) % 4];
  }
  const bool pass = sweep_rows == 39 && lns.rows.size() == 52 && lns_ok;
  return {pass, "sweep CSV " + std::to_string(sweep_rows) + " data rows (expected 39); LNS " +
                    std::to_string(lns.rows.size()) + " rows (expected 52), header '" + lns_lines[0] + "'" +
                    (lns_ok ? ", rows ordered by (layer, K)" : ", schema/order mismatch")};
}

}  // namespace

int main() {
  TempDir tmp;
  int failed = 0;
  auto report_line = [&](const std::string& name, const std::function<Verdict()>& run) {
    const auto t0 = Clock::now();
    Verdict v;
    try {
      v = run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failed += !v.pass;
    std::cout << (v.pass ? "PASS " : "FAIL ") << name << "  [" << fmt("%.1f s", seconds_since(t0)) << "]\n    "
              << v.detail << '\n'
              << std::flush;
  };

  report_line("knn-oracle-equivalence", knn_oracle_equivalence);
  report_line("lns-identity-and-bounds", lns_identity_and_bounds);
  report_line("random-lns-calibration", random_lns_calibration);
  report_line("pooling-oracle", pooling_oracle);
  report_line("gradient-correctness", gradient_correctness);
  report_line("synthetic-ser-end-to-end", [&] { return synthetic_ser(tmp); });
  PlantedSweep planted;
  bool planted_ran = false;
  auto planted_sweep = [&]() -> const PlantedSweep& {
    if (!planted_ran) {
      planted = run_planted_sweep(tmp);
      planted_ran = true;
    }
    return planted;
  };
  report_line("planted-layer-sweep", [&] { return planted_layer(planted_sweep()); });
  report_line("determinism", [&] { return determinism(tmp); });
  report_line("report-shapes", [&] { return report_shapes(tmp, planted_sweep()); });

  std::cout << (failed ? std::to_string(failed) + " criteria failed\n" : "all criteria passed\n");
  return failed ? 1 : 0;
}
