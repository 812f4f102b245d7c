#include <doctest.h>

#include <algorithm>
#include <set>

#include "awe/error.hpp"
#include "awe/report.hpp"
#include "awe/ser.hpp"
#include "awe/synth.hpp"
#include "test_util.hpp"

using namespace awe;
using namespace awe::ser;

namespace {

synth::SynthConfig tiny_synth() {
  synth::SynthConfig c;
  c.n_utterances = 40;
  c.n_layers = 4;
  c.dim = 8;
  c.vocab_size = 12;
  c.lexical_dim = 6;
  return c;
}

ExperimentConfig quick_config(const std::filesystem::path& manifest) {
  ExperimentConfig c;
  c.manifest_path = manifest;
  c.train.epochs = 15;
  c.hidden1 = 16;
  c.hidden2 = 8;
  c.d_model = 8;
  c.n_runs = 2;
  c.seeds = {1, 2};
  c.layer = 1;
  return c;
}

}  // namespace

TEST_CASE("split") {
  auto s = split(10, 0.8, 1);
  CHECK(s.train.size() == 8);
  CHECK(s.test.size() == 2);
  std::set<std::size_t> all(s.train.begin(), s.train.end());
  all.insert(s.test.begin(), s.test.end());
  CHECK(all.size() == 10);

  auto again = split(10, 0.8, 1);
  CHECK(again.train == s.train);
  CHECK(again.test == s.test);
  CHECK(split(10, 0.8, 2).train != s.train);

  auto floor_rule = split(10, 0.99, 3);
  CHECK(floor_rule.train.size() == 9);
  CHECK(floor_rule.test.size() == 1);

  CHECK_THROWS_AS(split(1, 0.8, 1), SplitError);
  CHECK_THROWS_AS(split(10, 0.05, 1), SplitError);
  CHECK_THROWS_AS(split(0, 0.5, 1), SplitError);
  CHECK_THROWS_AS(split(10, 1.0, 1), SplitError);
}

TEST_CASE("weighted_accuracy") {
  std::vector<std::size_t> labels = {0, 1, 2, 1};
  CHECK(weighted_accuracy(labels, labels) == 1.0);
  CHECK(weighted_accuracy(std::vector<std::size_t>{1, 0, 0, 0}, labels) == 0.0);
  CHECK(weighted_accuracy(std::vector<std::size_t>{0, 1, 2, 0}, labels) == 0.75);
  CHECK_THROWS_AS(weighted_accuracy(std::vector<std::size_t>{0}, labels), ShapeError);

  // A constant predictor scores the class frequency.
  std::vector<std::size_t> many = {0, 0, 1, 2, 1, 1, 3, 1, 0, 2};
  for (std::size_t k = 0; k < 4; ++k) {
    std::vector<std::size_t> constant(many.size(), k);
    const auto freq = static_cast<double>(std::count(many.begin(), many.end(), k)) / many.size();
    CHECK(weighted_accuracy(constant, many) == freq);
  }
}

TEST_CASE("mean and population std") {
  std::vector<double> xs = {0.5, 0.7, 0.9};
  CHECK(mean_of(xs) == doctest::Approx(0.7));
  CHECK(population_std(xs) == doctest::Approx(std::sqrt(0.08 / 3.0)));
}

TEST_CASE("config validation") {
  ExperimentConfig c;
  CHECK_NOTHROW(validate_config(c));
  c.feature = Feature::mel;
  c.fusion = Fusion::cross_attention;
  CHECK_THROWS_AS(validate_config(c), ConfigError);
  c.force_mel_cross_attention = true;
  CHECK_NOTHROW(validate_config(c));
  c = {};
  c.n_runs = 4;
  CHECK_THROWS_AS(validate_config(c), ConfigError);
  c = {};
  c.split_ratio = 1.0;
  CHECK_THROWS_AS(validate_config(c), ConfigError);
  c = {};
  c.train.learning_rate = 0;
  CHECK_THROWS_AS(validate_config(c), ConfigError);

  CHECK(parse_fusion("xattn") == Fusion::cross_attention);
  CHECK(parse_fusion("cross_attention") == Fusion::cross_attention);
  CHECK_THROWS_AS(parse_feature("hubert"), ConfigError);
}

TEST_CASE("fingerprint tracks result-affecting settings only") {
  ExperimentConfig a, b;
  CHECK(fingerprint(a) == fingerprint(b));
  b.jobs = 8;
  b.manifest_path = "/elsewhere/manifest.json";
  CHECK(fingerprint(a) == fingerprint(b));
  b.train.epochs = 99;
  CHECK(fingerprint(a) != fingerprint(b));
  CHECK(fingerprint(a).size() == 16);
}

TEST_CASE("synthetic corpus validates and is byte-identical per seed") {
  TempDir d1, d2, d3;
  auto cfg = tiny_synth();
  auto m = synth::generate_synthetic_corpus(cfg, d1.path());
  CHECK(validate_manifest(m, d1.path()).ok());
  synth::generate_synthetic_corpus(cfg, d2.path());
  for (const auto& u : m.utterances) {
    CHECK(slurp(d1 / u.audio_tensor_path) == slurp(d2 / u.audio_tensor_path));
    CHECK(slurp(d1 / u.alignment_path) == slurp(d2 / u.alignment_path));
    CHECK(slurp(d1 / u.lexical_tensor_path) == slurp(d2 / u.lexical_tensor_path));
  }
  CHECK(slurp(d1 / "manifest.json") == slurp(d2 / "manifest.json"));
  cfg.seed += 1;
  synth::generate_synthetic_corpus(cfg, d3.path());
  CHECK(slurp(d1 / m.utterances[0].audio_tensor_path) != slurp(d3 / m.utterances[0].audio_tensor_path));

  // A variety of shapes all validate.
  for (std::size_t classes : {1u, 3u, 9u}) {
    TempDir d;
    auto c = tiny_synth();
    c.n_classes = classes;
    c.dim = 4;  // fewer dims than classes uses random directions
    c.words_per_utt = 1 + classes % 3;
    c.separation = 0.0;
    CHECK(validate_manifest(synth::generate_synthetic_corpus(c, d.path()), d.path()).ok());
  }
}

TEST_CASE("assemble_dataset shapes") {
  TempDir dir;
  auto sc = tiny_synth();
  sc.n_utterances = 10;
  synth::generate_synthetic_corpus(sc, dir.path());
  auto corpus = load_corpus(dir / "manifest.json");
  auto cfg = quick_config(dir / "manifest.json");

  auto raw = assemble_dataset(corpus, cfg, 2);
  CHECK(raw.examples.size() == 10);
  CHECK(raw.shape.input_dim == 8);
  CHECK(raw.examples[3].label == 3 % 4);

  cfg.fusion = Fusion::concat;
  auto concat = assemble_dataset(corpus, cfg, 2);
  CHECK(concat.shape.input_dim == 8 + 6);

  cfg.feature = Feature::awe;
  cfg.fusion = Fusion::cross_attention;
  auto xattn = assemble_dataset(corpus, cfg, 2);
  CHECK(xattn.shape.cross_attention);
  CHECK(xattn.examples[0].audio_seq.rows() == 4);  // one row per aligned word
  CHECK(xattn.examples[0].audio_seq.cols() == 8);
  CHECK(xattn.shape.text_dim == 6);

  cfg.feature = Feature::mel;
  cfg.fusion = Fusion::none;
  auto mel = assemble_dataset(corpus, cfg, 0);
  CHECK(mel.shape.input_dim == 16);
  CHECK_THROWS_AS(assemble_dataset(corpus, cfg, 1), LayerError);

  cfg.feature = Feature::raw;
  CHECK_THROWS_AS(assemble_dataset(corpus, cfg, 4), LayerError);
}

TEST_CASE("awe feature skips utterances without aligned words") {
  TempDir dir;
  auto sc = tiny_synth();
  sc.n_utterances = 6;
  auto m = synth::generate_synthetic_corpus(sc, dir.path());
  save_alignments({}, dir / m.utterances[2].alignment_path);
  auto corpus = load_corpus(dir / "manifest.json");
  auto cfg = quick_config(dir / "manifest.json");
  cfg.feature = Feature::awe;
  auto ds = assemble_dataset(corpus, cfg, 0);
  CHECK(ds.examples.size() == 5);
  CHECK(ds.skipped == std::vector<std::string>{m.utterances[2].id});
}

TEST_CASE("missing mel stream is a configuration error") {
  TempDir dir;
  auto sc = tiny_synth();
  sc.n_utterances = 4;
  auto m = synth::generate_synthetic_corpus(sc, dir.path());
  m.utterances[1].mel_tensor_path.clear();
  save_manifest(m, dir / "manifest.json");
  auto corpus = load_corpus(dir / "manifest.json");
  auto cfg = quick_config(dir / "manifest.json");
  cfg.feature = Feature::mel;
  CHECK_THROWS_AS(assemble_dataset(corpus, cfg, 0), ConfigError);
}

TEST_CASE("load_corpus refuses an invalid manifest") {
  TempDir dir;
  auto sc = tiny_synth();
  sc.n_utterances = 3;
  auto m = synth::generate_synthetic_corpus(sc, dir.path());
  std::filesystem::remove(dir / m.utterances[0].audio_tensor_path);
  CHECK_THROWS_AS(load_corpus(dir / "manifest.json"), ConfigError);
}

TEST_CASE("run_experiment structure and determinism") {
  TempDir dir;
  synth::generate_synthetic_corpus(tiny_synth(), dir.path());
  auto corpus = load_corpus(dir / "manifest.json");
  auto cfg = quick_config(dir / "manifest.json");
  cfg.n_runs = 5;
  cfg.seeds = {1, 2, 3, 4, 5};

  auto r1 = run_experiment(corpus, cfg);
  REQUIRE(r1.wa.size() == 5);
  CHECK(r1.mean_wa == mean_of(r1.wa));
  CHECK(r1.std_wa == population_std(r1.wa));
  for (double wa : r1.wa) {
    CHECK(wa >= 0.0);
    CHECK(wa <= 1.0);
  }
  cfg.jobs = 3;
  auto r2 = run_experiment(corpus, cfg);
  CHECK(r2.wa == r1.wa);
  CHECK(report::run_csv(r1) == report::run_csv(r2));

  cfg.layer.reset();
  CHECK_THROWS_AS(run_experiment(corpus, cfg), ConfigError);
}

TEST_CASE("layer_sweep rows, ordering, failure marking and parallel equivalence") {
  TempDir dir;
  synth::generate_synthetic_corpus(tiny_synth(), dir.path());
  auto corpus = load_corpus(dir / "manifest.json");
  auto cfg = quick_config(dir / "manifest.json");
  cfg.layer.reset();
  cfg.train.epochs = 5;
  std::vector<Fusion> fusions = {Fusion::none, Fusion::concat, Fusion::cross_attention};

  cfg.jobs = 1;
  auto seq = layer_sweep(corpus, cfg, fusions);
  REQUIRE(seq.rows.size() == 12);
  CHECK(seq.all_ok());
  for (std::size_t i = 0; i < seq.rows.size(); ++i) {
    CHECK(seq.rows[i].layer == i / 3);
    CHECK(seq.rows[i].fusion == fusions[i % 3]);
  }
  cfg.jobs = 4;
  auto par = layer_sweep(corpus, cfg, fusions);
  CHECK(report::sweep_csv(par) == report::sweep_csv(seq));

  // Mel has a single layer; cross-attention is refused unless forced, and the
  // sweep marks those rows instead of aborting.
  cfg.feature = Feature::mel;
  cfg.force_mel_cross_attention = false;
  auto mel_rows = layer_sweep(corpus, cfg, std::vector<Fusion>{Fusion::none, Fusion::concat});
  CHECK(mel_rows.rows.size() == 2);
  CHECK(mel_rows.all_ok());

  // Break one layer: a corpus whose manifest claims more layers than a
  // utterance tensor has would not load, so fail via an impossible config.
  cfg.feature = Feature::raw;
  cfg.split_ratio = 0.01;
  auto failed = layer_sweep(corpus, cfg, std::vector<Fusion>{Fusion::none});
  CHECK(failed.rows.size() == 4);
  CHECK_FALSE(failed.all_ok());
  CHECK_FALSE(failed.rows[0].error.empty());
  auto csv = report::sweep_csv(failed);
  CHECK(csv.find(",failed") != std::string::npos);
}

TEST_CASE("report emitters") {
  RunReport r;
  r.fingerprint = "abc";
  r.layer = 3;
  r.wa = {0.5, 1.0};
  r.mean_wa = 0.75;
  r.std_wa = 0.25;
  CHECK(report::run_csv(r) ==
        "feature,fusion,layer,fingerprint,n_runs,mean_wa,std_wa,wa_per_seed\n"
        "raw,none,3,abc,2,0.750000,0.250000,0.500000;1.000000\n");

  SweepReport s;
  for (std::uint32_t l = 0; l < 13; ++l)
    for (auto f : {Fusion::none, Fusion::concat, Fusion::cross_attention}) {
      auto rr = r;
      rr.layer = l;
      rr.fusion = f;
      s.rows.push_back({l, Feature::awe, f, rr, {}});
    }
  auto csv = report::sweep_csv(s);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 40);
  CHECK(csv.rfind("layer,feature,fusion,mean_wa,std_wa,n_runs,wa_per_seed,status\n", 0) == 0);

  LnsReport lr;
  lr.ks = {5, 10};
  lr.rows = {{0, 5, 0.125, 60}, {0, 10, 0.25, 60}};
  CHECK(report::lns_csv(lr) == "layer,K,mean_lns,vocab_size\n0,5,0.125000,60\n0,10,0.250000,60\n");

  TempDir dir;
  report::emit_report(s, report::Format::plot_data, dir / "sweep.csv");
  report::emit_report(s, report::Format::plot_data, dir / "sweep2.csv");
  CHECK(slurp(dir / "sweep.csv") == slurp(dir / "sweep2.csv"));
  CHECK(slurp(dir / "sweep.csv.series.json") == slurp(dir / "sweep2.csv.series.json"));
  auto series = slurp(dir / "sweep.csv.series.json");
  CHECK(series.find("\"awe/xattn\"") != std::string::npos);
  report::emit_report(lr, report::Format::csv, dir / "lns.csv");
  CHECK(slurp(dir / "lns.csv") == report::lns_csv(lr));
  CHECK_FALSE(std::filesystem::exists(dir / "lns.csv.series.json"));
  CHECK_THROWS_AS(report::emit_report(lr, report::Format::csv, dir / "missing/dir/x.csv"), IoError);

  auto summary = report::sweep_summary_csv(s);
  CHECK(summary.find("awe,xattn,13,0,0.750000,0.750000,0.250000,0,0.750000") != std::string::npos);
}
