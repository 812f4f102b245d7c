// awe: command-line front end for corpus validation, AWE pooling, LNS
// analysis, SER experiments and synthetic corpus generation.

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "awe/awe_builder.hpp"
#include "awe/error.hpp"
#include "awe/manifest.hpp"
#include "awe/neighborhood.hpp"
#include "awe/report.hpp"
#include "awe/ser.hpp"
#include "awe/synth.hpp"

namespace fs = std::filesystem;
using namespace awe;

namespace {

template <typename T>
std::vector<T> parse_list(const std::string& text) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::istringstream is(item);
    T v;
    if (!(is >> v) || !is.eof()) throw ParameterError("bad list item '" + item + "'");
    out.push_back(v);
  }
  return out;
}

std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

EmbeddingSpace load_lexical(const fs::path& path, std::size_t min_count) {
  if (path.extension() == ".json") {
    auto m = load_manifest(path);
    return lexical_space_from_manifest(m, path.parent_path(), min_count);
  }
  return load_space(path, "lexical");
}

report::Format parse_format(const std::string& s) {
  if (s == "csv") return report::Format::csv;
  if (s == "plot-data") return report::Format::plot_data;
  throw ParameterError("unknown format '" + s + "' (csv|plot-data)");
}

int cmd_validate(const fs::path& manifest_path) {
  auto m = load_manifest(manifest_path);
  auto r = validate_manifest(m, manifest_path.parent_path());
  for (const auto& p : r.problems)
    std::cout << (p.utterance_id.empty() ? "<corpus>" : p.utterance_id) << "\t" << p.invariant << "\t" << p.detail
              << '\n';
  std::cout << m.utterances.size() << " utterances, " << r.problems.size() << " problem(s)\n";
  return r.ok() ? 0 : 1;
}

struct SerOptions {
  fs::path manifest;
  std::string feature = "raw";
  std::string fusion = "none";
  std::string layer = "all";
  std::size_t runs = 5;
  std::string seeds = "1,2,3,4,5";
  fs::path out = "ser_out";
  fs::path config;
  std::size_t epochs = 100;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  std::size_t hidden1 = 128, hidden2 = 16, d_model = 128;
  std::string text_vector = "token_mean";
  bool force_mel_xattn = false;
  std::size_t jobs = 0;
};

// Values in the config file take precedence over flags.
void apply_config_file(SerOptions& o) {
  if (o.config.empty()) return;
  std::ifstream in(o.config);
  if (!in) throw IoError("cannot open config " + o.config.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(o.config.string() + ": " + e.what());
  }
  auto str_or_num = [](const nlohmann::json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
  try {
    if (j.contains("manifest")) {
      fs::path p = j["manifest"].get<std::string>();
      o.manifest = p.is_absolute() ? p : o.config.parent_path() / p;
    }
    if (j.contains("feature")) o.feature = j["feature"];
    if (j.contains("fusion")) o.fusion = j["fusion"].is_array() ? [&] {
      std::string s;
      for (const auto& f : j["fusion"]) s += (s.empty() ? "" : ",") + f.get<std::string>();
      return s;
    }() : j["fusion"].get<std::string>();
    if (j.contains("layer")) o.layer = str_or_num(j["layer"]);
    if (j.contains("runs")) o.runs = j["runs"];
    if (j.contains("seeds")) {
      std::string s;
      for (const auto& v : j["seeds"]) s += (s.empty() ? "" : ",") + std::to_string(v.get<std::uint64_t>());
      o.seeds = s;
    }
    if (j.contains("epochs")) o.epochs = j["epochs"];
    if (j.contains("batch_size")) o.batch_size = j["batch_size"];
    if (j.contains("learning_rate")) o.learning_rate = j["learning_rate"];
    if (j.contains("hidden1")) o.hidden1 = j["hidden1"];
    if (j.contains("hidden2")) o.hidden2 = j["hidden2"];
    if (j.contains("d_model")) o.d_model = j["d_model"];
    if (j.contains("text_vector")) o.text_vector = j["text_vector"];
    if (j.contains("force_mel_xattn")) o.force_mel_xattn = j["force_mel_xattn"];
    if (j.contains("jobs")) o.jobs = j["jobs"];
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(o.config.string() + ": " + e.what());
  }
}

int cmd_ser(SerOptions o) {
  apply_config_file(o);
  if (o.manifest.empty()) throw ConfigError("--manifest is required");
  ser::ExperimentConfig c;
  c.manifest_path = o.manifest;
  c.feature = ser::parse_feature(o.feature);
  std::vector<ser::Fusion> fusions;
  for (const auto& f : split_words(o.fusion)) fusions.push_back(ser::parse_fusion(f));
  if (fusions.empty()) throw ConfigError("no fusion given");
  c.fusion = fusions.front();
  c.n_runs = o.runs;
  c.seeds = parse_list<std::uint64_t>(o.seeds);
  c.train.epochs = o.epochs;
  c.train.batch_size = o.batch_size;
  c.train.learning_rate = o.learning_rate;
  c.hidden1 = o.hidden1;
  c.hidden2 = o.hidden2;
  c.d_model = o.d_model;
  c.text_vector = ser::parse_text_vector(o.text_vector);
  c.force_mel_cross_attention = o.force_mel_xattn;
  c.jobs = o.jobs;
  for (auto f : fusions) {
    auto probe = c;
    probe.fusion = f;
    ser::validate_config(probe);
  }

  const auto corpus = ser::load_corpus(o.manifest);
  if (o.layer != "all") c.layer = parse_layer_list(o.layer, corpus.n_layers()).front();
  fs::create_directories(o.out);

  nlohmann::json meta = {{"manifest", o.manifest.string()}, {"feature", o.feature}, {"runs", nlohmann::json::array()}};
  int status = 0;
  if (c.layer && fusions.size() == 1) {
    const auto r = ser::run_experiment(corpus, c);
    report::emit_report(r, report::Format::csv, o.out / "run.csv");
    meta["runs"].push_back({{"layer", r.layer}, {"fusion", ser::to_string(r.fusion)}, {"fingerprint", r.fingerprint},
                            {"wall_time_s", r.wall_time_s}});
    std::cout << report::run_csv(r);
  } else {
    const auto s = ser::layer_sweep(corpus, c, fusions);
    report::emit_report(s, report::Format::plot_data, o.out / "sweep.csv");
    report::write_text(o.out / "sweep_summary.csv", report::sweep_summary_csv(s));
    for (const auto& row : s.rows) {
      nlohmann::json r = {{"layer", row.layer}, {"fusion", ser::to_string(row.fusion)}};
      if (row.report) {
        r["fingerprint"] = row.report->fingerprint;
        r["wall_time_s"] = row.report->wall_time_s;
      } else {
        r["error"] = row.error;
      }
      meta["runs"].push_back(r);
    }
    std::cout << report::sweep_csv(s);
    if (!s.all_ok()) status = 1;
  }
  report::write_text(o.out / "runs.json", meta.dump(2) + "\n");
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acoustic word embedding analysis toolkit"};
  app.require_subcommand(1);

  fs::path validate_manifest_path;
  auto* validate = app.add_subcommand("validate", "Check a corpus manifest and the files it references");
  validate->add_option("--manifest", validate_manifest_path, "Manifest path")->required();

  fs::path pool_manifest, pool_out;
  std::string pool_layers = "0..12";
  auto* pool = app.add_subcommand("pool", "Mean-pool aligned words into an AWE store");
  pool->add_option("--manifest", pool_manifest, "Manifest path")->required();
  pool->add_option("--layers", pool_layers, "Layers, e.g. 0..12, 3,9 or all")->capture_default_str();
  pool->add_option("--out", pool_out, "Output AWE store directory")->required();

  fs::path lns_store, lns_lexical, lns_out = "lns.csv";
  std::string lns_ks = "5,10,25,50", lns_format = "csv";
  std::size_t lns_min_count = 2;
  auto* lns_cmd = app.add_subcommand("lns", "Local Neighborhood Similarity per layer");
  lns_cmd->add_option("--awe-store", lns_store, "AWE store directory")->required();
  lns_cmd->add_option("--lexical", lns_lexical, "Lexical space: corpus manifest (.json) or saved space tensor")->required();
  lns_cmd->add_option("--k", lns_ks, "Neighbour counts")->capture_default_str();
  lns_cmd->add_option("--min-count", lns_min_count, "Minimum occurrences per word type")->capture_default_str();
  lns_cmd->add_option("--out", lns_out, "Output CSV")->capture_default_str();
  lns_cmd->add_option("--format", lns_format, "csv or plot-data")->capture_default_str();

  fs::path nb_store, nb_lexical;
  std::string nb_words;
  std::size_t nb_k = 5, nb_min_count = 1;
  std::uint32_t nb_layer = 9;
  auto* neighbors = app.add_subcommand("neighbors", "Closest acoustic and lexical neighbours of given words");
  neighbors->add_option("--awe-store", nb_store, "AWE store directory")->required();
  neighbors->add_option("--lexical", nb_lexical, "Lexical space: corpus manifest (.json) or saved space tensor")->required();
  neighbors->add_option("--words", nb_words, "Comma-separated words")->required();
  neighbors->add_option("--k", nb_k, "Neighbours per word")->capture_default_str();
  neighbors->add_option("--layer", nb_layer, "Acoustic layer")->capture_default_str();
  neighbors->add_option("--min-count", nb_min_count, "Minimum occurrences per word type")->capture_default_str();

  SerOptions so;
  auto* ser_cmd = app.add_subcommand("ser", "Speech emotion recognition experiment or layer sweep");
  ser_cmd->add_option("--manifest", so.manifest, "Manifest path");
  ser_cmd->add_option("--feature", so.feature, "mel, raw or awe")->capture_default_str();
  ser_cmd->add_option("--fusion", so.fusion, "none, concat, xattn (comma list for sweeps)")->capture_default_str();
  ser_cmd->add_option("--layer", so.layer, "Layer index or all")->capture_default_str();
  ser_cmd->add_option("--runs", so.runs, "Runs per configuration")->capture_default_str();
  ser_cmd->add_option("--seeds", so.seeds, "One seed per run")->capture_default_str();
  ser_cmd->add_option("--out", so.out, "Output directory")->capture_default_str();
  ser_cmd->add_option("--config", so.config, "JSON config; its values override flags");
  ser_cmd->add_option("--epochs", so.epochs, "Training epochs")->capture_default_str();
  ser_cmd->add_option("--batch-size", so.batch_size, "Minibatch size")->capture_default_str();
  ser_cmd->add_option("--lr", so.learning_rate, "Learning rate")->capture_default_str();
  ser_cmd->add_option("--hidden1", so.hidden1, "First hidden layer size")->capture_default_str();
  ser_cmd->add_option("--hidden2", so.hidden2, "Second hidden layer size")->capture_default_str();
  ser_cmd->add_option("--d-model", so.d_model, "Cross-attention model dimension")->capture_default_str();
  ser_cmd->add_option("--text-vector", so.text_vector, "token_mean or first_token")->capture_default_str();
  ser_cmd->add_flag("--force-mel-xattn", so.force_mel_xattn, "Allow mel + cross-attention");
  ser_cmd->add_option("--jobs", so.jobs, "Worker threads (0 = all cores)")->capture_default_str();

  synth::SynthConfig sc;
  fs::path synth_out;
  std::string signal_layers;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic layered corpus");
  synth_cmd->add_option("--classes", sc.n_classes)->capture_default_str();
  synth_cmd->add_option("--utts", sc.n_utterances)->capture_default_str();
  synth_cmd->add_option("--layers", sc.n_layers)->capture_default_str();
  synth_cmd->add_option("--dim", sc.dim)->capture_default_str();
  synth_cmd->add_option("--words-per-utt", sc.words_per_utt)->capture_default_str();
  synth_cmd->add_option("--noise", sc.noise_std)->capture_default_str();
  synth_cmd->add_option("--sep", sc.separation)->capture_default_str();
  synth_cmd->add_option("--vocab", sc.vocab_size)->capture_default_str();
  synth_cmd->add_option("--signal-layers", signal_layers, "Layers carrying class signal (default all)");
  synth_cmd->add_option("--seed", sc.seed)->capture_default_str();
  synth_cmd->add_option("--out", synth_out)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*validate) return cmd_validate(validate_manifest_path);

    if (*pool) {
      auto m = load_manifest(pool_manifest);
      auto layers = parse_layer_list(pool_layers, m.n_layers);
      auto store = build_awe_store(m, pool_manifest.parent_path(), layers, pool_out);
      std::cout << store.rows.size() << " word occurrences x " << store.layers.size() << " layers -> " << pool_out.string()
                << '\n';
      return 0;
    }

    if (*lns_cmd) {
      auto store = load_awe_store(lns_store);
      auto lexical = load_lexical(lns_lexical, lns_min_count);
      auto ks = parse_list<std::size_t>(lns_ks);
      auto r = lns_layer_report(store, lns_store, lexical, ks, lns_min_count);
      report::emit_report(r, parse_format(lns_format), lns_out);
      std::cout << report::lns_csv(r);
      return 0;
    }

    if (*neighbors) {
      auto store = load_awe_store(nb_store);
      auto records = store.load_layer(nb_store, nb_layer);
      auto acoustic = aggregate_word_types(records, nb_min_count, "acoustic L" + std::to_string(nb_layer));
      auto lexical = load_lexical(nb_lexical, nb_min_count);
      auto vocab = shared_vocabulary(acoustic, lexical);
      auto rows = neighbor_table(split_words(nb_words), acoustic.restricted_to(vocab), lexical.restricted_to(vocab), nb_k);
      std::cout << format_neighbor_table(rows);
      return 0;
    }

    if (*ser_cmd) return cmd_ser(so);

    if (*synth_cmd) {
      if (!signal_layers.empty()) sc.signal_layers = parse_layer_list(signal_layers, sc.n_layers);
      auto m = synth::generate_synthetic_corpus(sc, synth_out);
      std::cout << m.utterances.size() << " utterances -> " << (synth_out / "manifest.json").string() << '\n';
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
