#include "awe/synth.hpp"

#include <cmath>
#include <cstdio>

#include "awe/error.hpp"
#include "awe/nn.hpp"
#include "awe/tensor_store.hpp"

namespace awe::synth {

namespace fs = std::filesystem;

namespace {

using Vectors = std::vector<std::vector<double>>;

std::vector<double> gaussian(std::size_t dim, double scale, nn::Rng& rng) {
  std::vector<double> v(dim);
  for (auto& x : v) x = scale * rng.normal();
  return v;
}

// Class means with pairwise distance `distance`: scaled basis vectors when
// the dimension allows, otherwise scaled random unit directions.
Vectors class_means(std::size_t n_classes, std::size_t dim, double distance, nn::Rng& rng) {
  Vectors means(n_classes, std::vector<double>(dim, 0.0));
  if (dim >= n_classes) {
    for (std::size_t c = 0; c < n_classes; ++c) means[c][c] = distance / std::sqrt(2.0);
    return means;
  }
  for (auto& m : means) {
    m = gaussian(dim, 1.0, rng);
    double n = 0.0;
    for (double x : m) n += x * x;
    n = std::sqrt(n);
    for (auto& x : m) x *= distance / std::sqrt(2.0) / n;
  }
  return means;
}

std::string word_name(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "w%03zu", i);
  return buf;
}

std::string utt_name(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "utt%04zu", i);
  return buf;
}

}  // namespace

Manifest generate_synthetic_corpus(const SynthConfig& c, const fs::path& out_dir) {
  if (c.n_classes < 1 || c.n_utterances < 1 || c.n_layers < 1 || c.dim < 1 || c.words_per_utt < 1 ||
      c.vocab_size < 1 || c.lexical_dim < 1 || c.mel_dim < 1)
    throw ParameterError("synthetic corpus counts must be >= 1");
  if (!(c.separation >= 0.0) || !(c.noise_std >= 0.0)) throw ParameterError("separation and noise must be >= 0");
  for (auto l : c.signal_layers)
    if (l >= c.n_layers) throw LayerError("signal layer " + std::to_string(l) + " out of range");

  std::error_code ec;
  fs::create_directories(out_dir / "tensors", ec);
  fs::create_directories(out_dir / "alignments", ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

  nn::Rng rng(c.seed);
  const double distance = c.separation * c.noise_std;
  const auto means = class_means(c.n_classes, c.dim, distance, rng);
  const auto mel_means = class_means(c.n_classes, c.mel_dim, 0.5 * distance, rng);

  std::vector<double> signal(c.n_layers, c.signal_layers.empty() ? 1.0 : 0.0);
  for (auto l : c.signal_layers) signal[l] = 1.0;

  // Word identity vector shared across layers, plus one per layer; the mix
  // rotates from identity-dominated (shallow) to layer-specific (deep).
  Vectors word_identity(c.vocab_size), lexical(c.vocab_size);
  std::vector<Vectors> word_layer(c.vocab_size);
  const double word_scale = c.noise_std > 0 ? c.noise_std : 1.0;
  for (std::size_t w = 0; w < c.vocab_size; ++w) {
    word_identity[w] = gaussian(c.dim, word_scale, rng);
    for (std::uint32_t l = 0; l < c.n_layers; ++l) word_layer[w].push_back(gaussian(c.dim, word_scale, rng));
    lexical[w] = gaussian(c.lexical_dim, 1.0, rng);
  }
  std::vector<double> mix_a(c.n_layers), mix_b(c.n_layers);
  for (std::uint32_t l = 0; l < c.n_layers; ++l) {
    const double theta = c.n_layers > 1 ? 0.5 * M_PI * l / (c.n_layers - 1) : 0.0;
    mix_a[l] = std::cos(theta);
    mix_b[l] = std::sin(theta);
  }

  Manifest m;
  m.corpus_name = "synthetic-" + std::to_string(c.seed);
  m.n_layers = c.n_layers;
  m.frame_stride_s = c.stride_s;
  m.frame_window_s = c.window_s;
  for (std::size_t k = 0; k < c.n_classes; ++k) m.label_set.push_back("class" + std::to_string(k));
  m.lexical_layer = "synthetic";

  for (std::size_t u = 0; u < c.n_utterances; ++u) {
    const std::size_t label = u % c.n_classes;
    const std::string id = utt_name(u);

    // Layout on the frame grid: one lead-in frame, then words of 2-4 frames
    // separated by 0-1 frame gaps, then one trailing frame.
    std::vector<std::size_t> words(c.words_per_utt);
    std::vector<std::size_t> first_frame(c.words_per_utt), n_word_frames(c.words_per_utt);
    std::size_t frame = 1;
    for (std::size_t i = 0; i < c.words_per_utt; ++i) {
      words[i] = rng.below(c.vocab_size);
      first_frame[i] = frame;
      n_word_frames[i] = 2 + rng.below(3);
      frame += n_word_frames[i] + rng.below(2);
    }
    const std::size_t n_frames = frame + 1;

    std::vector<long> frame_word(n_frames, -1);
    for (std::size_t i = 0; i < c.words_per_utt; ++i)
      for (std::size_t f = first_frame[i]; f < first_frame[i] + n_word_frames[i]; ++f) frame_word[f] = static_cast<long>(words[i]);

    std::vector<float> audio;
    audio.reserve(c.n_layers * n_frames * c.dim);
    for (std::uint32_t l = 0; l < c.n_layers; ++l)
      for (std::size_t f = 0; f < n_frames; ++f)
        for (std::size_t j = 0; j < c.dim; ++j) {
          double x = signal[l] * means[label][j] + c.noise_std * rng.normal();
          if (frame_word[f] >= 0) {
            const auto w = static_cast<std::size_t>(frame_word[f]);
            x += mix_a[l] * word_identity[w][j] + mix_b[l] * word_layer[w][l][j];
          }
          audio.push_back(static_cast<float>(x));
        }

    std::vector<float> mel;
    mel.reserve(n_frames * c.mel_dim);
    for (std::size_t f = 0; f < n_frames; ++f)
      for (std::size_t j = 0; j < c.mel_dim; ++j)
        mel.push_back(static_cast<float>(mel_means[label][j] + c.noise_std * rng.normal()));

    std::vector<float> lex;
    std::vector<std::vector<std::uint32_t>> groups;
    std::uint32_t row = 0;
    for (auto w : words) {
      const std::size_t pieces = (c.subtoken_every > 0 && w % c.subtoken_every == 0) ? 2 : 1;
      std::vector<std::uint32_t> g;
      for (std::size_t p = 0; p < pieces; ++p) {
        for (std::size_t j = 0; j < c.lexical_dim; ++j)
          lex.push_back(static_cast<float>(lexical[w][j] + 0.1 * rng.normal()));
        g.push_back(row++);
      }
      groups.push_back(std::move(g));
    }

    std::vector<WordAlignment> aligns;
    std::string transcript;
    for (std::size_t i = 0; i < c.words_per_utt; ++i) {
      WordAlignment a;
      a.word = word_name(words[i]);
      // Start just past the preceding frame's window tail so the word pools
      // exactly its own frames.
      a.start_s = static_cast<double>(first_frame[i]) * c.stride_s + (c.window_s - c.stride_s) + 0.2 * c.stride_s;
      a.end_s = static_cast<double>(first_frame[i] + n_word_frames[i]) * c.stride_s;
      a.token_index = static_cast<std::uint32_t>(i);
      aligns.push_back(a);
      transcript += (i ? " " : "") + a.word;
    }

    const std::string audio_rel = "tensors/" + id + ".audio.awet";
    const std::string mel_rel = "tensors/" + id + ".mel.awet";
    const std::string lex_rel = "tensors/" + id + ".lex.awet";
    const std::string align_rel = "alignments/" + id + ".jsonl";
    write_tensor({c.n_layers, n_frames, c.dim}, audio, out_dir / audio_rel);
    write_tensor({1, n_frames, c.mel_dim}, mel, out_dir / mel_rel);
    write_tensor({row, c.lexical_dim}, lex, out_dir / lex_rel);
    save_alignments(aligns, out_dir / align_rel);

    UtteranceEntry e;
    e.id = id;
    e.audio_tensor_path = audio_rel;
    e.lexical_tensor_path = lex_rel;
    e.alignment_path = align_rel;
    e.mel_tensor_path = mel_rel;
    e.label = m.label_set[label];
    e.transcript = transcript;
    e.n_frames = n_frames;
    e.lexical_groups = std::move(groups);
    m.utterances.push_back(std::move(e));
  }
  save_manifest(m, out_dir / "manifest.json");
  return m;
}

}  // namespace awe::synth
