#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "awe/manifest.hpp"

namespace awe::synth {

// Desk-scale stand-in for an extracted corpus. Frame vectors at layer l are
//   signal(l) * class_mean + word_component(word, l) + noise_std * N(0, I)
// where class means sit `separation * noise_std` apart pairwise, signal(l)
// is 1 on the signal layers and 0 elsewhere, and the word component mixes a
// word-identity vector with a layer-specific one at a layer-dependent angle.
// Lexical vectors are per word type plus small per-occurrence context noise
// and carry no label information.
struct SynthConfig {
  std::size_t n_classes = 4;
  std::size_t n_utterances = 200;
  std::uint32_t n_layers = 13;
  std::size_t dim = 32;
  std::size_t words_per_utt = 4;
  double noise_std = 1.0;
  double separation = 5.0;
  std::uint64_t seed = 7;
  std::size_t vocab_size = 60;
  std::size_t lexical_dim = 32;
  std::size_t mel_dim = 16;
  // Layers carrying class signal; empty means every layer.
  std::vector<std::uint32_t> signal_layers;
  // Every n-th vocabulary word is split into two lexical sub-tokens (0 = never).
  std::size_t subtoken_every = 7;
  double stride_s = 0.020;
  double window_s = 0.025;
};

// Writes manifest.json, tensors/ and alignments/ under out_dir and returns
// the manifest. Same config => byte-identical files.
Manifest generate_synthetic_corpus(const SynthConfig& config, const std::filesystem::path& out_dir);

}  // namespace awe::synth
