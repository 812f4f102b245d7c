#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace awe::nn {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Dense classifier: softmax(W3' relu(W2' relu(W1' x + b1) + b2) + b3).
// Weights are stored [fan_in x fan_out]; biases are column vectors.
struct MlpParams {
  Mat w1, b1, w2, b2, w3, b3;

  std::size_t input_dim() const { return static_cast<std::size_t>(w1.rows()); }
  std::size_t n_classes() const { return static_cast<std::size_t>(w3.cols()); }
};

// Single-head bidirectional cross-attention. Both sides are projected to
// d_model; audio queries attend to text and text queries attend to audio.
struct CrossAttentionParams {
  Mat audio_proj;  // [d_audio x d_model]
  Mat text_proj;   // [d_text x d_model]
  Mat a2t_query, a2t_key, a2t_value;  // audio queries over text keys/values
  Mat t2a_query, t2a_key, t2a_value;  // text queries over audio keys/values

  std::size_t d_model() const { return static_cast<std::size_t>(audio_proj.cols()); }
};

struct ModelShape {
  std::size_t n_classes = 0;
  std::size_t hidden1 = 128;
  std::size_t hidden2 = 16;
  // Dense path: input dimension of the MLP.
  std::size_t input_dim = 0;
  // Cross-attention path: when set, the MLP input is the 2*d_model fused vector.
  bool cross_attention = false;
  std::size_t audio_dim = 0;
  std::size_t text_dim = 0;
  std::size_t d_model = 128;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t epochs = 100;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
};

// One training/evaluation example. Dense models read `features`; attention
// models read the two sequences (rows are time steps / tokens).
struct Example {
  Vec features;
  Mat audio_seq;
  Mat text_seq;
  std::size_t label = 0;
};

// Deterministic across standard libraries: draws come straight from the
// 64-bit engine rather than through <random> distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform();                     // [0, 1)
  double uniform(double lo, double hi);
  double normal();                      // Box-Muller
  std::size_t below(std::size_t n);     // [0, n)
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::mt19937_64 engine_;
};

class Model {
 public:
  MlpParams mlp;
  std::optional<CrossAttentionParams> attention;

  // Glorot-uniform weights, zero biases.
  static Model init(const ModelShape& shape, std::uint64_t seed);
  // Same structure, all zeros.
  Model zeros_like() const;

  // Every trainable tensor in a fixed order.
  std::vector<Mat*> tensors();
  std::vector<const Mat*> tensors() const;
  std::vector<std::string> tensor_names() const;

  // The vector the MLP consumes for this example.
  Vec classifier_input(const Example& ex) const;
  Vec predict_proba(const Example& ex) const;
  std::size_t predict(const Example& ex) const;
};

Vec softmax(const Vec& logits);
double log_sum_exp(const Vec& logits);

Vec mlp_logits(const Vec& x, const MlpParams& params);
Vec mlp_forward(const Vec& x, const MlpParams& params);

// -log(probs[label]).
double cross_entropy(const Vec& probs, std::size_t label);
// Same loss computed from logits in log space.
double cross_entropy_from_logits(const Vec& logits, std::size_t label);

Vec cross_attend(const Mat& audio_seq, const Mat& text_seq, const CrossAttentionParams& params);
Vec concat_fuse(const Vec& audio, const Vec& text);
Vec pool_sequence(const Mat& seq);

// Mean cross-entropy over the batch.
double batch_loss(const Model& model, std::span<const Example> batch);
// Analytic gradient of batch_loss; optionally reports the loss too.
Model backward(const Model& model, std::span<const Example> batch, double* loss = nullptr);

struct AdamState {
  std::vector<Mat> m;
  std::vector<Mat> v;
  std::uint64_t t = 0;

  static AdamState for_model(const Model& model);
};

void adam_step(Model& params, const Model& grads, AdamState& state, const TrainConfig& config);

// Seeds initialisation and minibatch order from config.seed.
Model train(std::span<const Example> examples, const ModelShape& shape, const TrainConfig& config);

}  // namespace awe::nn
