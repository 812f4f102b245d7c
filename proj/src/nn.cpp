#include "awe/nn.hpp"

#include <cmath>
#include <numeric>

#include "awe/error.hpp"

namespace awe::nn {

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

std::size_t Rng::below(std::size_t n) {
  // Rejection sampling keeps the draw unbiased.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do x = engine_();
  while (x >= limit);
  return static_cast<std::size_t>(x % n);
}

namespace {

Mat glorot(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Mat m(fan_in, fan_out);
  // Row-major fill order so the draw sequence does not depend on storage order.
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = rng.uniform(-limit, limit);
  return m;
}

void check_finite(const Mat& m, const char* what) {
  if (!m.allFinite()) throw NumericError(std::string(what) + " contains non-finite values");
}

Mat relu(const Mat& z) { return z.cwiseMax(0.0); }

// Row-wise softmax of a score matrix.
Mat softmax_rows(const Mat& s) {
  Mat p = s;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    const double mx = p.row(i).maxCoeff();
    p.row(i) = (p.row(i).array() - mx).exp();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

struct AttentionDirection {
  Mat q, k, p;  // queries, keys, attention weights
  Vec p_mean;   // column means of p: pooling weights over keys
};

struct AttentionTrace {
  AttentionDirection a2t, t2a;
  Vec fused;
};

// Each projection W only ever acts after the input projection P, so the
// products P*W are formed once and sequences are projected in one step.
struct Combined {
  Mat a2t_q, a2t_k, a2t_v, t2a_q, t2a_k, t2a_v;
};

Combined combine(const CrossAttentionParams& p) {
  return {p.audio_proj * p.a2t_query, p.text_proj * p.a2t_key,  p.text_proj * p.a2t_value,
          p.text_proj * p.t2a_query,  p.audio_proj * p.t2a_key, p.audio_proj * p.t2a_value};
}

// mean_rows(softmax(Q K^T / sqrt(d)) V) == p_mean^T V, so V is never formed.
AttentionDirection attend(const Mat& query_src, const Mat& kv_src, const Mat& mq, const Mat& mk, const Mat& mv,
                          Eigen::Ref<Vec> pooled) {
  AttentionDirection d;
  d.q = query_src * mq;
  d.k = kv_src * mk;
  const double scale = 1.0 / std::sqrt(static_cast<double>(mq.cols()));
  d.p = softmax_rows((d.q * d.k.transpose()) * scale);
  d.p_mean = d.p.colwise().mean().transpose();
  pooled = ((d.p_mean.transpose() * kv_src) * mv).transpose();
  return d;
}

void check_sequences(const Mat& audio, const Mat& text, const CrossAttentionParams& p) {
  if (audio.rows() < 1 || text.rows() < 1) throw SequenceError("cross-attention needs non-empty sequences");
  if (audio.cols() != p.audio_proj.rows())
    throw ShapeError("audio rows have dim " + std::to_string(audio.cols()) + ", projection expects " +
                     std::to_string(p.audio_proj.rows()));
  if (text.cols() != p.text_proj.rows())
    throw ShapeError("text rows have dim " + std::to_string(text.cols()) + ", projection expects " +
                     std::to_string(p.text_proj.rows()));
  check_finite(audio, "audio sequence");
  check_finite(text, "text sequence");
}

AttentionTrace attention_forward(const Mat& audio, const Mat& text, const CrossAttentionParams& p, const Combined& c) {
  check_sequences(audio, text, p);
  AttentionTrace t;
  const auto dm = static_cast<Eigen::Index>(p.d_model());
  t.fused.resize(2 * dm);
  t.a2t = attend(audio, text, c.a2t_q, c.a2t_k, c.a2t_v, t.fused.head(dm));
  t.t2a = attend(text, audio, c.t2a_q, c.t2a_k, c.t2a_v, t.fused.tail(dm));
  return t;
}

// Gradients with respect to the combined matrices of one direction.
struct DirectionGrad {
  Mat d_mq, d_mk, d_mv;
};

DirectionGrad attend_backward(const AttentionDirection& d, const Mat& query_src, const Mat& kv_src, const Mat& mq,
                              const Mat& mv, const Vec& d_pooled) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(mq.cols()));
  const auto nq = static_cast<double>(d.q.rows());
  // Every row of d(out) is d_pooled / nq, so d(P) has identical rows u.
  Vec u = kv_src * (mv * d_pooled) / nq;
  Vec row_dot = d.p * u;
  Mat d_s = d.p.array().rowwise() * u.transpose().array() - d.p.array().colwise() * row_dot.array();
  DirectionGrad g;
  g.d_mq = ((query_src.transpose() * d_s) * d.k) * scale;
  g.d_mk = ((kv_src.transpose() * d_s.transpose()) * d.q) * scale;
  g.d_mv = (kv_src.transpose() * d.p_mean) * d_pooled.transpose();
  return g;
}

}  // namespace

Model Model::init(const ModelShape& shape, std::uint64_t seed) {
  if (shape.n_classes < 2) throw ParameterError("need at least 2 classes");
  if (shape.hidden1 < 1 || shape.hidden2 < 1) throw ParameterError("hidden sizes must be >= 1");
  Rng rng(seed);
  Model m;
  std::size_t d_in = shape.input_dim;
  if (shape.cross_attention) {
    if (shape.audio_dim < 1 || shape.text_dim < 1 || shape.d_model < 1)
      throw ParameterError("cross-attention needs audio, text and model dims >= 1");
    const auto dm = shape.d_model;
    CrossAttentionParams a;
    a.audio_proj = glorot(shape.audio_dim, dm, rng);
    a.text_proj = glorot(shape.text_dim, dm, rng);
    a.a2t_query = glorot(dm, dm, rng);
    a.a2t_key = glorot(dm, dm, rng);
    a.a2t_value = glorot(dm, dm, rng);
    a.t2a_query = glorot(dm, dm, rng);
    a.t2a_key = glorot(dm, dm, rng);
    a.t2a_value = glorot(dm, dm, rng);
    m.attention = std::move(a);
    d_in = 2 * dm;
  }
  if (d_in < 1) throw ParameterError("input dimension must be >= 1");
  m.mlp.w1 = glorot(d_in, shape.hidden1, rng);
  m.mlp.b1 = Mat::Zero(shape.hidden1, 1);
  m.mlp.w2 = glorot(shape.hidden1, shape.hidden2, rng);
  m.mlp.b2 = Mat::Zero(shape.hidden2, 1);
  m.mlp.w3 = glorot(shape.hidden2, shape.n_classes, rng);
  m.mlp.b3 = Mat::Zero(shape.n_classes, 1);
  return m;
}

Model Model::zeros_like() const {
  Model z = *this;
  for (auto* t : z.tensors()) t->setZero();
  return z;
}

std::vector<Mat*> Model::tensors() {
  std::vector<Mat*> out = {&mlp.w1, &mlp.b1, &mlp.w2, &mlp.b2, &mlp.w3, &mlp.b3};
  if (attention) {
    auto& a = *attention;
    out.insert(out.end(), {&a.audio_proj, &a.text_proj, &a.a2t_query, &a.a2t_key, &a.a2t_value, &a.t2a_query,
                           &a.t2a_key, &a.t2a_value});
  }
  return out;
}

std::vector<const Mat*> Model::tensors() const {
  auto mut = const_cast<Model*>(this)->tensors();
  return {mut.begin(), mut.end()};
}

std::vector<std::string> Model::tensor_names() const {
  std::vector<std::string> out = {"mlp.w1", "mlp.b1", "mlp.w2", "mlp.b2", "mlp.w3", "mlp.b3"};
  if (attention)
    out.insert(out.end(), {"attn.audio_proj", "attn.text_proj", "attn.a2t_query", "attn.a2t_key", "attn.a2t_value",
                           "attn.t2a_query", "attn.t2a_key", "attn.t2a_value"});
  return out;
}

Vec Model::classifier_input(const Example& ex) const {
  if (attention) return cross_attend(ex.audio_seq, ex.text_seq, *attention);
  return ex.features;
}

Vec Model::predict_proba(const Example& ex) const { return mlp_forward(classifier_input(ex), mlp); }

std::size_t Model::predict(const Example& ex) const {
  Vec logits = mlp_logits(classifier_input(ex), mlp);
  Eigen::Index best = 0;
  logits.maxCoeff(&best);
  return static_cast<std::size_t>(best);
}

double log_sum_exp(const Vec& logits) {
  const double mx = logits.maxCoeff();
  return mx + std::log((logits.array() - mx).exp().sum());
}

Vec softmax(const Vec& logits) { return (logits.array() - log_sum_exp(logits)).exp().matrix(); }

Vec mlp_logits(const Vec& x, const MlpParams& p) {
  if (static_cast<std::size_t>(x.size()) != p.input_dim())
    throw ShapeError("input has dim " + std::to_string(x.size()) + ", classifier expects " +
                     std::to_string(p.input_dim()));
  check_finite(x, "classifier input");
  Vec h1 = relu(p.w1.transpose() * x + p.b1);
  Vec h2 = relu(p.w2.transpose() * h1 + p.b2);
  return p.w3.transpose() * h2 + p.b3;
}

Vec mlp_forward(const Vec& x, const MlpParams& p) { return softmax(mlp_logits(x, p)); }

double cross_entropy(const Vec& probs, std::size_t label) {
  if (label >= static_cast<std::size_t>(probs.size()))
    throw LabelError("label " + std::to_string(label) + " outside " + std::to_string(probs.size()) + " classes");
  return -std::log(probs(static_cast<Eigen::Index>(label)));
}

double cross_entropy_from_logits(const Vec& logits, std::size_t label) {
  if (label >= static_cast<std::size_t>(logits.size()))
    throw LabelError("label " + std::to_string(label) + " outside " + std::to_string(logits.size()) + " classes");
  return log_sum_exp(logits) - logits(static_cast<Eigen::Index>(label));
}

Vec cross_attend(const Mat& audio_seq, const Mat& text_seq, const CrossAttentionParams& params) {
  return attention_forward(audio_seq, text_seq, params, combine(params)).fused;
}

Vec concat_fuse(const Vec& audio, const Vec& text) {
  check_finite(audio, "audio vector");
  check_finite(text, "text vector");
  Vec out(audio.size() + text.size());
  out << audio, text;
  return out;
}

Vec pool_sequence(const Mat& seq) {
  if (seq.rows() < 1) throw SequenceError("cannot pool an empty sequence");
  return seq.colwise().mean().transpose();
}

double batch_loss(const Model& model, std::span<const Example> batch) {
  if (batch.empty()) throw ParameterError("empty batch");
  double total = 0.0;
  for (const auto& ex : batch) total += cross_entropy_from_logits(mlp_logits(model.classifier_input(ex), model.mlp), ex.label);
  return total / static_cast<double>(batch.size());
}

namespace {

// `batch` is any random-access range of `const Example*`-like handles.
template <typename Batch>
Model backward_impl(const Model& model, const Batch& batch, double* loss) {
  if (batch.empty()) throw ParameterError("empty batch");
  const auto n = static_cast<Eigen::Index>(batch.size());
  const auto& p = model.mlp;
  const auto d_in = static_cast<Eigen::Index>(p.input_dim());
  const auto n_classes = static_cast<Eigen::Index>(p.n_classes());

  std::vector<AttentionTrace> traces;
  Combined comb;
  if (model.attention) comb = combine(*model.attention);
  Mat x(n, d_in);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Example& ex = *batch[static_cast<std::size_t>(i)];
    if (ex.label >= static_cast<std::size_t>(n_classes)) throw LabelError("label out of range");
    if (model.attention) {
      traces.push_back(attention_forward(ex.audio_seq, ex.text_seq, *model.attention, comb));
      x.row(i) = traces.back().fused.transpose();
    } else {
      if (ex.features.size() != d_in) throw ShapeError("example feature dimension differs from classifier input");
      check_finite(ex.features, "classifier input");
      x.row(i) = ex.features.transpose();
    }
  }

  // Rows are examples throughout.
  Mat z1 = (x * p.w1).rowwise() + p.b1.transpose().row(0);
  Mat h1 = relu(z1);
  Mat z2 = (h1 * p.w2).rowwise() + p.b2.transpose().row(0);
  Mat h2 = relu(z2);
  Mat z3 = (h2 * p.w3).rowwise() + p.b3.transpose().row(0);

  Mat d_z3(n, n_classes);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    Vec logits = z3.row(i).transpose();
    const auto label = static_cast<Eigen::Index>(batch[static_cast<std::size_t>(i)]->label);
    total += log_sum_exp(logits) - logits(label);
    Vec probs = softmax(logits);
    probs(label) -= 1.0;
    d_z3.row(i) = probs.transpose() / static_cast<double>(n);
  }
  if (loss) *loss = total / static_cast<double>(n);

  Model g = model.zeros_like();
  g.mlp.w3 = h2.transpose() * d_z3;
  g.mlp.b3 = d_z3.colwise().sum().transpose();
  Mat d_z2 = (d_z3 * p.w3.transpose()).array() * (z2.array() > 0.0).cast<double>();
  g.mlp.w2 = h1.transpose() * d_z2;
  g.mlp.b2 = d_z2.colwise().sum().transpose();
  Mat d_z1 = (d_z2 * p.w2.transpose()).array() * (z1.array() > 0.0).cast<double>();
  g.mlp.w1 = x.transpose() * d_z1;
  g.mlp.b1 = d_z1.colwise().sum().transpose();

  if (model.attention) {
    const auto& a = *model.attention;
    auto& ga = *g.attention;
    const auto dm = static_cast<Eigen::Index>(a.d_model());
    Mat d_x = d_z1 * p.w1.transpose();
    Combined dc{Mat::Zero(comb.a2t_q.rows(), dm), Mat::Zero(comb.a2t_k.rows(), dm), Mat::Zero(comb.a2t_v.rows(), dm),
                Mat::Zero(comb.t2a_q.rows(), dm), Mat::Zero(comb.t2a_k.rows(), dm), Mat::Zero(comb.t2a_v.rows(), dm)};
    for (Eigen::Index i = 0; i < n; ++i) {
      const Example& ex = *batch[static_cast<std::size_t>(i)];
      const auto& t = traces[static_cast<std::size_t>(i)];
      Vec d_fused = d_x.row(i).transpose();
      auto g1 = attend_backward(t.a2t, ex.audio_seq, ex.text_seq, comb.a2t_q, comb.a2t_v, d_fused.head(dm));
      auto g2 = attend_backward(t.t2a, ex.text_seq, ex.audio_seq, comb.t2a_q, comb.t2a_v, d_fused.tail(dm));
      dc.a2t_q += g1.d_mq;
      dc.a2t_k += g1.d_mk;
      dc.a2t_v += g1.d_mv;
      dc.t2a_q += g2.d_mq;
      dc.t2a_k += g2.d_mk;
      dc.t2a_v += g2.d_mv;
    }
    ga.a2t_query = a.audio_proj.transpose() * dc.a2t_q;
    ga.a2t_key = a.text_proj.transpose() * dc.a2t_k;
    ga.a2t_value = a.text_proj.transpose() * dc.a2t_v;
    ga.t2a_query = a.text_proj.transpose() * dc.t2a_q;
    ga.t2a_key = a.audio_proj.transpose() * dc.t2a_k;
    ga.t2a_value = a.audio_proj.transpose() * dc.t2a_v;
    ga.audio_proj = dc.a2t_q * a.a2t_query.transpose() + dc.t2a_k * a.t2a_key.transpose() +
                    dc.t2a_v * a.t2a_value.transpose();
    ga.text_proj = dc.a2t_k * a.a2t_key.transpose() + dc.a2t_v * a.a2t_value.transpose() +
                   dc.t2a_q * a.t2a_query.transpose();
  }
  return g;
}

}  // namespace

Model backward(const Model& model, std::span<const Example> batch, double* loss) {
  std::vector<const Example*> ptrs;
  ptrs.reserve(batch.size());
  for (const auto& ex : batch) ptrs.push_back(&ex);
  return backward_impl(model, ptrs, loss);
}

AdamState AdamState::for_model(const Model& model) {
  AdamState s;
  for (const auto* t : model.tensors()) {
    s.m.push_back(Mat::Zero(t->rows(), t->cols()));
    s.v.push_back(Mat::Zero(t->rows(), t->cols()));
  }
  return s;
}

void adam_step(Model& params, const Model& grads, AdamState& state, const TrainConfig& c) {
  auto ps = params.tensors();
  auto gs = grads.tensors();
  if (ps.size() != gs.size() || ps.size() != state.m.size() || ps.size() != state.v.size())
    throw ShapeError("parameter, gradient and optimizer state structures differ");
  ++state.t;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const Mat& g = *gs[i];
    if (g.rows() != ps[i]->rows() || g.cols() != ps[i]->cols()) throw ShapeError("gradient shape mismatch");
    state.m[i] = c.beta1 * state.m[i] + (1.0 - c.beta1) * g;
    state.v[i] = c.beta2 * state.v[i] + (1.0 - c.beta2) * g.cwiseProduct(g);
    auto m_hat = state.m[i].array() / bc1;
    auto v_hat = state.v[i].array() / bc2;
    ps[i]->array() -= c.learning_rate * m_hat / (v_hat.sqrt() + c.epsilon);
  }
}

Model train(std::span<const Example> examples, const ModelShape& shape, const TrainConfig& config) {
  if (examples.empty()) throw ParameterError("no training examples");
  if (config.batch_size < 1 || config.epochs < 1 || !(config.learning_rate >= 0))
    throw ParameterError("invalid training configuration");
  Model model = Model::init(shape, config.seed);
  AdamState state = AdamState::for_model(model);
  // Separate stream for minibatch order so it does not shift with model size.
  Rng order_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<const Example*> batch;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    order_rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const auto end = std::min(order.size(), start + config.batch_size);
      batch.clear();
      for (auto i = start; i < end; ++i) batch.push_back(&examples[order[i]]);
      adam_step(model, backward_impl(model, batch, nullptr), state, config);
    }
  }
  return model;
}

}  // namespace awe::nn
