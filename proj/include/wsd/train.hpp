#pragma once

// Training: example generation, MSE loss, dropout, hand-derived
// backpropagation through time, and RMSprop over every weight including
// both embedding tables.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

#include "wsd/corpus.hpp"
#include "wsd/decode.hpp"
#include "wsd/embeddings.hpp"
#include "wsd/errors.hpp"
#include "wsd/model.hpp"
#include "wsd/numkit.hpp"

namespace wsd {

struct HyperParams {
  std::size_t left_context = 15;
  std::size_t right_context = 15;
  std::size_t embedding_size = 100;
  std::size_t hidden_size = 50;  // per direction
  double dropout_embedding = 0.20;
  double dropout_lstm_output = 0.50;
  double dropout_fc = 0.50;
  double word_dropout = 0.20;
  double learning_rate = 1e-3;
  double rms_decay = 0.9;
  double rms_epsilon = 1e-8;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 100;
  std::size_t patience = 5;
  double validation_fraction = 0.05;
  std::uint64_t seed = 1;

  void validate() const {
    const auto prob = [](double p, const char* name) {
      if (!(p >= 0.0 && p < 1.0)) throw ConfigError(std::string(name) + " must be in [0, 1), got " + std::to_string(p));
    };
    prob(dropout_embedding, "dropout_embedding");
    prob(dropout_lstm_output, "dropout_lstm_output");
    prob(dropout_fc, "dropout_fc");
    prob(word_dropout, "word_dropout");
    if (left_context == 0 || right_context == 0) throw ConfigError("context sizes must be positive");
    if (embedding_size == 0 || hidden_size == 0) throw ConfigError("layer sizes must be positive");
    if (batch_size == 0 || max_epochs == 0) throw ConfigError("batch_size and max_epochs must be positive");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (!(rms_decay >= 0.0 && rms_decay < 1.0)) throw ConfigError("rms_decay must be in [0, 1)");
    if (!(rms_epsilon > 0.0)) throw ConfigError("rms_epsilon must be positive");
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
      throw ConfigError("validation_fraction must be in (0, 1)");
  }
};

struct TrainingExample {
  SenseId sense = 0;
  ContextWindow window;
  double target = 0.0;  // 1 for a gold sense, 0 otherwise
};

/// One positive example per gold candidate and one negative per other
/// candidate, all sharing the instance's window.
inline std::vector<TrainingExample> generate_examples(const Instance& inst, const SenseInventory& inv,
                                                      const Vocabulary& vocab, const HyperParams& hp) {
  const ContextWindow w = make_window(inst, vocab, hp.left_context, hp.right_context);
  std::vector<TrainingExample> out;
  for (SenseId s : inv.candidates(inst.lexelt)) {
    const bool gold = std::find(inst.gold.begin(), inst.gold.end(), inv.sense_name(s)) != inst.gold.end();
    out.push_back({s, w, gold ? 1.0 : 0.0});
  }
  return out;
}

inline double mse_loss(double y, double target) { return (y - target) * (y - target); }
inline double mse_grad(double y, double target) { return 2.0 * (y - target); }

/// Samples inverted-dropout masks for every dropout site. Sites whose rate
/// is 0 are left empty (unmasked).
inline DropoutMasks sample_dropout_masks(std::size_t dim, std::size_t L, std::size_t R, std::size_t encoding_len,
                                         std::size_t hidden_len, const HyperParams& hp, Rng& rng) {
  DropoutMasks m;
  if (hp.dropout_embedding > 0.0) {
    const double keep = 1.0 - hp.dropout_embedding;
    m.sense = bernoulli_mask(rng, dim, keep);
    for (std::size_t k = 0; k < L; ++k) m.left_words.push_back(bernoulli_mask(rng, dim, keep));
    for (std::size_t k = 0; k < R; ++k) m.right_words.push_back(bernoulli_mask(rng, dim, keep));
  }
  if (hp.dropout_lstm_output > 0.0) m.encoding = bernoulli_mask(rng, encoding_len, 1.0 - hp.dropout_lstm_output);
  if (hp.dropout_fc > 0.0) m.hidden = bernoulli_mask(rng, hidden_len, 1.0 - hp.dropout_fc);
  return m;
}

inline DropoutMasks sample_dropout_masks(const NetworkParams& p, const HyperParams& hp, Rng& rng) {
  return sample_dropout_masks(p.embedding_size(), p.variant.left_context, p.variant.right_context,
                              p.head.hidden_weights.cols(), p.head.hidden_weights.rows(), hp, rng);
}

/// Replaces each non-PAD position by PAD with probability `rate`.
inline ContextWindow apply_word_dropout(const ContextWindow& w, double rate, Rng& rng) {
  ContextWindow out = w;
  if (rate <= 0.0) return out;
  for (auto* side : {&out.left, &out.right})
    for (WordId& id : *side)
      if (id != kPadId && rng.uniform01() < rate) id = kPadId;
  return out;
}

/// Gradients with the shape of NetworkParams. Embedding gradients are sparse:
/// only columns touched by the examples are present.
struct Gradients {
  std::map<WordId, Vector> words;
  std::map<SenseId, Vector> senses;
  LstmParams left;
  LstmParams right;
  DenseParams left_fc;
  DenseParams right_fc;
  HeadParams head;

  static Gradients zeros_like(const NetworkParams& p) {
    Gradients g;
    g.left = LstmParams(p.left.hidden(), p.left.input_dim());
    g.right = LstmParams(p.right.hidden(), p.right.input_dim());
    g.left_fc = {Matrix(p.left_fc.weights.rows(), p.left_fc.weights.cols()), Vector(p.left_fc.bias.size(), 0.0)};
    g.right_fc = {Matrix(p.right_fc.weights.rows(), p.right_fc.weights.cols()), Vector(p.right_fc.bias.size(), 0.0)};
    g.head = {Matrix(p.head.hidden_weights.rows(), p.head.hidden_weights.cols()),
              Vector(p.head.hidden_bias.size(), 0.0), Vector(p.head.output_weights.size(), 0.0), 0.0};
    return g;
  }

  /// Zeroes every entry, keeping shapes and allocations.
  void clear() {
    words.clear();
    senses.clear();
    for (LstmParams* l : {&left, &right}) {
      l->input_weights.fill(0.0);
      l->recurrent_weights.fill(0.0);
      std::fill(l->bias.begin(), l->bias.end(), 0.0);
    }
    for (DenseParams* d : {&left_fc, &right_fc}) {
      d->weights.fill(0.0);
      std::fill(d->bias.begin(), d->bias.end(), 0.0);
    }
    head.hidden_weights.fill(0.0);
    std::fill(head.hidden_bias.begin(), head.hidden_bias.end(), 0.0);
    std::fill(head.output_weights.begin(), head.output_weights.end(), 0.0);
    head.output_bias = 0.0;
  }

  void add(const Gradients& o, double scale = 1.0) {
    for (const auto& [id, v] : o.words) axpy(words[id], v, scale);
    for (const auto& [id, v] : o.senses) axpy(senses[id], v, scale);
    Gradients& self = *this;
    zip_blocks(self, o, [scale](std::span<double> a, std::span<const double> b) {
      for (std::size_t i = 0; i < a.size(); ++i) a[i] += scale * b[i];
    });
  }

  void scale(double s) {
    for (auto& [id, v] : words) for (double& x : v) x *= s;
    for (auto& [id, v] : senses) for (double& x : v) x *= s;
    Gradients& self = *this;
    zip_blocks(self, self, [s](std::span<double> a, std::span<const double>) {
      for (double& x : a) x *= s;
    });
  }

  /// Calls f(block of g, same block of p) for every dense block, in a fixed
  /// order. P may be Gradients or NetworkParams.
  template <typename G, typename P, typename F>
  static void zip_blocks(G& g, P& p, F&& f) {
    const auto both = [&](auto&& a, auto&& b) { f(std::span(a), std::span(b)); };
    both(g.left.input_weights.data(), p.left.input_weights.data());
    both(g.left.recurrent_weights.data(), p.left.recurrent_weights.data());
    both(g.left.bias, p.left.bias);
    both(g.right.input_weights.data(), p.right.input_weights.data());
    both(g.right.recurrent_weights.data(), p.right.recurrent_weights.data());
    both(g.right.bias, p.right.bias);
    both(g.left_fc.weights.data(), p.left_fc.weights.data());
    both(g.left_fc.bias, p.left_fc.bias);
    both(g.right_fc.weights.data(), p.right_fc.weights.data());
    both(g.right_fc.bias, p.right_fc.bias);
    both(g.head.hidden_weights.data(), p.head.hidden_weights.data());
    both(g.head.hidden_bias, p.head.hidden_bias);
    both(g.head.output_weights, p.head.output_weights);
    f(std::span(&g.head.output_bias, 1), std::span(&p.head.output_bias, 1));
  }

 private:
  static void axpy(Vector& a, const Vector& b, double s) {
    if (a.empty()) a.assign(b.size(), 0.0);
    for (std::size_t i = 0; i < b.size(); ++i) a[i] += s * b[i];
  }
};

namespace detail {

inline void lstm_backward(const LstmParams& p, const LstmTrace& tr, std::span<const double> seq,
                          std::span<const double> d_final, LstmParams& g, std::span<double> d_seq) {
  const std::size_t H = p.hidden();
  const std::size_t T = tr.gates.size();
  Vector dh(d_final.begin(), d_final.end());
  Vector dc(H, 0.0), da(4 * H), zero(H, 0.0);
  for (std::size_t t = T; t-- > 0;) {
    const Vector& gates = tr.gates[t];
    const Vector& c = tr.cells[t];
    const Vector& c_prev = t > 0 ? tr.cells[t - 1] : zero;
    const Vector& h_prev = t > 0 ? tr.hiddens[t - 1] : zero;
    for (std::size_t j = 0; j < H; ++j) {
      const double i = gates[kInputGate * H + j];
      const double f = gates[kForgetGate * H + j];
      const double o = gates[kOutputGate * H + j];
      const double gg = gates[kCandidate * H + j];
      const double tc = std::tanh(c[j]);
      dc[j] += dh[j] * o * (1.0 - tc * tc);
      da[kInputGate * H + j] = dc[j] * gg * i * (1.0 - i);
      da[kForgetGate * H + j] = dc[j] * c_prev[j] * f * (1.0 - f);
      da[kOutputGate * H + j] = dh[j] * tc * o * (1.0 - o);
      da[kCandidate * H + j] = dc[j] * i * (1.0 - gg * gg);
      dc[j] *= f;
    }
    const double x = seq[tr.positions[t]];
    add_outer(g.input_weights, da, std::span<const double>(&x, 1));
    add_outer(g.recurrent_weights, da, h_prev);
    for (std::size_t k = 0; k < da.size(); ++k) g.bias[k] += da[k];
    d_seq[tr.positions[t]] += matvec_transposed(p.input_weights, da)[0];
    dh = matvec_transposed(p.recurrent_weights, da);
  }
}

inline void dense_backward(const DenseParams& p, const DenseTrace& tr, std::span<const double> x,
                           std::span<const double> d_out, DenseParams& g, std::span<double> d_x) {
  Vector dpre(d_out.size());
  for (std::size_t j = 0; j < dpre.size(); ++j) dpre[j] = tr.pre[j] > 0.0 ? d_out[j] : 0.0;
  add_outer(g.weights, dpre, x);
  for (std::size_t j = 0; j < dpre.size(); ++j) g.bias[j] += dpre[j];
  const Vector dx = matvec_transposed(p.weights, dpre);
  for (std::size_t k = 0; k < dx.size(); ++k) d_x[k] += dx[k];
}

// d cos(a, b) / da = b / (|a||b|) - cos * a / |a|^2. Zero-norm operands give
// zero gradient, matching cos = 0 there.
inline void cosine_backward(std::span<const double> a, std::span<const double> b, double dcos,
                            std::span<double> da, std::span<double> db) {
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    ab += a[k] * b[k];
    aa += a[k] * a[k];
    bb += b[k] * b[k];
  }
  if (aa == 0.0 || bb == 0.0 || dcos == 0.0) return;
  const double na = std::sqrt(aa), nb = std::sqrt(bb);
  const double inv = 1.0 / (na * nb);
  const double c = ab * inv;
  for (std::size_t k = 0; k < a.size(); ++k) {
    da[k] += dcos * (b[k] * inv - c * a[k] / aa);
    db[k] += dcos * (a[k] * inv - c * b[k] / bb);
  }
}

}  // namespace detail

/// Accumulates into `g` the exact gradient of mse_loss(ŷ, target) for the
/// forward pass recorded in `trace` (same parameters, same dropout masks).
inline void backward_into(const NetworkParams& p, double target, const ForwardTrace& tr, Gradients& g) {
  const auto& v = p.variant;
  const std::size_t L = v.left_context, R = v.right_context;
  const std::size_t d = p.embedding_size();
  if (tr.window.left.size() != L || tr.window.right.size() != R || tr.left_cos.size() != L ||
      tr.right_cos.size() != R || tr.left_vecs.size() != L || tr.right_vecs.size() != R ||
      tr.sense_vec.size() != d || tr.encoding.size() != p.head.hidden_weights.cols() ||
      tr.hidden_pre.size() != p.head.hidden_weights.rows())
    throw StateError("forward trace does not match network parameters");

  const double y = tr.output;
  const double dlogit = mse_grad(y, target) * y * (1.0 - y);

  // Output unit and fully-connected layer.
  for (std::size_t j = 0; j < tr.hidden_dropped.size(); ++j) g.head.output_weights[j] += dlogit * tr.hidden_dropped[j];
  g.head.output_bias += dlogit;
  Vector dpre(tr.hidden_pre.size());
  for (std::size_t j = 0; j < dpre.size(); ++j) {
    double dh = dlogit * p.head.output_weights[j];
    if (!tr.masks.hidden.empty()) dh *= tr.masks.hidden[j];
    dpre[j] = tr.hidden_pre[j] > 0.0 ? dh : 0.0;
  }
  add_outer(g.head.hidden_weights, dpre, tr.encoding_dropped);
  for (std::size_t j = 0; j < dpre.size(); ++j) g.head.hidden_bias[j] += dpre[j];
  Vector denc = matvec_transposed(p.head.hidden_weights, dpre);
  if (!tr.masks.encoding.empty()) hadamard_inplace(denc, tr.masks.encoding);

  // Sequence encoders.
  const std::size_t H = denc.size() / 2;
  const std::span<const double> dl(denc.data(), H), dr(denc.data() + H, H);
  Vector dlc(L, 0.0), drc(R, 0.0);
  if (v.mode == ArchMode::fc_instead_of_blstm) {
    detail::dense_backward(p.left_fc, tr.left_fc, tr.left_cos, dl, g.left_fc, dlc);
    detail::dense_backward(p.right_fc, tr.right_fc, tr.right_cos, dr, g.right_fc, drc);
  } else {
    detail::lstm_backward(p.left, tr.left_lstm, tr.left_cos, dl, g.left, dlc);
    detail::lstm_backward(p.right, tr.right_lstm, tr.right_cos, dr, g.right, drc);
  }

  // Cosine layer and embedding lookups.
  Vector dsense(d, 0.0), dword(d);
  const auto side = [&](const std::vector<WordId>& ids, const std::vector<Vector>& vecs, const Vector& dcos,
                        const std::vector<Vector>& masks) {
    for (std::size_t m = 0; m < ids.size(); ++m) {
      if (ids[m] == kPadId || dcos[m] == 0.0) continue;
      std::fill(dword.begin(), dword.end(), 0.0);
      detail::cosine_backward(tr.sense_vec, vecs[m], dcos[m], dsense, dword);
      if (!masks.empty()) hadamard_inplace(dword, masks[m]);
      Vector& acc = g.words[ids[m]];
      if (acc.empty()) acc.assign(d, 0.0);
      for (std::size_t k = 0; k < d; ++k) acc[k] += dword[k];
    }
  };
  side(tr.window.left, tr.left_vecs, dlc, tr.masks.left_words);
  side(tr.window.right, tr.right_vecs, drc, tr.masks.right_words);
  if (!tr.masks.sense.empty()) hadamard_inplace(dsense, tr.masks.sense);
  Vector& sacc = g.senses[tr.sense];
  if (sacc.empty()) sacc.assign(d, 0.0);
  for (std::size_t k = 0; k < d; ++k) sacc[k] += dsense[k];
}

inline Gradients backward(const NetworkParams& p, double target, const ForwardTrace& tr) {
  Gradients g = Gradients::zeros_like(p);
  backward_into(p, target, tr, g);
  return g;
}

/// Squared-gradient accumulators. Embedding columns are decayed lazily: a
/// column's accumulator is brought up to date (multiplied by ρ per elapsed
/// step) only when the column receives a gradient, which equals the dense
/// update because a zero gradient leaves the weight itself unchanged.
struct OptimizerState {
  std::uint64_t step = 0;
  EmbeddingTable words;
  EmbeddingTable senses;
  std::vector<std::uint64_t> word_step;
  std::vector<std::uint64_t> sense_step;
  Gradients dense;  // dense accumulators; its sparse maps stay empty

  static OptimizerState init(const NetworkParams& p) {
    OptimizerState s;
    s.words = EmbeddingTable(TableKind::word, p.words.dim(), p.words.width());
    s.senses = EmbeddingTable(TableKind::sense, p.senses.dim(), p.senses.width());
    s.word_step.assign(p.words.width(), 0);
    s.sense_step.assign(p.senses.width(), 0);
    s.dense = Gradients::zeros_like(p);
    return s;
  }

  /// Accumulator of one embedding entry as of the current step.
  double table_accumulator(TableKind kind, std::size_t col, std::size_t k, double rho) const {
    const auto& t = kind == TableKind::word ? words : senses;
    const auto last = kind == TableKind::word ? word_step[col] : sense_step[col];
    return t.column(col)[k] * std::pow(rho, double(step - last));
  }
};

namespace detail {

inline void rms_update(std::span<double> w, std::span<const double> g, std::span<double> acc, double lr, double rho,
                       double eps) {
  for (std::size_t i = 0; i < w.size(); ++i) {
    acc[i] = rho * acc[i] + (1.0 - rho) * g[i] * g[i];
    w[i] -= lr * g[i] / (std::sqrt(acc[i]) + eps);
  }
}

}  // namespace detail

/// acc ← ρ·acc + (1-ρ)·g²;  w ← w - lr·g / (√acc + ε)
inline void rmsprop_step(NetworkParams& p, const Gradients& g, OptimizerState& st, const HyperParams& hp) {
  const double lr = hp.learning_rate, rho = hp.rms_decay, eps = hp.rms_epsilon;
  ++st.step;
  // Dense blocks: walk params, grads and accumulators in lockstep.
  std::vector<std::span<double>> acc_blocks;
  std::vector<std::span<const double>> grad_blocks;
  Gradients::zip_blocks(st.dense, g, [&](std::span<double> a, std::span<const double> gb) {
    acc_blocks.push_back(a);
    grad_blocks.push_back(gb);
  });
  std::size_t k = 0;
  Gradients::zip_blocks(p, g, [&](std::span<double> w, std::span<const double>) {
    if (w.size() != acc_blocks[k].size() || w.size() != grad_blocks[k].size())
      throw ShapeError("rmsprop_step: gradient shape does not match parameters");
    detail::rms_update(w, grad_blocks[k], acc_blocks[k], lr, rho, eps);
    ++k;
  });

  const auto sparse = [&](EmbeddingTable& table, EmbeddingTable& acc, std::vector<std::uint64_t>& last,
                          const std::map<std::uint32_t, Vector>& grads) {
    for (const auto& [col, gv] : grads) {
      if (!table.trainable(col)) continue;
      auto a = acc.column(col);
      const double decay = std::pow(rho, double(st.step - 1 - last[col]));
      if (decay != 1.0)
        for (double& x : a) x *= decay;
      detail::rms_update(table.column(col), gv, a, lr, rho, eps);
      last[col] = st.step;
    }
  };
  sparse(p.words, st.words, st.word_step, g.words);
  sparse(p.senses, st.senses, st.sense_step, g.senses);
}

struct EpochRecord {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double val_f = 0.0;
  double elapsed_seconds = 0.0;
  double val_loss = 0.0;  // not part of the log line
};

/// `epoch,mean_loss,val_f,elapsed_seconds`
inline std::string format_epoch_record(const EpochRecord& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%zu,%.9f,%.6f,%.3f", r.epoch, r.mean_loss, r.val_f, r.elapsed_seconds);
  return buf;
}

/// Mean MSE over every (instance, candidate) example, without dropout.
inline double validation_loss(const NetworkParams& p, const std::vector<Instance>& instances,
                              const SenseInventory& inv, const Vocabulary& vocab, const HyperParams& hp) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& inst : instances) {
    const ContextWindow w = window_for(p, inst, vocab);
    for (const auto& ex : generate_examples(inst, inv, vocab, hp)) {
      sum += mse_loss(score_sense(p, ex.sense, w), ex.target);
      ++n;
    }
  }
  return n ? sum / double(n) : 0.0;
}

struct TrainOptions {
  std::size_t threads = 1;
  bool record_timing = false;  // false writes 0 for elapsed time, keeping logs reproducible
  std::function<void(const EpochRecord&)> on_epoch;
  std::function<void(const EpochRecord&, const NetworkParams&)> inspect;  // parameters at the end of each epoch
};

struct TrainResult {
  NetworkParams params;  // best-validation parameters
  std::vector<EpochRecord> log;
  std::size_t best_epoch = 0;
};

namespace detail {

struct ExampleRef {
  std::size_t instance;
  SenseId sense;
  double target;
};

template <typename F>
void parallel_for(std::size_t n, std::size_t threads, F&& f) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < n; i += threads) f(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace detail

/// Minibatch RMSprop on MSE over all (instance, candidate) examples.
/// Validation F is computed after every epoch; the best parameters (highest
/// F, ties going to the lower validation loss) are kept and training stops
/// after `patience` epochs without improvement.
/// Every random draw comes from a stream keyed by (seed, epoch, example
/// slot) and per-example gradients are summed in example order, so the
/// result does not depend on the thread count.
inline TrainResult train(NetworkParams params, const std::vector<Instance>& train_set,
                         const std::vector<Instance>& validation, const Vocabulary& vocab,
                         const SenseInventory& inv, const HyperParams& hp, const TrainOptions& opts = {}) {
  hp.validate();
  if (train_set.empty()) throw ConfigError("training set is empty");
  validate_instances(train_set, inv);

  std::vector<ContextWindow> windows;
  std::vector<detail::ExampleRef> examples;
  windows.reserve(train_set.size());
  for (std::size_t i = 0; i < train_set.size(); ++i) {
    windows.push_back(window_for(params, train_set[i], vocab));
    for (const auto& ex : generate_examples(train_set[i], inv, vocab, hp))
      examples.push_back({i, ex.sense, ex.target});
  }

  const auto t0 = std::chrono::steady_clock::now();
  OptimizerState opt = OptimizerState::init(params);
  const std::size_t B = hp.batch_size;
  std::vector<Gradients> slots(std::min(B, examples.size()), Gradients::zeros_like(params));
  std::vector<double> slot_loss(slots.size());
  Gradients batch = Gradients::zeros_like(params);

  TrainResult result;
  result.params = params;
  double best_f = -1.0;
  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;

  std::vector<std::size_t> order(examples.size());
  for (std::size_t epoch = 1; epoch <= hp.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng = Rng::derive(hp.seed, epoch, 0x5348);
    shuffle_rng.shuffle(order);

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += B) {
      const std::size_t n = std::min(B, order.size() - start);
      detail::parallel_for(n, opts.threads, [&](std::size_t k) {
        const auto& ex = examples[order[start + k]];
        Rng rng = Rng::derive(hp.seed, epoch, 1 + start + k);
        const ContextWindow w = apply_word_dropout(windows[ex.instance], hp.word_dropout, rng);
        const DropoutMasks masks = sample_dropout_masks(params, hp, rng);
        ForwardTrace tr;
        const double y = score_sense(params, ex.sense, w, &masks, &tr);
        slot_loss[k] = mse_loss(y, ex.target);
        slots[k].clear();
        backward_into(params, ex.target, tr, slots[k]);
      });
      batch.clear();
      for (std::size_t k = 0; k < n; ++k) {
        loss_sum += slot_loss[k];
        batch.add(slots[k]);
      }
      if (!std::isfinite(loss_sum))
        throw NumericalError("training diverged: non-finite loss in epoch " + std::to_string(epoch));
      batch.scale(1.0 / double(n));
      rmsprop_step(params, batch, opt, hp);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.mean_loss = loss_sum / double(examples.size());
    rec.val_f = validation.empty() ? std::nan("") : decoding_accuracy(params, validation, inv, vocab);
    rec.val_loss = validation.empty() ? std::nan("") : validation_loss(params, validation, inv, vocab, hp);
    if (opts.record_timing)
      rec.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.log.push_back(rec);
    if (opts.on_epoch) opts.on_epoch(rec);
    if (opts.inspect) opts.inspect(rec, params);

    if (validation.empty()) {
      result.params = params;
      result.best_epoch = epoch;
      continue;
    }
    if (rec.val_f > best_f || (rec.val_f == best_f && rec.val_loss < best_loss)) {
      best_f = rec.val_f;
      best_loss = rec.val_loss;
      result.params = params;
      result.best_epoch = epoch;
      since_best = 0;
    } else {
      ++since_best;
    }
    if (since_best >= hp.patience) break;
  }
  return result;
}

}  // namespace wsd
