#pragma once

// Forward computation of the single sense-scoring network.
//
//   sense embedding  ──┐
//                      ├─ cosine per context position ─┬─ left LSTM  ─┐
//   word embeddings  ──┘                               └─ right LSTM ─┴─ concat ─ ReLU layer ─ sigmoid
//
// One parameter set scores the candidate senses of every lexelt.

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "wsd/corpus.hpp"
#include "wsd/embeddings.hpp"
#include "wsd/errors.hpp"
#include "wsd/numkit.hpp"

namespace wsd {

enum class ArchMode : std::uint32_t {
  standard = 0,
  reversed_directions = 1,
  shuffled_context = 2,
  fc_instead_of_blstm = 3,
};

inline std::string_view to_string(ArchMode m) {
  switch (m) {
    case ArchMode::standard: return "standard";
    case ArchMode::reversed_directions: return "reversed";
    case ArchMode::shuffled_context: return "shuffled";
    case ArchMode::fc_instead_of_blstm: return "fc";
  }
  return "unknown";
}

inline ArchMode parse_arch_mode(std::string_view s) {
  if (s == "standard") return ArchMode::standard;
  if (s == "reversed") return ArchMode::reversed_directions;
  if (s == "shuffled") return ArchMode::shuffled_context;
  if (s == "fc") return ArchMode::fc_instead_of_blstm;
  throw ConfigError("unknown architecture mode '" + std::string(s) + "'");
}

struct ArchVariant {
  ArchMode mode = ArchMode::standard;
  std::size_t left_context = 15;
  std::size_t right_context = 15;
  std::uint64_t shuffle_seed = 0;  // only used by shuffled_context

  friend bool operator==(const ArchVariant&, const ArchVariant&) = default;
};

// Gate blocks are stacked in this order inside every LSTM weight matrix.
enum Gate : std::size_t { kInputGate = 0, kForgetGate = 1, kOutputGate = 2, kCandidate = 3 };

struct LstmParams {
  Matrix input_weights;      // 4H x I
  Matrix recurrent_weights;  // 4H x H
  Vector bias;               // 4H

  LstmParams() = default;
  LstmParams(std::size_t hidden, std::size_t input)
      : input_weights(4 * hidden, input), recurrent_weights(4 * hidden, hidden), bias(4 * hidden, 0.0) {}

  std::size_t hidden() const noexcept { return recurrent_weights.cols(); }
  std::size_t input_dim() const noexcept { return input_weights.cols(); }

  friend bool operator==(const LstmParams&, const LstmParams&) = default;
};

/// Dense side encoder used in place of an LSTM by the fc variant.
struct DenseParams {
  Matrix weights;  // H x side length
  Vector bias;     // H

  friend bool operator==(const DenseParams&, const DenseParams&) = default;
};

struct HeadParams {
  Matrix hidden_weights;  // F x 2H
  Vector hidden_bias;     // F
  Vector output_weights;  // F (the single row of the 1 x F output matrix)
  double output_bias = 0.0;

  friend bool operator==(const HeadParams&, const HeadParams&) = default;
};

struct NetworkParams {
  EmbeddingTable words;
  EmbeddingTable senses;
  LstmParams left;
  LstmParams right;
  DenseParams left_fc;   // fc variant only
  DenseParams right_fc;  // fc variant only
  HeadParams head;
  ArchVariant variant;

  std::size_t embedding_size() const noexcept { return words.dim(); }
  std::size_t hidden() const noexcept {
    return variant.mode == ArchMode::fc_instead_of_blstm ? left_fc.weights.rows() : left.hidden();
  }

  friend bool operator==(const NetworkParams&, const NetworkParams&) = default;
};

/// Parameters plus the vocabulary and inventory they are indexed by.
struct Model {
  NetworkParams params;
  Vocabulary vocab;
  SenseInventory inventory;
};

namespace detail {

inline void glorot_fill(std::span<double> w, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / double(fan_in + fan_out));
  for (double& x : w) x = rng.uniform(-bound, bound);
}

}  // namespace detail

/// Fresh network around the given embedding tables. LSTM, dense and head
/// weights are Glorot-uniform; the forget-gate bias is 1, other biases 0.
inline NetworkParams init_network(EmbeddingTable words, EmbeddingTable senses, std::size_t hidden,
                                  const ArchVariant& variant, Rng& rng) {
  if (words.dim() != senses.dim())
    throw ShapeError("word and sense embeddings must share a dimension");
  if (hidden == 0) throw ConfigError("hidden size must be positive");
  if (variant.left_context == 0 || variant.right_context == 0)
    throw ConfigError("context sizes must be positive");
  NetworkParams p;
  p.words = std::move(words);
  p.senses = std::move(senses);
  p.variant = variant;
  if (variant.mode == ArchMode::fc_instead_of_blstm) {
    for (auto [side, len] : {std::pair{&p.left_fc, variant.left_context}, std::pair{&p.right_fc, variant.right_context}}) {
      side->weights = Matrix(hidden, len);
      side->bias.assign(hidden, 0.0);
      detail::glorot_fill(side->weights.data(), len, hidden, rng);
    }
  } else {
    for (LstmParams* l : {&p.left, &p.right}) {
      *l = LstmParams(hidden, 1);
      detail::glorot_fill(l->input_weights.data(), 1, hidden, rng);
      detail::glorot_fill(l->recurrent_weights.data(), hidden, hidden, rng);
      for (std::size_t j = 0; j < hidden; ++j) l->bias[kForgetGate * hidden + j] = 1.0;
    }
  }
  p.head.hidden_weights = Matrix(hidden, 2 * hidden);
  p.head.hidden_bias.assign(hidden, 0.0);
  p.head.output_weights.assign(hidden, 0.0);
  detail::glorot_fill(p.head.hidden_weights.data(), 2 * hidden, hidden, rng);
  detail::glorot_fill(p.head.output_weights, hidden, 1, rng);
  return p;
}

/// All-zero network of the given shape (embedding tables included).
inline NetworkParams zero_network(std::size_t vocab_size, std::size_t sense_count, std::size_t dim,
                                  std::size_t hidden, const ArchVariant& variant) {
  NetworkParams p;
  p.words = EmbeddingTable(TableKind::word, dim, vocab_size);
  p.senses = EmbeddingTable(TableKind::sense, dim, sense_count);
  p.variant = variant;
  if (variant.mode == ArchMode::fc_instead_of_blstm) {
    p.left_fc = {Matrix(hidden, variant.left_context), Vector(hidden, 0.0)};
    p.right_fc = {Matrix(hidden, variant.right_context), Vector(hidden, 0.0)};
  } else {
    p.left = LstmParams(hidden, 1);
    p.right = LstmParams(hidden, 1);
  }
  p.head = {Matrix(hidden, 2 * hidden), Vector(hidden, 0.0), Vector(hidden, 0.0), 0.0};
  return p;
}

/// Inverted-dropout masks for one forward pass. An empty member means no
/// masking at that site.
struct DropoutMasks {
  Vector sense;                    // d
  std::vector<Vector> left_words;  // L masks of length d
  std::vector<Vector> right_words; // R masks of length d
  Vector encoding;                 // 2H, the concatenated LSTM outputs
  Vector hidden;                   // F, the fully-connected layer output

  bool empty() const noexcept {
    return sense.empty() && left_words.empty() && right_words.empty() && encoding.empty() && hidden.empty();
  }
};

/// Per-step state of one directional LSTM, in traversal order.
struct LstmTrace {
  std::vector<std::size_t> positions;  // window index consumed at each step
  std::vector<Vector> gates;           // 4H post-activation: i, f, o, g
  std::vector<Vector> cells;           // c_t
  std::vector<Vector> hiddens;         // h_t
};

struct DenseTrace {
  Vector pre;
  Vector out;
};

struct ForwardTrace {
  SenseId sense = 0;
  ContextWindow window;
  DropoutMasks masks;
  Vector sense_vec;                   // after dropout
  std::vector<Vector> left_vecs;      // word vectors after dropout
  std::vector<Vector> right_vecs;
  Vector left_cos;
  Vector right_cos;
  LstmTrace left_lstm;
  LstmTrace right_lstm;
  DenseTrace left_fc;
  DenseTrace right_fc;
  Vector encoding;          // before dropout
  Vector encoding_dropped;  // input of the hidden layer
  Vector hidden_pre;
  Vector hidden;            // ReLU output before dropout
  Vector hidden_dropped;    // input of the output unit
  double logit = 0.0;
  double output = 0.0;
};

namespace detail {

inline Vector masked(std::span<const double> v, const Vector& mask) {
  Vector out(v.begin(), v.end());
  if (!mask.empty()) hadamard_inplace(out, mask);
  return out;
}

}  // namespace detail

/// Cosine of the sense vector against every window position. PAD positions
/// give 0.
inline std::pair<Vector, Vector> cosine_sequence(std::span<const double> sense, const ContextWindow& window,
                                                 const EmbeddingTable& words) {
  if (sense.size() != words.dim())
    throw ShapeError("sense dimension " + std::to_string(sense.size()) + " != word dimension " +
                     std::to_string(words.dim()));
  std::pair<Vector, Vector> out{Vector(window.left.size()), Vector(window.right.size())};
  for (std::size_t m = 0; m < window.left.size(); ++m) out.first[m] = cosine(sense, words.column(window.left[m]));
  for (std::size_t m = 0; m < window.right.size(); ++m) out.second[m] = cosine(sense, words.column(window.right[m]));
  return out;
}

struct LstmState {
  Vector h;
  Vector c;
  Vector gates;  // 4H post-activation
};

/// One standard forget-gate LSTM step (no peepholes):
///   i = σ(W_i x + U_i h + b_i), f = σ(...), o = σ(...), g = tanh(...)
///   c' = f ⊙ c + i ⊙ g,  h' = o ⊙ tanh(c')
inline LstmState lstm_step(const LstmParams& p, std::span<const double> x, std::span<const double> h_prev,
                           std::span<const double> c_prev) {
  const std::size_t H = p.hidden();
  if (x.size() != p.input_dim() || h_prev.size() != H || c_prev.size() != H)
    throw ShapeError("lstm_step: inconsistent dimensions");
  Vector a = matvec(p.input_weights, x);
  const Vector r = matvec(p.recurrent_weights, h_prev);
  for (std::size_t k = 0; k < a.size(); ++k) a[k] += r[k] + p.bias[k];
  LstmState s{Vector(H), Vector(H), Vector(4 * H)};
  for (std::size_t j = 0; j < H; ++j) {
    const double i = sigmoid(a[kInputGate * H + j]);
    const double f = sigmoid(a[kForgetGate * H + j]);
    const double o = sigmoid(a[kOutputGate * H + j]);
    const double g = std::tanh(a[kCandidate * H + j]);
    s.c[j] = f * c_prev[j] + i * g;
    s.h[j] = o * std::tanh(s.c[j]);
    s.gates[kInputGate * H + j] = i;
    s.gates[kForgetGate * H + j] = f;
    s.gates[kOutputGate * H + j] = o;
    s.gates[kCandidate * H + j] = g;
  }
  return s;
}

/// Runs an LSTM over `seq` visiting `order` (indices into seq), starting from
/// zero state. Returns the final hidden state.
inline Vector run_lstm(const LstmParams& p, std::span<const double> seq, std::span<const std::size_t> order,
                       LstmTrace* trace = nullptr) {
  const std::size_t H = p.hidden();
  Vector h(H, 0.0), c(H, 0.0);
  if (trace) *trace = {};
  for (std::size_t pos : order) {
    const double x = seq[pos];
    LstmState s = lstm_step(p, std::span<const double>(&x, 1), h, c);
    h = s.h;
    c = s.c;
    if (trace) {
      trace->positions.push_back(pos);
      trace->gates.push_back(std::move(s.gates));
      trace->cells.push_back(c);
      trace->hiddens.push_back(h);
    }
  }
  return h;
}

/// Traversal orders. The standard left LSTM reads -L..-1 and the right LSTM
/// reads +R..+1, so both finish next to the target word.
inline std::vector<std::size_t> left_order(std::size_t L, ArchMode mode) {
  std::vector<std::size_t> o(L);
  for (std::size_t k = 0; k < L; ++k) o[k] = mode == ArchMode::reversed_directions ? L - 1 - k : k;
  return o;
}

inline std::vector<std::size_t> right_order(std::size_t R, ArchMode mode) {
  std::vector<std::size_t> o(R);
  for (std::size_t k = 0; k < R; ++k) o[k] = mode == ArchMode::reversed_directions ? k : R - 1 - k;
  return o;
}

inline Vector dense_relu(const DenseParams& p, std::span<const double> x, DenseTrace* trace = nullptr) {
  Vector pre = matvec(p.weights, x);
  for (std::size_t j = 0; j < pre.size(); ++j) pre[j] += p.bias[j];
  Vector out(pre.size());
  for (std::size_t j = 0; j < pre.size(); ++j) out[j] = relu(pre[j]);
  if (trace) *trace = {pre, out};
  return out;
}

/// Concatenation [left final state ; right final state] of length 2H.
inline Vector blstm_encode(const NetworkParams& p, std::span<const double> left_seq, std::span<const double> right_seq,
                           ForwardTrace* trace = nullptr) {
  const auto& v = p.variant;
  if (left_seq.size() != v.left_context || right_seq.size() != v.right_context)
    throw ShapeError("blstm_encode: sequence lengths " + std::to_string(left_seq.size()) + "/" +
                     std::to_string(right_seq.size()) + " do not match configured context " +
                     std::to_string(v.left_context) + "/" + std::to_string(v.right_context));
  Vector lh, rh;
  if (v.mode == ArchMode::fc_instead_of_blstm) {
    lh = dense_relu(p.left_fc, left_seq, trace ? &trace->left_fc : nullptr);
    rh = dense_relu(p.right_fc, right_seq, trace ? &trace->right_fc : nullptr);
  } else {
    const auto lo = left_order(left_seq.size(), v.mode);
    const auto ro = right_order(right_seq.size(), v.mode);
    lh = run_lstm(p.left, left_seq, lo, trace ? &trace->left_lstm : nullptr);
    rh = run_lstm(p.right, right_seq, ro, trace ? &trace->right_lstm : nullptr);
  }
  Vector enc;
  enc.reserve(lh.size() + rh.size());
  enc.insert(enc.end(), lh.begin(), lh.end());
  enc.insert(enc.end(), rh.begin(), rh.end());
  return enc;
}

struct HeadOutput {
  Vector hidden;  // h_cl
  double logit = 0.0;
  double output = 0.0;  // ŷ
};

/// h_cl = ReLU(W_h enc + b_h); ŷ = σ(w_out · h_cl + b_out)
inline HeadOutput head_forward(const HeadParams& head, std::span<const double> enc) {
  if (enc.size() != head.hidden_weights.cols())
    throw ShapeError("head_forward: encoding length " + std::to_string(enc.size()) + " != " +
                     std::to_string(head.hidden_weights.cols()));
  HeadOutput out;
  out.hidden = matvec(head.hidden_weights, enc);
  for (std::size_t j = 0; j < out.hidden.size(); ++j) out.hidden[j] = relu(out.hidden[j] + head.hidden_bias[j]);
  out.logit = dot(head.output_weights, out.hidden) + head.output_bias;
  out.output = sigmoid(out.logit);
  return out;
}

/// Full forward pass for one (sense, window) pair. With `masks` the dropout
/// sites are applied; with `trace` every intermediate needed by the backward
/// pass is recorded.
inline double score_sense(const NetworkParams& p, SenseId sense, const ContextWindow& window,
                          const DropoutMasks* masks = nullptr, ForwardTrace* trace = nullptr) {
  const auto& v = p.variant;
  if (window.left.size() != v.left_context || window.right.size() != v.right_context)
    throw ShapeError("score_sense: window does not match configured context size");
  static const DropoutMasks kNoMasks{};
  const DropoutMasks& mk = masks ? *masks : kNoMasks;
  const std::size_t L = window.left.size(), R = window.right.size();

  const Vector s = detail::masked(p.senses.column(sense), mk.sense);
  Vector lc(L), rc(R);
  std::vector<Vector> lvecs, rvecs;
  if (trace) {
    lvecs.reserve(L);
    rvecs.reserve(R);
  }
  const auto side = [&](const std::vector<WordId>& ids, const std::vector<Vector>& mks, Vector& cos,
                        std::vector<Vector>& vecs) {
    for (std::size_t m = 0; m < ids.size(); ++m) {
      const auto col = p.words.column(ids[m]);
      if (mks.empty()) {
        cos[m] = cosine(s, col);
        if (trace) vecs.emplace_back(col.begin(), col.end());
      } else {
        Vector w = detail::masked(col, mks[m]);
        cos[m] = cosine(s, w);
        if (trace) vecs.push_back(std::move(w));
      }
    }
  };
  side(window.left, mk.left_words, lc, lvecs);
  side(window.right, mk.right_words, rc, rvecs);

  Vector enc = blstm_encode(p, lc, rc, trace);
  Vector enc_d = mk.encoding.empty() ? enc : detail::masked(enc, mk.encoding);

  Vector pre = matvec(p.head.hidden_weights, enc_d);
  Vector hid(pre.size());
  for (std::size_t j = 0; j < pre.size(); ++j) {
    pre[j] += p.head.hidden_bias[j];
    hid[j] = relu(pre[j]);
  }
  Vector hid_d = mk.hidden.empty() ? hid : detail::masked(hid, mk.hidden);
  const double logit = dot(p.head.output_weights, hid_d) + p.head.output_bias;
  const double y = sigmoid(logit);

  if (trace) {
    trace->sense = sense;
    trace->window = window;
    trace->masks = mk;
    trace->sense_vec = s;
    trace->left_vecs = std::move(lvecs);
    trace->right_vecs = std::move(rvecs);
    trace->left_cos = std::move(lc);
    trace->right_cos = std::move(rc);
    trace->encoding = std::move(enc);
    trace->encoding_dropped = std::move(enc_d);
    trace->hidden_pre = std::move(pre);
    trace->hidden = std::move(hid);
    trace->hidden_dropped = std::move(hid_d);
    trace->logit = logit;
    trace->output = y;
  }
  return y;
}

/// Permutes the non-PAD ids of a window among their own positions, keyed on
/// (seed, instance id) so training and test see a stable shuffle.
inline ContextWindow shuffle_window(const ContextWindow& w, std::uint64_t seed, std::string_view instance_id) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : instance_id) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  Rng rng = Rng::derive(seed, h, 0x5348554646ULL);
  std::vector<WordId> ids;
  for (WordId id : w.left) if (id != kPadId) ids.push_back(id);
  for (WordId id : w.right) if (id != kPadId) ids.push_back(id);
  rng.shuffle(ids);
  ContextWindow out = w;
  std::size_t k = 0;
  for (WordId& id : out.left) if (id != kPadId) id = ids[k++];
  for (WordId& id : out.right) if (id != kPadId) id = ids[k++];
  return out;
}

/// Window for an instance under the network's variant.
inline ContextWindow window_for(const NetworkParams& p, const Instance& inst, const Vocabulary& vocab) {
  ContextWindow w = make_window(inst, vocab, p.variant.left_context, p.variant.right_context);
  if (p.variant.mode == ArchMode::shuffled_context) w = shuffle_window(w, p.variant.shuffle_seed, inst.id);
  return w;
}

}  // namespace wsd
