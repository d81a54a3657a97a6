#pragma once

// Finite-difference verification of the hand-derived backward pass.

#include <chrono>
#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <utility>
#include <string>
#include <vector>

#include "wsd/model.hpp"
#include "wsd/train.hpp"

namespace wsd {

struct GradCheckConfig {
  std::size_t embedding_size = 8;
  std::size_t hidden_size = 5;
  std::size_t left_context = 3;
  std::size_t right_context = 3;
  double step = 1e-5;
  double tolerance = 1e-4;
  double init_scale = 0.5;  // weights drawn from unif(-scale, scale)
  bool with_dropout = true;
  ArchMode mode = ArchMode::standard;
  std::uint64_t seed = 7;
  // Pre-activations closer than this to a ReLU kink are pushed away before
  // checking, since the loss is not differentiable there.
  double kink_margin = 1e-6;
};

struct GradCheckGroup {
  std::string name;
  std::size_t entries = 0;
  double max_rel_error = 0.0;
  bool passed = true;
};

struct GradCheckReport {
  std::vector<GradCheckGroup> groups;
  bool passed = true;
  double seconds = 0.0;

  std::vector<std::string> failing_groups() const {
    std::vector<std::string> out;
    for (const auto& g : groups)
      if (!g.passed) out.push_back(g.name);
    return out;
  }
};

/// |a - n| / max(|a|, |n|, 1e-8)
inline double gradient_relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-8});
}

namespace detail {

// The network function re-evaluated in extended precision. Central
// differences of the double-precision loss bottom out at a few ulps of the
// loss divided by 2h (about 1e-11), which swamps gradient entries near the
// 1e-8 floor of the relative error; long double pushes that floor down by
// three orders of magnitude.
using Ext = long double;

inline Ext ext_sigmoid(Ext x) {
  if (x >= 0) return 1 / (1 + std::exp(-x));
  const Ext e = std::exp(x);
  return e / (1 + e);
}

inline std::vector<Ext> ext_masked(std::span<const double> v, const Vector& mask) {
  std::vector<Ext> out(v.begin(), v.end());
  if (!mask.empty())
    for (std::size_t k = 0; k < out.size(); ++k) out[k] *= mask[k];
  return out;
}

inline Ext ext_cosine(const std::vector<Ext>& a, const std::vector<Ext>& b) {
  Ext ab = 0, aa = 0, bb = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    ab += a[k] * b[k];
    aa += a[k] * a[k];
    bb += b[k] * b[k];
  }
  if (aa == 0 || bb == 0) return 0;
  return std::clamp<Ext>(ab / (std::sqrt(aa) * std::sqrt(bb)), -1, 1);
}

inline std::vector<Ext> ext_matvec(const Matrix& m, const std::vector<Ext>& x) {
  std::vector<Ext> y(m.rows(), 0);
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) y[r] += Ext(m(r, c)) * x[c];
  return y;
}

inline std::vector<Ext> ext_lstm(const LstmParams& p, const std::vector<Ext>& seq,
                                 const std::vector<std::size_t>& order) {
  const std::size_t H = p.hidden();
  std::vector<Ext> h(H, 0), c(H, 0);
  for (std::size_t pos : order) {
    std::vector<Ext> a = ext_matvec(p.recurrent_weights, h);
    for (std::size_t k = 0; k < 4 * H; ++k) a[k] += Ext(p.input_weights(k, 0)) * seq[pos] + p.bias[k];
    for (std::size_t j = 0; j < H; ++j) {
      const Ext i = ext_sigmoid(a[kInputGate * H + j]);
      const Ext f = ext_sigmoid(a[kForgetGate * H + j]);
      const Ext o = ext_sigmoid(a[kOutputGate * H + j]);
      const Ext g = std::tanh(a[kCandidate * H + j]);
      c[j] = f * c[j] + i * g;
      h[j] = o * std::tanh(c[j]);
    }
  }
  return h;
}

inline std::vector<Ext> ext_dense(const DenseParams& p, const std::vector<Ext>& x) {
  std::vector<Ext> y = ext_matvec(p.weights, x);
  for (std::size_t j = 0; j < y.size(); ++j) y[j] = std::max<Ext>(0, y[j] + p.bias[j]);
  return y;
}

inline Ext ext_score(const NetworkParams& p, SenseId sense, const ContextWindow& w, const DropoutMasks& mk) {
  const std::vector<Ext> s = ext_masked(p.senses.column(sense), mk.sense);
  const auto side = [&](const std::vector<WordId>& ids, const std::vector<Vector>& masks) {
    std::vector<Ext> cos(ids.size());
    for (std::size_t m = 0; m < ids.size(); ++m)
      cos[m] = ext_cosine(s, ext_masked(p.words.column(ids[m]), masks.empty() ? Vector{} : masks[m]));
    return cos;
  };
  const std::vector<Ext> lc = side(w.left, mk.left_words), rc = side(w.right, mk.right_words);
  std::vector<Ext> lh, rh;
  if (p.variant.mode == ArchMode::fc_instead_of_blstm) {
    lh = ext_dense(p.left_fc, lc);
    rh = ext_dense(p.right_fc, rc);
  } else {
    lh = ext_lstm(p.left, lc, left_order(lc.size(), p.variant.mode));
    rh = ext_lstm(p.right, rc, right_order(rc.size(), p.variant.mode));
  }
  std::vector<Ext> enc = lh;
  enc.insert(enc.end(), rh.begin(), rh.end());
  if (!mk.encoding.empty())
    for (std::size_t k = 0; k < enc.size(); ++k) enc[k] *= mk.encoding[k];
  std::vector<Ext> hid = ext_matvec(p.head.hidden_weights, enc);
  Ext logit = p.head.output_bias;
  for (std::size_t j = 0; j < hid.size(); ++j) {
    Ext v = std::max<Ext>(0, hid[j] + p.head.hidden_bias[j]);
    if (!mk.hidden.empty()) v *= mk.hidden[j];
    logit += Ext(p.head.output_weights[j]) * v;
  }
  return ext_sigmoid(logit);
}

}  // namespace detail

/// A random small network with a single training example, ready for
/// finite-difference checks.
struct GradCheckProblem {
  NetworkParams params;
  SenseId sense = 0;
  ContextWindow window;
  DropoutMasks masks;
  double target = 1.0;

  double loss() const { return mse_loss(score_sense(params, sense, window, &masks), target); }

  /// The same loss evaluated in extended precision.
  long double precise_loss() const {
    const long double d = detail::ext_score(params, sense, window, masks) - target;
    return d * d;
  }
};

inline GradCheckProblem make_gradcheck_problem(const GradCheckConfig& cfg) {
  Rng rng(cfg.seed);
  const std::size_t L = cfg.left_context, R = cfg.right_context, d = cfg.embedding_size, H = cfg.hidden_size;
  // Words 1..L+R-1 fill the window except its outermost left slot (PAD); one
  // extra column stays untouched.
  const std::size_t vocab_size = L + R + 1;
  const std::size_t senses = 3;
  ArchVariant variant{cfg.mode, L, R, cfg.seed};

  GradCheckProblem pb;
  pb.params = zero_network(vocab_size, senses, d, H, variant);
  auto fill = [&](std::span<double> v) {
    for (double& x : v) x = rng.uniform(-cfg.init_scale, cfg.init_scale);
  };
  for (std::size_t c = 1; c < vocab_size; ++c) fill(pb.params.words.column(c));
  fill(pb.params.senses.raw());
  Gradients::zip_blocks(pb.params, pb.params, [&](std::span<double> a, std::span<const double>) { fill(a); });

  pb.sense = 1;
  pb.window.left.assign(L, kPadId);
  pb.window.right.assign(R, kPadId);
  WordId next = 1;
  for (std::size_t m = 1; m < L; ++m) pb.window.left[m] = next++;
  for (std::size_t m = 0; m < R; ++m) pb.window.right[m] = next++;
  pb.target = 1.0;

  if (cfg.with_dropout) {
    HyperParams hp;
    hp.dropout_embedding = 0.2;
    hp.dropout_lstm_output = 0.3;
    hp.dropout_fc = 0.3;
    pb.masks = sample_dropout_masks(pb.params, hp, rng);
  }

  // Keep every ReLU pre-activation away from 0.
  for (int guard = 0; guard < 100; ++guard) {
    ForwardTrace tr;
    score_sense(pb.params, pb.sense, pb.window, &pb.masks, &tr);
    bool moved = false;
    for (std::size_t j = 0; j < tr.hidden_pre.size(); ++j) {
      if (std::abs(tr.hidden_pre[j]) < cfg.kink_margin) {
        pb.params.head.hidden_bias[j] += 1e-2;
        moved = true;
      }
    }
    if (cfg.mode == ArchMode::fc_instead_of_blstm) {
      for (auto [dp, dt] : {std::pair{&pb.params.left_fc, &tr.left_fc}, std::pair{&pb.params.right_fc, &tr.right_fc}}) {
        for (std::size_t j = 0; j < dt->pre.size(); ++j) {
          if (std::abs(dt->pre[j]) < cfg.kink_margin) {
            dp->bias[j] += 1e-2;
            moved = true;
          }
        }
      }
    }
    if (!moved) break;
  }
  return pb;
}

/// Compares backward() against central differences for every parameter
/// group. `tamper` may modify the analytic gradients before comparison.
inline GradCheckReport grad_check(const GradCheckConfig& cfg, const std::function<void(Gradients&)>& tamper = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  GradCheckProblem pb = make_gradcheck_problem(cfg);

  ForwardTrace tr;
  score_sense(pb.params, pb.sense, pb.window, &pb.masks, &tr);
  Gradients g = backward(pb.params, pb.target, tr);
  if (tamper) tamper(g);

  GradCheckReport report;
  const double h = cfg.step;
  using Block = std::pair<std::span<double>, std::span<const double>>;
  const auto check = [&](const std::string& name, std::vector<Block> blocks) {
    GradCheckGroup grp{name, 0, 0.0, true};
    for (auto& [w, analytic] : blocks) {
      for (std::size_t k = 0; k < w.size(); ++k) {
        const double saved = w[k];
        w[k] = saved + h;
        const long double lp = pb.precise_loss();
        w[k] = saved - h;
        const long double lm = pb.precise_loss();
        w[k] = saved;
        const double numeric = static_cast<double>((lp - lm) / (2.0L * h));
        grp.max_rel_error = std::max(grp.max_rel_error, gradient_relative_error(analytic[k], numeric));
        ++grp.entries;
      }
    }
    grp.passed = grp.max_rel_error < cfg.tolerance;
    report.passed = report.passed && grp.passed;
    report.groups.push_back(grp);
  };

  // Sparse table gradients laid out like the table storage; column 0 of the
  // word table (PAD) is not a parameter and is skipped.
  const std::size_t d = cfg.embedding_size;
  const auto densify = [d](const std::map<std::uint32_t, Vector>& sparse, std::size_t width) {
    Vector out(d * width, 0.0);
    for (const auto& [col, v] : sparse) std::copy(v.begin(), v.end(), out.begin() + static_cast<std::ptrdiff_t>(col * d));
    return out;
  };
  const Vector word_grad = densify(g.words, pb.params.words.width());
  const Vector sense_grad = densify(g.senses, pb.params.senses.width());
  check("sense_table", {{pb.params.senses.raw(), sense_grad}});
  check("word_table", {{pb.params.words.raw().subspan(d), std::span<const double>(word_grad).subspan(d)}});

  auto& P = pb.params;
  if (cfg.mode == ArchMode::fc_instead_of_blstm) {
    check("left_dense", {{P.left_fc.weights.data(), g.left_fc.weights.data()}, {P.left_fc.bias, g.left_fc.bias}});
    check("right_dense", {{P.right_fc.weights.data(), g.right_fc.weights.data()}, {P.right_fc.bias, g.right_fc.bias}});
  } else {
    check("left_lstm", {{P.left.input_weights.data(), g.left.input_weights.data()},
                               {P.left.recurrent_weights.data(), g.left.recurrent_weights.data()},
                               {P.left.bias, g.left.bias}});
    check("right_lstm", {{P.right.input_weights.data(), g.right.input_weights.data()},
                                {P.right.recurrent_weights.data(), g.right.recurrent_weights.data()},
                                {P.right.bias, g.right.bias}});
  }
  check("hidden_layer", {{P.head.hidden_weights.data(), g.head.hidden_weights.data()},
                                {P.head.hidden_bias, g.head.hidden_bias}});
  check("output_layer", {{P.head.output_weights, g.head.output_weights},
                                {std::span<double>(&P.head.output_bias, 1), std::span<const double>(&g.head.output_bias, 1)}});

  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

}  // namespace wsd
