#pragma once

// Straightforward re-implementations used as test oracles. They share no
// code with the library beyond the parameter structs.

#include <cmath>
#include <vector>

#include "wsd/model.hpp"

namespace oracle {

inline double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// One LSTM unrolled step by step with scalar loops.
inline std::vector<double> lstm(const wsd::LstmParams& p, const std::vector<double>& xs) {
  const std::size_t H = p.recurrent_weights.cols();
  std::vector<double> h(H, 0.0), c(H, 0.0);
  for (double x : xs) {
    std::vector<double> hn(H), cn(H);
    for (std::size_t j = 0; j < H; ++j) {
      double pre[4];
      for (std::size_t gate = 0; gate < 4; ++gate) {
        const std::size_t row = gate * H + j;
        double s = p.input_weights(row, 0) * x + p.bias[row];
        for (std::size_t k = 0; k < H; ++k) s += p.recurrent_weights(row, k) * h[k];
        pre[gate] = s;
      }
      const double in = sig(pre[0]), forget = sig(pre[1]), out = sig(pre[2]), cand = std::tanh(pre[3]);
      cn[j] = forget * c[j] + in * cand;
      hn[j] = out * std::tanh(cn[j]);
    }
    h = hn;
    c = cn;
  }
  return h;
}

/// [left LSTM over positions -L..-1 ; right LSTM over +R..+1], or the
/// opposite directions for the reversed variant.
inline std::vector<double> blstm(const wsd::NetworkParams& p, const std::vector<double>& left,
                                 const std::vector<double>& right) {
  const bool rev = p.variant.mode == wsd::ArchMode::reversed_directions;
  std::vector<double> l = left, r(right.rbegin(), right.rend());
  if (rev) {
    l.assign(left.rbegin(), left.rend());
    r = right;
  }
  std::vector<double> out = lstm(p.left, l);
  const std::vector<double> rh = lstm(p.right, r);
  out.insert(out.end(), rh.begin(), rh.end());
  return out;
}

inline double cos(std::span<const double> a, std::span<const double> b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    ab += a[k] * b[k];
    aa += a[k] * a[k];
    bb += b[k] * b[k];
  }
  return aa == 0 || bb == 0 ? 0.0 : ab / std::sqrt(aa * bb);
}

/// Whole network without dropout.
inline double score(const wsd::NetworkParams& p, wsd::SenseId s, const wsd::ContextWindow& w) {
  const auto sv = p.senses.column(s);
  std::vector<double> lc, rc;
  for (auto id : w.left) lc.push_back(cos(sv, p.words.column(id)));
  for (auto id : w.right) rc.push_back(cos(sv, p.words.column(id)));
  std::vector<double> enc;
  if (p.variant.mode == wsd::ArchMode::fc_instead_of_blstm) {
    for (auto [d, x] : {std::pair{&p.left_fc, &lc}, std::pair{&p.right_fc, &rc}}) {
      for (std::size_t j = 0; j < d->bias.size(); ++j) {
        double z = d->bias[j];
        for (std::size_t k = 0; k < x->size(); ++k) z += d->weights(j, k) * (*x)[k];
        enc.push_back(z > 0 ? z : 0.0);
      }
    }
  } else {
    enc = blstm(p, lc, rc);
  }
  double logit = p.head.output_bias;
  for (std::size_t j = 0; j < p.head.hidden_bias.size(); ++j) {
    double z = p.head.hidden_bias[j];
    for (std::size_t k = 0; k < enc.size(); ++k) z += p.head.hidden_weights(j, k) * enc[k];
    logit += p.head.output_weights[j] * (z > 0 ? z : 0.0);
  }
  return sig(logit);
}

/// Random network of the given shape with unif(-scale, scale) entries.
inline wsd::NetworkParams random_network(wsd::Rng& rng, std::size_t vocab, std::size_t senses, std::size_t d,
                                         std::size_t H, const wsd::ArchVariant& v, double scale = 1.0) {
  wsd::NetworkParams p = wsd::zero_network(vocab, senses, d, H, v);
  const auto fill = [&](std::span<double> s) {
    for (double& x : s) x = rng.uniform(-scale, scale);
  };
  for (std::size_t c = 1; c < vocab; ++c) fill(p.words.column(c));
  fill(p.senses.raw());
  for (wsd::LstmParams* l : {&p.left, &p.right}) {
    fill(l->input_weights.data());
    fill(l->recurrent_weights.data());
    fill(l->bias);
  }
  for (wsd::DenseParams* dp : {&p.left_fc, &p.right_fc}) {
    fill(dp->weights.data());
    fill(dp->bias);
  }
  fill(p.head.hidden_weights.data());
  fill(p.head.hidden_bias);
  fill(p.head.output_weights);
  p.head.output_bias = rng.uniform(-scale, scale);
  return p;
}

}  // namespace oracle
