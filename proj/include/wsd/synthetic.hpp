#pragma once

// Deterministic toy lexical-sample corpus: each sense of each pseudo-lexelt
// owns a pool of cue words whose vectors cluster around a sense centroid;
// contexts mix cue words of the gold sense with shared filler words.

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "wsd/corpus.hpp"
#include "wsd/embeddings.hpp"
#include "wsd/errors.hpp"
#include "wsd/numkit.hpp"

namespace wsd {

struct SyntheticConfig {
  std::size_t lexelts = 5;
  std::size_t senses_per_lexelt = 3;
  std::size_t instances = 200;  // total, spread evenly across lexelts
  std::size_t cue_words = 10;   // per sense
  std::size_t filler_words = 60;
  std::size_t min_side = 6;  // context tokens per side
  std::size_t max_side = 14;
  double cue_rate = 0.4;  // share of context tokens drawn from the gold pool
  double heldout_fraction = 0.2;
  std::size_t dim = 100;
  double cluster_noise = 0.35;  // relative to the centroid scale
  std::uint64_t seed = 20170903;
};

struct SyntheticCorpus {
  SenseInventory inventory;
  std::vector<Instance> train;
  std::vector<Instance> heldout;
  std::vector<KeyEntry> heldout_key;
  std::vector<std::string> words;  // every generated token, in GloVe file order
  std::vector<Vector> vectors;
};

inline std::string synthetic_lexelt_name(std::size_t l) { return "item" + std::to_string(l) + ".n"; }
inline std::string synthetic_sense_name(std::size_t l, std::size_t s) {
  return "item" + std::to_string(l) + "%" + std::to_string(s + 1);
}

inline SyntheticCorpus make_synthetic_corpus(const SyntheticConfig& cfg) {
  if (cfg.lexelts == 0 || cfg.senses_per_lexelt == 0 || cfg.instances < cfg.lexelts || cfg.cue_words == 0 ||
      cfg.filler_words == 0 || cfg.min_side == 0 || cfg.max_side < cfg.min_side || cfg.dim == 0)
    throw ConfigError("invalid synthetic corpus configuration");
  Rng rng(cfg.seed);
  SyntheticCorpus out;

  const auto random_vector = [&](double scale) {
    Vector v(cfg.dim);
    for (double& x : v) x = rng.uniform(-scale, scale);
    return v;
  };

  // cue[l][s][k], filler[k]
  std::vector<std::vector<std::vector<std::string>>> cue(cfg.lexelts);
  for (std::size_t l = 0; l < cfg.lexelts; ++l) {
    out.inventory.add_lexelt(synthetic_lexelt_name(l));
    cue[l].resize(cfg.senses_per_lexelt);
    for (std::size_t s = 0; s < cfg.senses_per_lexelt; ++s) {
      out.inventory.add_sense(synthetic_lexelt_name(l), synthetic_sense_name(l, s));
      const Vector centroid = random_vector(1.0);
      for (std::size_t k = 0; k < cfg.cue_words; ++k) {
        std::string w = "cue" + std::to_string(l) + "x" + std::to_string(s) + "x" + std::to_string(k);
        Vector v = centroid;
        for (double& x : v) x = std::round((x + rng.uniform(-cfg.cluster_noise, cfg.cluster_noise)) * 1e5) / 1e5;
        cue[l][s].push_back(w);
        out.words.push_back(std::move(w));
        out.vectors.push_back(std::move(v));
      }
    }
  }
  std::vector<std::string> filler;
  for (std::size_t k = 0; k < cfg.filler_words; ++k) {
    filler.push_back("fill" + std::to_string(k));
    out.words.push_back(filler.back());
    Vector v = random_vector(1.0);
    for (double& x : v) x = std::round(x * 1e5) / 1e5;
    out.vectors.push_back(std::move(v));
  }

  const std::size_t per_lexelt = cfg.instances / cfg.lexelts;
  for (std::size_t l = 0; l < cfg.lexelts; ++l) {
    const std::string lex = synthetic_lexelt_name(l);
    const std::string head = "item" + std::to_string(l);
    const std::size_t n = per_lexelt + (l < cfg.instances % cfg.lexelts ? 1 : 0);
    std::size_t heldout = static_cast<std::size_t>(std::lround(double(n) * cfg.heldout_fraction));
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t s = i % cfg.senses_per_lexelt;
      Instance inst;
      inst.id = lex + "." + std::to_string(i + 1);
      inst.lexelt = lex;
      inst.head = head;
      inst.gold = {synthetic_sense_name(l, s)};
      const auto side = [&](std::vector<std::string>& toks) {
        const std::size_t len = cfg.min_side + rng.below(cfg.max_side - cfg.min_side + 1);
        for (std::size_t t = 0; t < len; ++t)
          toks.push_back(rng.bernoulli(cfg.cue_rate) ? cue[l][s][rng.below(cfg.cue_words)]
                                                      : filler[rng.below(cfg.filler_words)]);
      };
      side(inst.left);
      side(inst.right);
      // The last instances of each lexelt (all senses represented) are held out.
      if (i + heldout >= n) {
        out.heldout_key.push_back({lex, inst.id, inst.gold});
        out.heldout.push_back(std::move(inst));
      } else {
        out.train.push_back(std::move(inst));
      }
    }
  }
  return out;
}

/// Writes <dir>/train.xml (inline answers), <dir>/heldout.xml,
/// <dir>/heldout.key and <dir>/vectors.txt.
inline void write_synthetic_corpus(const SyntheticCorpus& c, const std::string& dir) {
  const auto open = [](const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot write '" + path + "'");
    return f;
  };
  {
    auto f = open(dir + "/train.xml");
    write_lexical_sample(f, c.inventory, c.train);
  }
  {
    auto f = open(dir + "/heldout.xml");
    std::vector<Instance> unlabeled = c.heldout;
    for (auto& i : unlabeled) i.gold.clear();
    write_lexical_sample(f, c.inventory, unlabeled);
  }
  {
    auto f = open(dir + "/heldout.key");
    for (const auto& e : c.heldout_key) f << e.lexelt << ' ' << e.instance << ' ' << e.senses.front() << '\n';
  }
  {
    auto f = open(dir + "/vectors.txt");
    Vocabulary v;
    for (const auto& w : c.words) v.add(w);
    EmbeddingTable t(TableKind::word, c.vectors.front().size(), v.size());
    for (std::size_t i = 0; i < c.vectors.size(); ++i) {
      auto col = t.column(i + 1);
      std::copy(c.vectors[i].begin(), c.vectors[i].end(), col.begin());
    }
    write_glove(f, t, v);
  }
}

}  // namespace wsd
