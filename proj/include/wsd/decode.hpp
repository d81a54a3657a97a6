#pragma once

// Argmax sense decoding over a lexelt's candidates.

#include <algorithm>
#include <span>
#include <string>
#include <vector>

#include "wsd/corpus.hpp"
#include "wsd/embeddings.hpp"
#include "wsd/model.hpp"
#include "wsd/numkit.hpp"

namespace wsd {

struct Prediction {
  std::string instance_id;
  std::string lexelt;
  std::vector<SenseId> candidates;  // inventory order
  Vector scores;                    // ŷ per candidate
  Vector probabilities;             // softmax(scores)
  std::size_t chosen_index = 0;
  SenseId chosen = 0;
};

/// Index of the maximal score; ties go to the lowest candidate index.
inline std::size_t choose_candidate(std::span<const double> scores) { return argmax(scores); }

inline Prediction disambiguate_window(const NetworkParams& p, const Instance& inst, const SenseInventory& inv,
                                      const ContextWindow& window) {
  const auto li = inv.find_lexelt(inst.lexelt);
  if (!li) throw KeyError("cannot disambiguate '" + inst.id + "': unknown lexelt '" + inst.lexelt + "'");
  const auto& cands = inv.lexelt(*li).senses;
  if (cands.empty()) throw KeyError("lexelt '" + inst.lexelt + "' has no candidate senses");
  Prediction pr;
  pr.instance_id = inst.id;
  pr.lexelt = inst.lexelt;
  pr.candidates = cands;
  pr.scores.reserve(cands.size());
  for (SenseId s : cands) pr.scores.push_back(score_sense(p, s, window));
  pr.probabilities = softmax(pr.scores);
  pr.chosen_index = choose_candidate(pr.scores);
  pr.chosen = cands[pr.chosen_index];
  return pr;
}

/// Scores every candidate sense on the instance's window and picks the best.
inline Prediction disambiguate(const NetworkParams& p, const Instance& inst, const SenseInventory& inv,
                               const Vocabulary& vocab) {
  return disambiguate_window(p, inst, inv, window_for(p, inst, vocab));
}

/// A prediction is correct when it matches any gold sense.
inline bool is_correct(const Prediction& pr, const Instance& inst, const SenseInventory& inv) {
  const auto& name = inv.sense_name(pr.chosen);
  return std::find(inst.gold.begin(), inst.gold.end(), name) != inst.gold.end();
}

/// Fraction of labeled instances decoded correctly (every instance is
/// attempted, so this is also the F-measure).
inline double decoding_accuracy(const NetworkParams& p, const std::vector<Instance>& instances,
                                const SenseInventory& inv, const Vocabulary& vocab) {
  std::size_t total = 0, correct = 0;
  for (const auto& inst : instances) {
    if (inst.gold.empty()) continue;
    ++total;
    if (is_correct(disambiguate(p, inst, inv, vocab), inst, inv)) ++correct;
  }
  return total ? double(correct) / double(total) : 0.0;
}

}  // namespace wsd
