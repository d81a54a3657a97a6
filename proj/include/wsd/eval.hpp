#pragma once

// Fine-grained scoring, report files, the train/evaluate pipeline and the
// architecture/hyper-parameter ablations.

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "wsd/corpus.hpp"
#include "wsd/decode.hpp"
#include "wsd/embeddings.hpp"
#include "wsd/errors.hpp"
#include "wsd/model.hpp"
#include "wsd/train.hpp"

namespace wsd {

struct ScoreRow {
  std::string scope;
  std::size_t attempted = 0;
  std::size_t total = 0;
  std::size_t correct = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f = 0.0;

  void finish() {
    precision = attempted ? double(correct) / double(attempted) : 0.0;
    recall = total ? double(correct) / double(total) : 0.0;
    f = precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
  }
};

struct ScoreReport {
  ScoreRow overall{"all"};
  std::vector<ScoreRow> per_pos;     // sorted by POS tag
  std::vector<ScoreRow> per_lexelt;  // sorted by lexelt
};

/// Answer records (one chosen sense per instance) for a set of predictions.
inline std::vector<KeyEntry> answers_from(const std::vector<Prediction>& preds, const SenseInventory& inv) {
  std::vector<KeyEntry> out;
  out.reserve(preds.size());
  for (const auto& p : preds) out.push_back({p.lexelt, p.instance_id, {inv.sense_name(p.chosen)}});
  return out;
}

/// An answer is correct iff one of its senses is among the gold senses.
/// Precision is over attempted instances, recall over every key entry.
inline ScoreReport score_answers(const std::vector<KeyEntry>& answers, const std::vector<KeyEntry>& gold) {
  std::map<std::string, const KeyEntry*> key;
  for (const auto& g : gold) key.emplace(g.instance, &g);

  std::vector<std::string> missing;
  for (const auto& a : answers)
    if (!key.count(a.instance)) missing.push_back(a.instance);
  if (!missing.empty()) {
    std::string ids;
    for (std::size_t i = 0; i < missing.size() && i < 20; ++i) ids += (i ? ", " : "") + missing[i];
    if (missing.size() > 20) ids += ", ...";
    throw KeyError(std::to_string(missing.size()) + " answer(s) have no gold entry: " + ids);
  }

  std::map<std::string, ScoreRow> lex, pos;
  ScoreReport rep;
  const auto rows = [&](const std::string& lexelt) -> std::array<ScoreRow*, 3> {
    const std::string p = lexelt_pos(lexelt);
    auto& lr = lex[lexelt];
    lr.scope = "lexelt:" + lexelt;
    auto& pr = pos[p];
    pr.scope = "pos:" + p;
    return {&rep.overall, &pr, &lr};
  };
  for (const auto& g : gold)
    for (ScoreRow* r : rows(g.lexelt)) ++r->total;

  std::set<std::string> seen;
  for (const auto& a : answers) {
    if (!seen.insert(a.instance).second) continue;  // first answer per instance counts
    const KeyEntry& g = *key.at(a.instance);
    const bool ok = std::any_of(a.senses.begin(), a.senses.end(), [&](const std::string& s) {
      return std::find(g.senses.begin(), g.senses.end(), s) != g.senses.end();
    });
    for (ScoreRow* r : rows(g.lexelt)) {
      ++r->attempted;
      if (ok) ++r->correct;
    }
  }
  rep.overall.finish();
  for (auto& [_, r] : pos) {
    r.finish();
    rep.per_pos.push_back(r);
  }
  for (auto& [_, r] : lex) {
    r.finish();
    rep.per_lexelt.push_back(r);
  }
  return rep;
}

inline ScoreReport score_predictions(const std::vector<Prediction>& preds, const std::vector<KeyEntry>& gold,
                                     const SenseInventory& inv) {
  return score_answers(answers_from(preds, inv), gold);
}

inline void write_answers(std::ostream& out, const std::vector<KeyEntry>& answers) {
  for (const auto& a : answers) {
    out << a.lexelt << ' ' << a.instance;
    for (const auto& s : a.senses) out << ' ' << s;
    out << '\n';
  }
}

inline constexpr const char* kReportCsvHeader = "scope,attempted,total,correct,precision,recall,f";

namespace detail {

inline std::vector<const ScoreRow*> report_rows(const ScoreReport& r) {
  std::vector<const ScoreRow*> rows;
  const auto keep = [](const ScoreRow& row) { return row.total > 0 || row.attempted > 0; };
  if (keep(r.overall)) rows.push_back(&r.overall);
  for (const auto& x : r.per_pos) if (keep(x)) rows.push_back(&x);
  for (const auto& x : r.per_lexelt) if (keep(x)) rows.push_back(&x);
  return rows;
}

}  // namespace detail

inline void write_report_csv(std::ostream& out, const ScoreReport& r) {
  out << kReportCsvHeader << '\n';
  char buf[256];
  for (const ScoreRow* row : detail::report_rows(r)) {
    std::snprintf(buf, sizeof buf, "%s,%zu,%zu,%zu,%.6f,%.6f,%.6f\n", row->scope.c_str(), row->attempted, row->total,
                  row->correct, row->precision, row->recall, row->f);
    out << buf;
  }
}

inline void write_report_table(std::ostream& out, const ScoreReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-28s %9s %7s %7s %9s %7s %7s\n", "scope", "attempted", "total", "correct",
                "precision", "recall", "F");
  out << buf;
  for (const ScoreRow* row : detail::report_rows(r)) {
    std::snprintf(buf, sizeof buf, "%-28s %9zu %7zu %7zu %8.2f%% %6.2f%% %6.2f%%\n", row->scope.c_str(),
                  row->attempted, row->total, row->correct, 100.0 * row->precision, 100.0 * row->recall,
                  100.0 * row->f);
    out << buf;
  }
}

struct ReportFiles {
  std::string table;
  std::string csv;
  std::string answers;
};

/// Writes <prefix>.txt (aligned table), <prefix>.csv and <prefix>.answers.
inline ReportFiles emit_report(const ScoreReport& r, const std::vector<KeyEntry>& answers, const std::string& prefix) {
  ReportFiles files{prefix + ".txt", prefix + ".csv", prefix + ".answers"};
  const auto open = [](const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot write '" + path + "'");
    return f;
  };
  {
    auto f = open(files.table);
    write_report_table(f, r);
    if (!f) throw IoError("failed writing '" + files.table + "'");
  }
  {
    auto f = open(files.csv);
    write_report_csv(f, r);
    if (!f) throw IoError("failed writing '" + files.csv + "'");
  }
  {
    auto f = open(files.answers);
    write_answers(f, answers);
    if (!f) throw IoError("failed writing '" + files.answers + "'");
  }
  return files;
}

// ---------------------------------------------------------------------------
// Pipeline

/// Training and test material after preprocessing.
struct Corpus {
  SenseInventory inventory;
  std::vector<Instance> train;
  std::vector<Instance> test;
  std::vector<KeyEntry> test_key;
};

struct CorpusPaths {
  std::string train;
  std::string train_key;  // optional: gold for training instances without inline answers
  std::string test;
  std::string test_key;
};

inline Corpus load_corpus(const CorpusPaths& paths) {
  Corpus c;
  LexicalSample tr = parse_lexical_sample(paths.train);
  if (!paths.train_key.empty()) {
    const auto key = read_answer_key(paths.train_key);
    for (const auto& e : key)
      for (const auto& s : e.senses) tr.inventory.add_sense(e.lexelt, s);
    apply_answer_key(tr.instances, key, tr.inventory);
  }
  c.inventory = std::move(tr.inventory);
  c.train = preprocess(std::move(tr.instances));
  validate_instances(c.train, c.inventory);
  if (!paths.test.empty()) {
    LexicalSample te = parse_lexical_sample(paths.test);
    c.test = preprocess(std::move(te.instances));
    if (!paths.test_key.empty()) {
      c.test_key = read_answer_key(paths.test_key);
      apply_answer_key(c.test, c.test_key, c.inventory);
    }
  }
  return c;
}

enum class Ablation { standard, reversed, shuffled, fc, no_glove, no_word_dropout, context_25 };

inline constexpr Ablation kAllAblations[] = {Ablation::standard, Ablation::reversed,        Ablation::shuffled,
                                             Ablation::fc,       Ablation::no_glove,        Ablation::no_word_dropout,
                                             Ablation::context_25};

inline std::string_view to_string(Ablation a) {
  switch (a) {
    case Ablation::standard: return "standard";
    case Ablation::reversed: return "reversed";
    case Ablation::shuffled: return "shuffled";
    case Ablation::fc: return "fc";
    case Ablation::no_glove: return "no_glove";
    case Ablation::no_word_dropout: return "no_word_dropout";
    case Ablation::context_25: return "context_25";
  }
  return "unknown";
}

inline Ablation parse_ablation(std::string_view s) {
  for (Ablation a : kAllAblations)
    if (to_string(a) == s) return a;
  throw ConfigError("unknown ablation variant '" + std::string(s) +
                    "' (expected standard, reversed, shuffled, fc, no_glove, no_word_dropout or context_25)");
}

/// Reference SensEval-3 F-measures (%) for the standard network and each
/// single-change variant; reference constants for comparing full runs.
inline double reference_f(Ablation a) {
  switch (a) {
    case Ablation::standard: return 72.5;
    case Ablation::reversed: return 68.9;
    case Ablation::shuffled: return 67.3;
    case Ablation::fc: return 70.2;
    case Ablation::no_glove: return 65.6;
    case Ablation::no_word_dropout: return 71.1;
    case Ablation::context_25: return 71.4;
  }
  return 0.0;
}

struct RunSetup {
  HyperParams hp;
  ArchVariant variant;
  bool use_glove = true;
};

/// Exactly one modification of the base configuration per variant.
inline RunSetup configure(Ablation a, const HyperParams& base) {
  RunSetup s{base, {ArchMode::standard, base.left_context, base.right_context, base.seed}, true};
  switch (a) {
    case Ablation::standard: break;
    case Ablation::reversed: s.variant.mode = ArchMode::reversed_directions; break;
    case Ablation::shuffled: s.variant.mode = ArchMode::shuffled_context; break;
    case Ablation::fc: s.variant.mode = ArchMode::fc_instead_of_blstm; break;
    case Ablation::no_glove: s.use_glove = false; break;
    case Ablation::no_word_dropout: s.hp.word_dropout = 0.0; break;
    case Ablation::context_25:
      s.hp.left_context = s.hp.right_context = 25;
      s.variant.left_context = s.variant.right_context = 25;
      break;
  }
  return s;
}

struct TrainedModel {
  Model model;
  std::vector<EpochRecord> log;
  std::size_t best_epoch = 0;
  GloveStats glove;
};

/// Vocabulary from all training instances, embeddings (GloVe or random),
/// stratified validation split, then training.
inline TrainedModel train_model(const Corpus& data, const RunSetup& setup, const std::string& glove_path,
                                const TrainOptions& opts = {}) {
  const HyperParams& hp = setup.hp;
  hp.validate();
  if (setup.use_glove && glove_path.empty()) throw ConfigError("a GloVe file is required for this configuration");
  TrainedModel out;
  out.model.vocab = build_vocab(data.train);
  out.model.inventory = data.inventory;

  Rng embed_rng = Rng::derive(hp.seed, 0x454d42);  // word/sense/network init
  EmbeddingTable words = setup.use_glove
                             ? load_glove(glove_path, out.model.vocab, hp.embedding_size, embed_rng, &out.glove)
                             : init_random_word_table(out.model.vocab, hp.embedding_size, embed_rng);
  EmbeddingTable senses = init_sense_table(data.inventory, hp.embedding_size, embed_rng);
  NetworkParams init = init_network(std::move(words), std::move(senses), hp.hidden_size, setup.variant, embed_rng);

  Rng split_rng = Rng::derive(hp.seed, 0x53504c);
  Split split = split_validation(data.train, hp.validation_fraction, split_rng);
  TrainResult r = train(std::move(init), split.train, split.validation, out.model.vocab, data.inventory, hp, opts);
  out.model.params = std::move(r.params);
  out.log = std::move(r.log);
  out.best_epoch = r.best_epoch;
  return out;
}

struct Evaluation {
  std::vector<Prediction> predictions;
  ScoreReport report;
};

inline std::vector<Prediction> predict_all(const Model& m, const std::vector<Instance>& instances) {
  std::vector<Prediction> out;
  out.reserve(instances.size());
  for (const auto& inst : instances) out.push_back(disambiguate(m.params, inst, m.inventory, m.vocab));
  return out;
}

inline Evaluation evaluate(const Model& m, const std::vector<Instance>& instances, const std::vector<KeyEntry>& key) {
  Evaluation e;
  e.predictions = predict_all(m, instances);
  e.report = score_predictions(e.predictions, key, m.inventory);
  return e;
}

struct AblationResult {
  Ablation variant;
  TrainedModel trained;
  Evaluation evaluation;
};

/// Retrains from scratch under one variant and scores the test set.
inline AblationResult run_ablation(Ablation a, const Corpus& data, const HyperParams& base,
                                   const std::string& glove_path, const TrainOptions& opts = {}) {
  if (data.test.empty() || data.test_key.empty()) throw ConfigError("ablation needs test data and a test key");
  AblationResult r{a, train_model(data, configure(a, base), glove_path, opts), {}};
  r.evaluation = evaluate(r.trained.model, data.test, data.test_key);
  return r;
}

}  // namespace wsd
