// wsd: train, evaluate and inspect the BLSTM sense disambiguator.
//
// Exit status: 0 success, 1 usage/config error, 2 data/parse error,
// 3 numerical failure (divergence or failed gradient check).

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include "wsd/config.hpp"
#include "wsd/eval.hpp"
#include "wsd/gradcheck.hpp"
#include "wsd/model_io.hpp"

namespace fs = std::filesystem;
using namespace wsd;

namespace {

struct Invocation {
  std::string config_path;
  std::map<std::string, std::string> overrides;  // config key -> raw value
  std::string model_path;
  std::string input_path;
  std::string variant;
};

// --config, --seed, --threads, --out and one flag per configuration key.
void add_common(CLI::App* cmd, Invocation& inv) {
  cmd->add_option("--config", inv.config_path, "key = value configuration file");
  for (const std::string& key : config_keys()) {
    const std::string flag = key == "output_dir" ? "--out" : "--" + key;
    cmd->add_option_function<std::string>(
        flag, [&inv, key](const std::string& v) { inv.overrides[key] = v; }, "override '" + key + "'");
  }
}

RunConfig resolve(const Invocation& inv) {
  RunConfig cfg;
  if (!inv.config_path.empty()) cfg = load_config(inv.config_path);
  for (const auto& [k, v] : inv.overrides) set_config_value(cfg, k, v);
  cfg.hp.validate();
  if (cfg.threads == 0) throw ConfigError("threads must be positive");
  return cfg;
}

std::string out_path(const RunConfig& cfg, const std::string& name) {
  fs::create_directories(cfg.output_dir);
  return (fs::path(cfg.output_dir) / name).string();
}

TrainOptions train_options(const RunConfig& cfg, std::ostream* log) {
  TrainOptions opts;
  opts.threads = cfg.threads;
  opts.on_epoch = [log](const EpochRecord& r) {
    const std::string line = format_epoch_record(r);
    std::fprintf(stderr, "epoch %s\n", line.c_str());
    if (log) *log << line << '\n' << std::flush;
  };
  return opts;
}

RunSetup setup_for(const RunConfig& cfg, const std::string& variant) {
  return configure(parse_ablation(variant), cfg.hp);
}

void check_train_inputs(const RunConfig& cfg, const RunSetup& setup) {
  if (cfg.train_data.empty()) throw ConfigError("train_data is not set");
  if (setup.use_glove && cfg.glove.empty()) throw ConfigError("glove is not set (required unless variant = no_glove)");
  require_files({{"train_data", &cfg.train_data},
                 {"train_key", &cfg.train_key},
                 {"glove", setup.use_glove ? &cfg.glove : nullptr}});
}

TrainedModel train_and_log(const RunConfig& cfg, const Corpus& data, const RunSetup& setup,
                           const std::string& log_name) {
  std::ofstream log(out_path(cfg, log_name), std::ios::trunc);
  if (!log) throw IoError("cannot write training log");
  log << "epoch,mean_loss,val_f,elapsed_seconds\n";
  TrainedModel t = train_model(data, setup, setup.use_glove ? cfg.glove : std::string(), train_options(cfg, &log));
  std::fprintf(stderr, "vocabulary %zu, glove hits %zu, best epoch %zu\n", t.model.vocab.size(), t.glove.found,
               t.best_epoch);
  return t;
}

void print_overall(const ScoreReport& r) {
  std::printf("attempted %zu total %zu correct %zu precision %.4f recall %.4f f %.4f\n", r.overall.attempted,
              r.overall.total, r.overall.correct, r.overall.precision, r.overall.recall, r.overall.f);
}

int cmd_train(const Invocation& inv) {
  const RunConfig cfg = resolve(inv);
  const RunSetup setup = setup_for(cfg, cfg.variant);
  check_train_inputs(cfg, setup);
  Corpus data = load_corpus({cfg.train_data, cfg.train_key, "", ""});
  TrainedModel t = train_and_log(cfg, data, setup, "train_log.csv");
  const std::string model = out_path(cfg, "model.sbw");
  save_model(model, t.model);
  std::printf("model written to %s\n", model.c_str());
  return 0;
}

Corpus load_test(const RunConfig& cfg) {
  if (cfg.test_data.empty() || cfg.test_key.empty()) throw ConfigError("test_data and test_key must be set");
  require_files({{"test_data", &cfg.test_data}, {"test_key", &cfg.test_key}});
  Corpus c;
  c.test = preprocess(parse_lexical_sample(cfg.test_data).instances);
  c.test_key = read_answer_key(cfg.test_key);
  return c;
}

int cmd_eval(const Invocation& inv) {
  const RunConfig cfg = resolve(inv);
  const std::string model_path = inv.model_path.empty() ? (fs::path(cfg.output_dir) / "model.sbw").string()
                                                        : inv.model_path;
  require_files({{"model", &model_path}});
  const Corpus data = load_test(cfg);
  const Model m = load_model(model_path);
  const Evaluation e = evaluate(m, data.test, data.test_key);
  emit_report(e.report, answers_from(e.predictions, m.inventory), out_path(cfg, "report"));
  print_overall(e.report);
  return 0;
}

int cmd_predict(const Invocation& inv) {
  const RunConfig cfg = resolve(inv);
  const std::string model_path = inv.model_path.empty() ? (fs::path(cfg.output_dir) / "model.sbw").string()
                                                        : inv.model_path;
  require_files({{"model", &model_path}, {"input", &inv.input_path}});
  const Model m = load_model(model_path);
  const auto instances = preprocess(parse_lexical_sample(inv.input_path).instances);
  for (const Prediction& p : predict_all(m, instances)) {
    std::printf("%s %s %s", p.lexelt.c_str(), p.instance_id.c_str(), m.inventory.sense_name(p.chosen).c_str());
    for (std::size_t k = 0; k < p.candidates.size(); ++k)
      std::printf(" %s:%.6f", m.inventory.sense_name(p.candidates[k]).c_str(), p.probabilities[k]);
    std::printf("\n");
  }
  return 0;
}

int cmd_gradcheck(const Invocation& inv) {
  const RunConfig cfg = resolve(inv);
  GradCheckConfig gc;
  if (inv.overrides.count("seed")) gc.seed = cfg.hp.seed;
  const Ablation a = parse_ablation(cfg.variant);
  gc.mode = configure(a, cfg.hp).variant.mode;
  const GradCheckReport r = grad_check(gc);
  for (const auto& g : r.groups)
    std::printf("%-13s entries %4zu  max relative error %.3e  %s\n", g.name.c_str(), g.entries, g.max_rel_error,
                g.passed ? "ok" : "FAIL");
  std::printf("%s in %.2f s\n", r.passed ? "gradient check passed" : "gradient check FAILED", r.seconds);
  return r.passed ? 0 : 3;
}

int cmd_ablate(const Invocation& inv) {
  const RunConfig cfg = resolve(inv);
  const Ablation a = parse_ablation(inv.variant);
  const RunSetup setup = configure(a, cfg.hp);
  check_train_inputs(cfg, setup);
  Corpus data = load_corpus({cfg.train_data, cfg.train_key, "", ""});
  const Corpus test = load_test(cfg);
  data.test = test.test;
  data.test_key = test.test_key;
  const std::string name = "ablation_" + std::string(to_string(a));
  TrainedModel t = train_and_log(cfg, data, setup, name + "_log.csv");
  const Evaluation e = evaluate(t.model, data.test, data.test_key);
  emit_report(e.report, answers_from(e.predictions, t.model.inventory), out_path(cfg, name));
  print_overall(e.report);
  std::printf("variant %s f %.2f (reference %.1f)\n", std::string(to_string(a)).c_str(), 100.0 * e.report.overall.f,
              reference_f(a));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"BLSTM word sense disambiguation"};
  app.require_subcommand(1);
  Invocation inv;

  auto* train = app.add_subcommand("train", "train a model; writes model.sbw and train_log.csv");
  add_common(train, inv);
  auto* eval = app.add_subcommand("eval", "score a model on test_data against test_key");
  add_common(eval, inv);
  eval->add_option("--model", inv.model_path, "model file (default <out>/model.sbw)");
  auto* predict = app.add_subcommand("predict", "print the chosen sense and candidate probabilities");
  add_common(predict, inv);
  predict->add_option("--model", inv.model_path, "model file (default <out>/model.sbw)");
  predict->add_option("--input", inv.input_path, "lexical-sample file")->required();
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of the backward pass");
  add_common(gradcheck, inv);
  auto* ablate = app.add_subcommand("ablate", "train and score one architecture/hyper-parameter variant");
  add_common(ablate, inv);
  ablate->add_option("VARIANT", inv.variant,
                     "standard, reversed, shuffled, fc, no_glove, no_word_dropout or context_25")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*train) return cmd_train(inv);
    if (*eval) return cmd_eval(inv);
    if (*predict) return cmd_predict(inv);
    if (*gradcheck) return cmd_gradcheck(inv);
    if (*ablate) return cmd_ablate(inv);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 1;
}
