#pragma once

// Flat key = value run configuration. Lines starting with '#' are comments.
// Hyper-parameter keys are the HyperParams field names.
//
// Ranges searched during tuning (defaults in brackets):
//   left_context, right_context    10-100          [15]
//   embedding_size                 50/100/200/300  [100]
//   hidden_size                    50-300          [50 per direction]
//   dropout_embedding              0-0.5           [0.2]
//   dropout_lstm_output            0-0.7           [0.5]
//   dropout_fc                     0-0.7           [0.5]
//   word_dropout                   0-0.5           [0.2]

#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "wsd/errors.hpp"
#include "wsd/eval.hpp"
#include "wsd/train.hpp"

namespace wsd {

struct RunConfig {
  std::string train_data;
  std::string train_key;
  std::string test_data;
  std::string test_key;
  std::string glove;
  std::string output_dir = "out";
  std::string variant = "standard";  // any ablation name
  std::size_t threads = 1;
  HyperParams hp;
};

namespace detail {

template <class T>
T parse_number(std::string_view key, std::string_view s) {
  T v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw ConfigError("invalid value '" + std::string(s) + "' for '" + std::string(key) + "'");
  return v;
}

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

using Setter = std::function<void(RunConfig&, std::string_view key, std::string_view value)>;

inline const std::map<std::string, Setter, std::less<>>& config_setters() {
  static const auto table = [] {
    std::map<std::string, Setter, std::less<>> m;
    const auto str = [&](const char* k, std::string RunConfig::*f) {
      m[k] = [f](RunConfig& c, std::string_view, std::string_view v) { c.*f = std::string(v); };
    };
    const auto size = [&](const char* k, std::size_t HyperParams::*f) {
      m[k] = [f](RunConfig& c, std::string_view key, std::string_view v) {
        c.hp.*f = parse_number<std::size_t>(key, v);
      };
    };
    const auto real = [&](const char* k, double HyperParams::*f) {
      m[k] = [f](RunConfig& c, std::string_view key, std::string_view v) { c.hp.*f = parse_number<double>(key, v); };
    };
    str("train_data", &RunConfig::train_data);
    str("train_key", &RunConfig::train_key);
    str("test_data", &RunConfig::test_data);
    str("test_key", &RunConfig::test_key);
    str("glove", &RunConfig::glove);
    str("output_dir", &RunConfig::output_dir);
    str("variant", &RunConfig::variant);
    m["threads"] = [](RunConfig& c, std::string_view key, std::string_view v) {
      c.threads = parse_number<std::size_t>(key, v);
    };
    size("left_context", &HyperParams::left_context);
    size("right_context", &HyperParams::right_context);
    size("embedding_size", &HyperParams::embedding_size);
    size("hidden_size", &HyperParams::hidden_size);
    real("dropout_embedding", &HyperParams::dropout_embedding);
    real("dropout_lstm_output", &HyperParams::dropout_lstm_output);
    real("dropout_fc", &HyperParams::dropout_fc);
    real("word_dropout", &HyperParams::word_dropout);
    real("learning_rate", &HyperParams::learning_rate);
    real("rms_decay", &HyperParams::rms_decay);
    real("rms_epsilon", &HyperParams::rms_epsilon);
    size("batch_size", &HyperParams::batch_size);
    size("max_epochs", &HyperParams::max_epochs);
    size("patience", &HyperParams::patience);
    real("validation_fraction", &HyperParams::validation_fraction);
    m["seed"] = [](RunConfig& c, std::string_view key, std::string_view v) {
      c.hp.seed = parse_number<std::uint64_t>(key, v);
    };
    return m;
  }();
  return table;
}

}  // namespace detail

/// Keys accepted by set_config_value, sorted.
inline std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& [k, _] : detail::config_setters()) out.push_back(k);
  return out;
}

inline void set_config_value(RunConfig& c, std::string_view key, std::string_view value) {
  const auto& m = detail::config_setters();
  const auto it = m.find(key);
  if (it == m.end()) throw ConfigError("unknown configuration key '" + std::string(key) + "'");
  it->second(c, key, value);
}

/// Applies `key = value` lines on top of `base`.
inline RunConfig parse_config(std::istream& in, RunConfig base = {}) {
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const std::string_view s = detail::trim(line);
    if (s.empty() || s.front() == '#') continue;
    const auto eq = s.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("line " + std::to_string(n) + ": expected 'key = value'");
    const auto key = detail::trim(s.substr(0, eq));
    const auto value = detail::trim(s.substr(eq + 1));
    try {
      set_config_value(base, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(n) + ": " + e.what());
    }
  }
  return base;
}

/// Relative data paths in the file are taken relative to the file's directory.
inline RunConfig load_config(const std::string& path, RunConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  RunConfig before = base;
  RunConfig cfg = parse_config(in, std::move(base));
  const std::filesystem::path dir = std::filesystem::path(path).parent_path();
  for (std::string RunConfig::*f : {&RunConfig::train_data, &RunConfig::train_key, &RunConfig::test_data,
                                    &RunConfig::test_key, &RunConfig::glove}) {
    std::string& v = cfg.*f;
    if (v.empty() || v == before.*f || std::filesystem::path(v).is_absolute()) continue;
    v = (dir / v).lexically_normal().string();
  }
  return cfg;
}

/// Every non-null, non-empty path in `paths` must name an existing file.
inline void require_files(std::initializer_list<std::pair<const char*, const std::string*>> paths) {
  for (const auto& [name, p] : paths) {
    if (!p || p->empty()) continue;
    if (!std::filesystem::is_regular_file(*p))
      throw ConfigError(std::string(name) + " '" + *p + "' does not exist");
  }
}

}  // namespace wsd
