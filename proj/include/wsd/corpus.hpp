#pragma once

// Lexical-sample corpus ingestion: markup parser, answer keys, token
// preprocessing, vocabulary construction and fixed-size context windows.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <iterator>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "wsd/embeddings.hpp"
#include "wsd/errors.hpp"
#include "wsd/numkit.hpp"

namespace wsd {

/// One occurrence of an ambiguous word. Tokens exclude the target itself.
struct Instance {
  std::string id;
  std::string lexelt;
  std::vector<std::string> gold;  // empty when unlabeled
  std::vector<std::string> left;
  std::string head;
  std::vector<std::string> right;

  friend bool operator==(const Instance&, const Instance&) = default;
};

struct LexicalSample {
  SenseInventory inventory;
  std::vector<Instance> instances;
  std::vector<std::string> diagnostics;  // rejected instances
};

/// Left ids run from position -L to -1, right ids from +1 to +R.
struct ContextWindow {
  std::vector<WordId> left;
  std::vector<WordId> right;

  friend bool operator==(const ContextWindow&, const ContextWindow&) = default;
};

/// Whitespace split, then leading/trailing punctuation stripped. Internal
/// hyphens and apostrophes survive.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  const auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
  const auto is_punct = [](char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; };
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    std::size_t end = i;
    while (start < end && is_punct(text[start])) ++start;
    while (end > start && is_punct(text[end - 1])) --end;
    if (end > start) out.emplace_back(text.substr(start, end - start));
  }
  return out;
}

/// True for tokens made only of digits and the separators '.' and ','.
inline bool is_numeric_token(std::string_view tok) {
  bool digit = false;
  for (char c : tok) {
    if (std::isdigit(static_cast<unsigned char>(c))) {
      digit = true;
    } else if (c != '.' && c != ',') {
      return false;
    }
  }
  return digit;
}

/// Lowercases every token and drops numeric tokens.
inline std::vector<std::string> preprocess(const std::vector<std::string>& tokens) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) {
    if (is_numeric_token(t)) continue;
    std::string lower = t;
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    out.push_back(std::move(lower));
  }
  return out;
}

inline Instance preprocess(Instance inst) {
  inst.left = preprocess(inst.left);
  inst.right = preprocess(inst.right);
  return inst;
}

inline std::vector<Instance> preprocess(std::vector<Instance> instances) {
  for (auto& inst : instances) inst = preprocess(std::move(inst));
  return instances;
}

namespace detail {

inline std::string decode_entities(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '&') {
      out.push_back(s[i]);
      continue;
    }
    const auto semi = s.find(';', i);
    if (semi == std::string_view::npos || semi - i > 8) {
      out.push_back('&');
      continue;
    }
    const auto ent = s.substr(i + 1, semi - i - 1);
    if (ent == "amp") out.push_back('&');
    else if (ent == "lt") out.push_back('<');
    else if (ent == "gt") out.push_back('>');
    else if (ent == "quot") out.push_back('"');
    else if (ent == "apos") out.push_back('\'');
    else {
      out.push_back('&');
      continue;
    }
    i = semi;
  }
  return out;
}

inline std::string encode_entities(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

struct Tag {
  std::string name;
  bool closing = false;
  bool self_closing = false;
  std::map<std::string, std::string> attrs;
};

inline Tag parse_tag(std::string_view body, std::size_t line) {
  Tag tag;
  std::size_t i = 0;
  if (i < body.size() && body[i] == '/') {
    tag.closing = true;
    ++i;
  }
  if (!body.empty() && body.back() == '/') {
    tag.self_closing = true;
    body.remove_suffix(1);
  }
  const auto is_name = [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == ':' || c == '.';
  };
  const std::size_t ns = i;
  while (i < body.size() && is_name(body[i])) ++i;
  tag.name = std::string(body.substr(ns, i - ns));
  std::transform(tag.name.begin(), tag.name.end(), tag.name.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (tag.name.empty()) throw ParseError("malformed tag <" + std::string(body) + ">", line);
  while (i < body.size()) {
    while (i < body.size() && std::isspace(static_cast<unsigned char>(body[i]))) ++i;
    if (i >= body.size()) break;
    const std::size_t ks = i;
    while (i < body.size() && is_name(body[i])) ++i;
    std::string key(body.substr(ks, i - ks));
    if (key.empty()) throw ParseError("malformed attribute in <" + std::string(body) + ">", line);
    while (i < body.size() && std::isspace(static_cast<unsigned char>(body[i]))) ++i;
    if (i >= body.size() || body[i] != '=') {
      tag.attrs[key] = "";
      continue;
    }
    ++i;
    while (i < body.size() && std::isspace(static_cast<unsigned char>(body[i]))) ++i;
    std::string value;
    if (i < body.size() && (body[i] == '"' || body[i] == '\'')) {
      const char q = body[i++];
      const auto end = body.find(q, i);
      if (end == std::string_view::npos) throw ParseError("unterminated attribute value", line);
      value = decode_entities(body.substr(i, end - i));
      i = end + 1;
    } else {
      const std::size_t vs = i;
      while (i < body.size() && !std::isspace(static_cast<unsigned char>(body[i]))) ++i;
      value = decode_entities(body.substr(vs, i - vs));
    }
    tag.attrs[key] = std::move(value);
  }
  return tag;
}

}  // namespace detail

/// Parses lexical-sample markup: <lexelt item=...> groups of
/// <instance id=...> elements, each holding optional <answer senseid=.../>
/// records and a <context> whose target occurrence is wrapped in <head>.
/// Candidate senses are collected from the answer records in order of first
/// appearance.
inline LexicalSample parse_lexical_sample(std::istream& in) {
  const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  LexicalSample out;

  std::string lexelt;
  bool in_instance = false;
  bool in_context = false;
  int head_state = 0;  // 0 before head, 1 inside, 2 after
  int heads = 0;
  Instance cur;
  std::size_t cur_line = 0;
  std::string before, inside, after;

  std::size_t line = 1;
  std::size_t i = 0;
  auto advance_lines = [&](std::size_t from, std::size_t to) {
    line += static_cast<std::size_t>(std::count(text.begin() + static_cast<std::ptrdiff_t>(from),
                                                text.begin() + static_cast<std::ptrdiff_t>(to), '\n'));
  };

  while (i < text.size()) {
    const auto lt = text.find('<', i);
    const std::size_t chunk_end = lt == std::string::npos ? text.size() : lt;
    if (in_context && chunk_end > i) {
      const auto chunk = std::string_view(text).substr(i, chunk_end - i);
      (head_state == 0 ? before : head_state == 1 ? inside : after) += chunk;
    }
    advance_lines(i, chunk_end);
    if (lt == std::string::npos) break;

    if (text.compare(lt, 4, "<!--") == 0) {
      const auto end = text.find("-->", lt);
      if (end == std::string::npos) throw ParseError("unterminated comment", line);
      advance_lines(lt, end + 3);
      i = end + 3;
      continue;
    }
    const auto gt = text.find('>', lt);
    if (gt == std::string::npos) throw ParseError("unterminated tag", line);
    const std::string_view body = std::string_view(text).substr(lt + 1, gt - lt - 1);
    const std::size_t tag_line = line;
    advance_lines(lt, gt + 1);
    i = gt + 1;
    if (!body.empty() && (body.front() == '?' || body.front() == '!')) continue;

    const detail::Tag tag = detail::parse_tag(body, tag_line);
    if (tag.name == "lexelt") {
      if (tag.closing) {
        lexelt.clear();
      } else {
        auto it = tag.attrs.find("item");
        if (it == tag.attrs.end() || it->second.empty())
          throw ParseError("<lexelt> without item attribute", tag_line);
        lexelt = it->second;
        out.inventory.add_lexelt(lexelt);
      }
    } else if (tag.name == "instance") {
      if (!tag.closing) {
        if (lexelt.empty()) throw ParseError("<instance> outside <lexelt>", tag_line);
        auto it = tag.attrs.find("id");
        if (it == tag.attrs.end() || it->second.empty())
          throw ParseError("<instance> without id attribute", tag_line);
        cur = Instance{};
        cur.id = it->second;
        cur.lexelt = lexelt;
        cur_line = tag_line;
        in_instance = true;
        heads = 0;
        head_state = 0;
        before.clear();
        inside.clear();
        after.clear();
      } else if (in_instance) {
        in_instance = false;
        if (heads == 0) {
          out.diagnostics.push_back("instance '" + cur.id + "' (line " + std::to_string(cur_line) +
                                    ") rejected: no <head> target markup");
          continue;
        }
        cur.left = tokenize(detail::decode_entities(before));
        cur.head = detail::decode_entities(inside);
        cur.right = tokenize(detail::decode_entities(after));
        out.instances.push_back(std::move(cur));
      }
    } else if (tag.name == "answer") {
      if (!in_instance) throw ParseError("<answer> outside <instance>", tag_line);
      auto it = tag.attrs.find("senseid");
      if (it == tag.attrs.end() || it->second.empty())
        throw ParseError("<answer> without senseid attribute", tag_line);
      if (std::find(cur.gold.begin(), cur.gold.end(), it->second) == cur.gold.end()) {
        cur.gold.push_back(it->second);
        out.inventory.add_sense(cur.lexelt, it->second);
      }
    } else if (tag.name == "context") {
      if (!in_instance) throw ParseError("<context> outside <instance>", tag_line);
      in_context = !tag.closing && !tag.self_closing;
    } else if (tag.name == "head") {
      if (!in_context) continue;
      if (!tag.closing) {
        // Only the first marked occurrence is the target; later ones are
        // treated as ordinary context.
        if (heads++ == 0) head_state = 1;
      } else if (head_state == 1) {
        head_state = 2;
      }
    }
  }
  if (in_instance) throw ParseError("unterminated <instance> '" + cur.id + "'", cur_line);
  return out;
}

inline LexicalSample parse_lexical_sample(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open lexical-sample file '" + path + "'");
  return parse_lexical_sample(in);
}

/// Inverse of parse_lexical_sample (up to whitespace). Instances are written
/// grouped under their lexelt in inventory order.
inline void write_lexical_sample(std::ostream& out, const SenseInventory& inv,
                                 const std::vector<Instance>& instances) {
  using detail::encode_entities;
  const auto join = [](const std::vector<std::string>& toks) {
    std::string s;
    for (const auto& t : toks) {
      if (!s.empty()) s.push_back(' ');
      s += encode_entities(t);
    }
    return s;
  };
  out << "<corpus lang=\"english\">\n";
  for (const auto& lx : inv.lexelts()) {
    out << "<lexelt item=\"" << encode_entities(lx.name) << "\">\n";
    for (const auto& inst : instances) {
      if (inst.lexelt != lx.name) continue;
      out << "<instance id=\"" << encode_entities(inst.id) << "\">\n";
      for (const auto& g : inst.gold)
        out << "<answer instance=\"" << encode_entities(inst.id) << "\" senseid=\"" << encode_entities(g)
            << "\"/>\n";
      out << "<context>\n" << join(inst.left) << " <head>" << encode_entities(inst.head) << "</head> "
          << join(inst.right) << "\n</context>\n</instance>\n";
    }
    out << "</lexelt>\n";
  }
  out << "</corpus>\n";
}

struct KeyEntry {
  std::string lexelt;
  std::string instance;
  std::vector<std::string> senses;

  friend bool operator==(const KeyEntry&, const KeyEntry&) = default;
};

/// Answer key / answer file: one `lexelt instance-id sense-id [sense-id...]`
/// record per line.
inline std::vector<KeyEntry> read_answer_key(std::istream& in) {
  std::vector<KeyEntry> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    std::istringstream ls(line);
    KeyEntry e;
    if (!(ls >> e.lexelt)) continue;
    if (!(ls >> e.instance)) throw ParseError("answer record without instance id", n);
    for (std::string s; ls >> s;) e.senses.push_back(s);
    if (e.senses.empty()) throw ParseError("answer record without sense id", n);
    out.push_back(std::move(e));
  }
  return out;
}

inline std::vector<KeyEntry> read_answer_key(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open answer key '" + path + "'");
  return read_answer_key(in);
}

/// Copies gold senses from `key` onto matching instances. A key record for a
/// lexelt missing from `inv` is a KeyError.
inline void apply_answer_key(std::vector<Instance>& instances, const std::vector<KeyEntry>& key,
                             const SenseInventory& inv) {
  std::map<std::string, const KeyEntry*> by_id;
  for (const auto& e : key) {
    if (!inv.find_lexelt(e.lexelt)) throw KeyError("answer key names unknown lexelt '" + e.lexelt + "'");
    by_id[e.instance] = &e;
  }
  for (auto& inst : instances) {
    if (auto it = by_id.find(inst.id); it != by_id.end()) inst.gold = it->second->senses;
  }
}

/// Throws KeyError unless every instance's lexelt is in the inventory and
/// every gold sense is one of its candidates.
inline void validate_instances(const std::vector<Instance>& instances, const SenseInventory& inv) {
  for (const auto& inst : instances) {
    const auto li = inv.find_lexelt(inst.lexelt);
    if (!li) throw KeyError("instance '" + inst.id + "' has unknown lexelt '" + inst.lexelt + "'");
    for (const auto& g : inst.gold)
      if (!inv.find_sense(*li, g))
        throw KeyError("instance '" + inst.id + "' gold sense '" + g + "' is not a candidate of '" +
                       inst.lexelt + "'");
  }
}

/// Vocabulary over the (already preprocessed) context tokens, in order of
/// first appearance.
inline Vocabulary build_vocab(const std::vector<Instance>& instances) {
  Vocabulary v;
  for (const auto& inst : instances) {
    for (const auto& t : inst.left) v.add(t);
    for (const auto& t : inst.right) v.add(t);
  }
  return v;
}

/// Nearest L tokens on the left (left-padded) and R on the right
/// (right-padded). Unknown tokens become kPadId.
inline ContextWindow make_window(const Instance& inst, const Vocabulary& vocab, std::size_t L, std::size_t R) {
  if (L == 0 || R == 0) throw ConfigError("context sizes must be positive");
  ContextWindow w{std::vector<WordId>(L, kPadId), std::vector<WordId>(R, kPadId)};
  const std::size_t nl = std::min(L, inst.left.size());
  for (std::size_t k = 0; k < nl; ++k) w.left[L - 1 - k] = vocab.id(inst.left[inst.left.size() - 1 - k]);
  const std::size_t nr = std::min(R, inst.right.size());
  for (std::size_t k = 0; k < nr; ++k) w.right[k] = vocab.id(inst.right[k]);
  return w;
}

/// Part of speech from the lexelt suffix ("cold.a" -> "a").
inline std::string lexelt_pos(std::string_view lexelt) {
  const auto dot = lexelt.rfind('.');
  return dot == std::string_view::npos ? std::string() : std::string(lexelt.substr(dot + 1));
}

struct PosStats {
  std::size_t words = 0;
  double mean_senses = 0.0;
};

struct InventoryStats {
  std::map<std::string, PosStats> per_pos;
  PosStats total;
};

inline InventoryStats inventory_stats(const SenseInventory& inv) {
  InventoryStats st;
  std::map<std::string, std::size_t> sense_sums;
  std::size_t total_senses = 0;
  for (const auto& lx : inv.lexelts()) {
    const auto pos = lexelt_pos(lx.name);
    ++st.per_pos[pos].words;
    sense_sums[pos] += lx.senses.size();
    total_senses += lx.senses.size();
  }
  for (auto& [pos, ps] : st.per_pos) ps.mean_senses = double(sense_sums[pos]) / double(ps.words);
  st.total.words = inv.lexelt_count();
  st.total.mean_senses = st.total.words ? double(total_senses) / double(st.total.words) : 0.0;
  return st;
}

struct Split {
  std::vector<Instance> train;
  std::vector<Instance> validation;
};

/// Per-lexelt stratified split. Each lexelt with at least two instances
/// contributes round(n * fraction) instances (at most n - 1) to validation.
/// Both outputs keep input order.
inline Split split_validation(const std::vector<Instance>& instances, double fraction, Rng& rng) {
  if (!(fraction > 0.0 && fraction < 1.0))
    throw ConfigError("validation fraction must be in (0, 1), got " + std::to_string(fraction));
  std::vector<std::string> order;
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    auto [it, fresh] = groups.try_emplace(instances[i].lexelt);
    if (fresh) order.push_back(instances[i].lexelt);
    it->second.push_back(i);
  }
  std::vector<bool> is_val(instances.size(), false);
  for (const auto& lx : order) {
    auto& idx = groups[lx];
    const std::size_t n = idx.size();
    if (n < 2) continue;
    auto k = static_cast<std::size_t>(std::llround(double(n) * fraction));
    k = std::min(k, n - 1);
    rng.shuffle(idx);
    for (std::size_t j = 0; j < k; ++j) is_val[idx[j]] = true;
  }
  Split s;
  for (std::size_t i = 0; i < instances.size(); ++i)
    (is_val[i] ? s.validation : s.train).push_back(instances[i]);
  return s;
}

}  // namespace wsd
