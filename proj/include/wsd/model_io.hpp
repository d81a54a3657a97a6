#pragma once

// Binary model container. Layout (all integers little-endian, weights as
// row-major IEEE-754 binary32), documented in docs/model_format.md:
//
//   "SBW1" | u8 version | u32 d, |V|, senses, hidden, L, R | u32 mode | u64 shuffle seed
//   vocab:     |V|-1 strings (ids 1..|V|-1; PAD is implicit)
//   inventory: u32 lexelt count, lexelt names; then per sense id: u32 lexelt index, name
//   weights:   word table (d x |V|), sense table (d x senses),
//              left/right LSTM (W 4H x 1, U 4H x H, b 4H) or left/right dense (W H x L|R, b H),
//              W_h (H x 2H), b_h (H), W_out (1 x H), b_out (1)
//
// Strings are u32 byte length followed by UTF-8 bytes.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "wsd/errors.hpp"
#include "wsd/model.hpp"

namespace wsd {

inline constexpr char kModelMagic[4] = {'S', 'B', 'W', '1'};
inline constexpr std::uint8_t kModelVersion = 1;

namespace detail {

class ByteWriter {
 public:
  explicit ByteWriter(std::ostream& out) : out_(out) {}

  void bytes(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
  void u8(std::uint8_t v) { bytes(&v, 1); }
  void u32(std::uint32_t v) {
    unsigned char b[4];
    for (int k = 0; k < 4; ++k) b[k] = static_cast<unsigned char>(v >> (8 * k));
    bytes(b, 4);
  }
  void u64(std::uint64_t v) {
    unsigned char b[8];
    for (int k = 0; k < 8; ++k) b[k] = static_cast<unsigned char>(v >> (8 * k));
    bytes(b, 8);
  }
  void f32(double v) { u32(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  void block(std::span<const double> v) {
    for (double x : v) f32(x);
  }

 private:
  std::ostream& out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::istream& in) : in_(in) {}

  void bytes(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) throw CorruptionError("model file truncated");
  }
  std::uint8_t u8() {
    std::uint8_t v;
    bytes(&v, 1);
    return v;
  }
  std::uint32_t u32() {
    unsigned char b[4];
    bytes(b, 4);
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= std::uint32_t(b[k]) << (8 * k);
    return v;
  }
  std::uint64_t u64() {
    unsigned char b[8];
    bytes(b, 8);
    std::uint64_t v = 0;
    for (int k = 0; k < 8; ++k) v |= std::uint64_t(b[k]) << (8 * k);
    return v;
  }
  double f32() { return static_cast<double>(std::bit_cast<float>(u32())); }
  std::string str() {
    const std::uint32_t n = u32();
    if (n > (1u << 20)) throw CorruptionError("implausible string length in model file");
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
  void block(std::span<double> v) {
    for (double& x : v) x = f32();
  }
  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

 private:
  std::istream& in_;
};

}  // namespace detail

inline void save_model(std::ostream& out, const Model& m) {
  const NetworkParams& p = m.params;
  const std::size_t d = p.embedding_size();
  const std::size_t H = p.hidden();
  if (p.words.width() != m.vocab.size()) throw StateError("word table width does not match vocabulary");
  if (p.senses.width() != m.inventory.sense_count()) throw StateError("sense table width does not match inventory");

  detail::ByteWriter w(out);
  w.bytes(kModelMagic, 4);
  w.u8(kModelVersion);
  for (std::size_t v : {d, m.vocab.size(), m.inventory.sense_count(), H, p.variant.left_context,
                        p.variant.right_context})
    w.u32(static_cast<std::uint32_t>(v));
  w.u32(static_cast<std::uint32_t>(p.variant.mode));
  w.u64(p.variant.shuffle_seed);

  for (std::size_t id = 1; id < m.vocab.size(); ++id) w.str(m.vocab.token(static_cast<WordId>(id)));

  w.u32(static_cast<std::uint32_t>(m.inventory.lexelt_count()));
  for (const auto& lx : m.inventory.lexelts()) w.str(lx.name);
  for (SenseId s = 0; s < m.inventory.sense_count(); ++s) {
    w.u32(static_cast<std::uint32_t>(m.inventory.lexelt_of(s)));
    w.str(m.inventory.sense_name(s));
  }

  w.block(p.words.as_matrix().data());
  w.block(p.senses.as_matrix().data());
  if (p.variant.mode == ArchMode::fc_instead_of_blstm) {
    for (const DenseParams* dp : {&p.left_fc, &p.right_fc}) {
      w.block(dp->weights.data());
      w.block(dp->bias);
    }
  } else {
    for (const LstmParams* lp : {&p.left, &p.right}) {
      w.block(lp->input_weights.data());
      w.block(lp->recurrent_weights.data());
      w.block(lp->bias);
    }
  }
  w.block(p.head.hidden_weights.data());
  w.block(p.head.hidden_bias);
  w.block(p.head.output_weights);
  w.f32(p.head.output_bias);
  if (!out) throw IoError("failed writing model");
}

inline void save_model(const std::string& path, const Model& m) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  save_model(out, m);
  out.flush();
  if (!out) throw IoError("failed writing model to '" + path + "'");
}

inline Model load_model(std::istream& in) {
  detail::ByteReader r(in);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kModelMagic, 4) != 0) throw FormatError("not a model file (bad magic)");
  const std::uint8_t version = r.u8();
  if (version != kModelVersion)
    throw FormatError("unsupported model format version " + std::to_string(version));

  const std::size_t d = r.u32(), nv = r.u32(), ns = r.u32(), H = r.u32(), L = r.u32(), R = r.u32();
  const std::uint32_t mode = r.u32();
  if (mode > static_cast<std::uint32_t>(ArchMode::fc_instead_of_blstm))
    throw FormatError("unknown architecture mode " + std::to_string(mode));
  if (d == 0 || nv == 0 || H == 0 || L == 0 || R == 0) throw CorruptionError("zero dimension in model header");
  ArchVariant variant{static_cast<ArchMode>(mode), L, R, 0};
  variant.shuffle_seed = r.u64();

  Model m;
  for (std::size_t id = 1; id < nv; ++id) {
    const std::string tok = r.str();
    if (m.vocab.add(tok) != id) throw CorruptionError("duplicate vocabulary token '" + tok + "'");
  }
  const std::uint32_t nl = r.u32();
  std::vector<std::string> lexelt_names(nl);
  for (auto& name : lexelt_names) {
    name = r.str();
    m.inventory.add_lexelt(name);
  }
  for (std::size_t s = 0; s < ns; ++s) {
    const std::uint32_t li = r.u32();
    if (li >= nl) throw CorruptionError("sense record names lexelt index out of range");
    const std::string name = r.str();
    if (m.inventory.add_sense(lexelt_names[li], name) != s) throw CorruptionError("duplicate sense record");
  }

  NetworkParams p = zero_network(nv, ns, d, H, variant);
  Matrix wm(d, nv), sm(d, ns);
  r.block(wm.data());
  r.block(sm.data());
  for (std::size_t c = 0; c < nv; ++c)
    for (std::size_t k = 0; k < d; ++k) p.words.column(c)[k] = wm(k, c);
  for (std::size_t c = 0; c < ns; ++c)
    for (std::size_t k = 0; k < d; ++k) p.senses.column(c)[k] = sm(k, c);
  if (variant.mode == ArchMode::fc_instead_of_blstm) {
    for (DenseParams* dp : {&p.left_fc, &p.right_fc}) {
      r.block(dp->weights.data());
      r.block(dp->bias);
    }
  } else {
    for (LstmParams* lp : {&p.left, &p.right}) {
      r.block(lp->input_weights.data());
      r.block(lp->recurrent_weights.data());
      r.block(lp->bias);
    }
  }
  r.block(p.head.hidden_weights.data());
  r.block(p.head.hidden_bias);
  r.block(p.head.output_weights);
  p.head.output_bias = r.f32();
  if (!r.at_end()) throw CorruptionError("trailing bytes after model weights");
  m.params = std::move(p);
  return m;
}

inline Model load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model file '" + path + "'");
  return load_model(in);
}

}  // namespace wsd
