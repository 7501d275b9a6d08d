// Checkpoint container and binary file format.
//
// Layout: 8-byte magic, u32 version, config block, u64 step, optional
// validation BLEU, vocab listing, per-tensor records (name, shape, row-major
// f64 little-endian), then an FNV-1a64 checksum of all preceding bytes.
#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "model.hpp"
#include "tensor.hpp"
#include "vocab.hpp"

namespace seqrisk {

struct Checkpoint {
  ModelConfig config;
  Vocab vocab;
  ParamSet params;
  std::uint64_t step = 0;
  std::optional<double> validation_bleu;
};

namespace detail {

inline constexpr char kCkptMagic[8] = {'S', 'Q', 'R', 'K', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCkptVersion = 1;

inline std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_f64(std::string& out, double d) { put_u64(out, std::bit_cast<std::uint64_t>(d)); }
inline void put_str(std::string& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out += s;
}

struct ByteReader {
  const std::string& buf;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > buf.size()) throw std::runtime_error("corrupt checkpoint: truncated");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    pos += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    pos += 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    std::uint32_t n = u32();
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

}  // namespace detail

inline std::string serialize_checkpoint(const Checkpoint& ckpt) {
  std::string out;
  out.append(detail::kCkptMagic, sizeof(detail::kCkptMagic));
  detail::put_u32(out, detail::kCkptVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(ckpt.config.vocab_size));
  detail::put_u32(out, static_cast<std::uint32_t>(ckpt.config.embed_dim));
  detail::put_u32(out, static_cast<std::uint32_t>(ckpt.config.hidden_dim));
  detail::put_u32(out, static_cast<std::uint32_t>(ckpt.config.num_heads));
  detail::put_u32(out, static_cast<std::uint32_t>(ckpt.config.max_len));
  detail::put_u64(out, ckpt.config.seed);
  detail::put_u64(out, ckpt.step);
  out.push_back(ckpt.validation_bleu ? '\1' : '\0');
  detail::put_f64(out, ckpt.validation_bleu.value_or(0.0));
  detail::put_u32(out, static_cast<std::uint32_t>(ckpt.vocab.size()));
  for (const std::string& tok : ckpt.vocab.tokens()) detail::put_str(out, tok);
  detail::put_u32(out, static_cast<std::uint32_t>(ckpt.params.size()));
  for (std::size_t i = 0; i < ckpt.params.size(); ++i) {
    const auto& [name, tensor] = ckpt.params.entry(i);
    detail::put_str(out, name);
    detail::put_u32(out, static_cast<std::uint32_t>(tensor.shape.size()));
    for (std::size_t d : tensor.shape) detail::put_u64(out, d);
    for (double v : tensor.data) detail::put_f64(out, v);
  }
  detail::put_u64(out, detail::fnv1a64(out));
  return out;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::string bytes = serialize_checkpoint(ckpt);
  std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + tmp);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw std::runtime_error("write failed: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw std::runtime_error("cannot rename " + tmp + " to " + path);
}

inline Checkpoint parse_checkpoint(const std::string& bytes) {
  if (bytes.size() < sizeof(detail::kCkptMagic) + 12)
    throw std::runtime_error("corrupt checkpoint: truncated");
  if (bytes.compare(0, sizeof(detail::kCkptMagic), detail::kCkptMagic,
                    sizeof(detail::kCkptMagic)) != 0)
    throw std::runtime_error("corrupt checkpoint: bad magic");
  std::uint64_t stored = 0;
  {
    detail::ByteReader tail{bytes, bytes.size() - 8};
    stored = tail.u64();
  }
  if (detail::fnv1a64(bytes.substr(0, bytes.size() - 8)) != stored)
    throw std::runtime_error("corrupt checkpoint: checksum mismatch");

  detail::ByteReader r{bytes, sizeof(detail::kCkptMagic)};
  std::uint32_t version = r.u32();
  if (version != detail::kCkptVersion)
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  Checkpoint ckpt;
  ckpt.config.vocab_size = static_cast<int>(r.u32());
  ckpt.config.embed_dim = static_cast<int>(r.u32());
  ckpt.config.hidden_dim = static_cast<int>(r.u32());
  ckpt.config.num_heads = static_cast<int>(r.u32());
  ckpt.config.max_len = static_cast<int>(r.u32());
  ckpt.config.seed = r.u64();
  ckpt.step = r.u64();
  r.need(1);
  bool has_val = bytes[r.pos++] != '\0';
  double val = r.f64();
  if (has_val) ckpt.validation_bleu = val;
  std::uint32_t vocab_count = r.u32();
  ckpt.vocab = Vocab();
  for (std::uint32_t i = 0; i < vocab_count; ++i) {
    std::string tok = r.str();
    if (i < 4) {
      if (tok != ckpt.vocab.token(static_cast<int>(i)))
        throw std::runtime_error("corrupt checkpoint: reserved vocab entry mismatch");
    } else {
      ckpt.vocab.add(tok);
    }
  }
  std::uint32_t tensor_count = r.u32();
  for (std::uint32_t i = 0; i < tensor_count; ++i) {
    std::string name = r.str();
    std::uint32_t ndim = r.u32();
    Tensor t;
    std::size_t n = 1;
    for (std::uint32_t d = 0; d < ndim; ++d) {
      std::size_t dim = static_cast<std::size_t>(r.u64());
      t.shape.push_back(dim);
      n *= dim;
    }
    if (n > (bytes.size() / 8) + 1) throw std::runtime_error("corrupt checkpoint: bad shape");
    t.data.reserve(n);
    for (std::size_t k = 0; k < n; ++k) t.data.push_back(r.f64());
    ckpt.params.add(name, std::move(t));
  }

  validate_config(ckpt.config);
  if (ckpt.vocab.size() != ckpt.config.vocab_size)
    throw std::runtime_error("checkpoint vocab size does not match config");
  auto expected = param_shapes(ckpt.config);
  if (expected.size() != ckpt.params.size())
    throw std::runtime_error("checkpoint shape mismatch: wrong tensor count");
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const auto& [name, shape] = expected[i];
    const auto& [got_name, got] = ckpt.params.entry(i);
    if (got_name != name || got.shape != shape)
      throw std::runtime_error("checkpoint shape mismatch at tensor " + name);
  }
  return ckpt;
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return parse_checkpoint(bytes);
}

// Element-wise mean; computed as x0 + sum_i (x_i - x0)/k so averaging k
// identical checkpoints reproduces them bitwise.
inline Checkpoint average_checkpoints(const std::vector<Checkpoint>& ckpts) {
  if (ckpts.empty()) throw std::invalid_argument("average_checkpoints: no checkpoints");
  const Checkpoint& first = ckpts.front();
  for (const Checkpoint& c : ckpts) {
    if (!(c.config == first.config))
      throw std::invalid_argument("average_checkpoints: config mismatch");
    if (!(c.vocab == first.vocab))
      throw std::invalid_argument("average_checkpoints: vocab mismatch");
    if (!c.params.same_shapes(first.params))
      throw std::invalid_argument("average_checkpoints: shape mismatch");
  }
  Checkpoint out;
  out.config = first.config;
  out.vocab = first.vocab;
  out.params = first.params;
  out.step = first.step;
  double k = static_cast<double>(ckpts.size());
  for (std::size_t c = 1; c < ckpts.size(); ++c) {
    out.step = std::max(out.step, ckpts[c].step);
    for (std::size_t i = 0; i < out.params.size(); ++i) {
      auto& dst = out.params.entry(i).second.data;
      const auto& xi = ckpts[c].params.entry(i).second.data;
      const auto& x0 = first.params.entry(i).second.data;
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += (xi[j] - x0[j]) / k;
    }
  }
  return out;
}

}  // namespace seqrisk