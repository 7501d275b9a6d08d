// Small encoder-decoder translation model, 64-bit floats, exact analytic
// gradients.
//
// Frozen wiring.  Encoder: slot 0 is a BOS marker, slots 1..m-1 the source
// tokens; x_j = src_embed[e_j] + src_pos[j]; h_j = tanh(enc_w x_j + enc_b);
// hbar = mean_j h_j; s_0 = tanh(init_w hbar + init_b).  Decoder steps
// t = 1..T+1 consume z_{t-1} (z_0 = BOS, z_t = y_t) and predict y_t, with
// y_{T+1} = EOS: s_t = tanh(dec_w_state s_{t-1} + dec_w_embed tgt_embed[z_{t-1}]
// + dec_b); single-head attention e_{t,j} = s_t . (attn_w h_j), alpha =
// softmax(e), c_t = sum_j alpha_j h_j; u_t = tanh(comb_w_state s_t +
// comb_w_ctx c_t + comb_b); logits = out_w u_t + out_b.  log_prob sums the
// log-softmax terms of y_1..y_T and the closing EOS step.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rng.hpp"
#include "tensor.hpp"
#include "text.hpp"
#include "vocab.hpp"

namespace seqrisk {

struct ModelConfig {
  int vocab_size = 0;
  int embed_dim = 0;
  int hidden_dim = 0;
  int num_heads = 1;
  int max_len = 32;
  std::uint64_t seed = 1;

  bool operator==(const ModelConfig&) const = default;
};

inline void validate_config(const ModelConfig& cfg) {
  if (cfg.vocab_size < 5) throw std::invalid_argument("ModelConfig: vocab_size must be >= 5");
  if (cfg.embed_dim < 1 || cfg.hidden_dim < 1)
    throw std::invalid_argument("ModelConfig: dims must be >= 1");
  if (cfg.max_len < 2) throw std::invalid_argument("ModelConfig: max_len must be >= 2");
  if (cfg.num_heads != 1)
    throw std::invalid_argument("ModelConfig: only single-head attention is supported");
}

inline std::vector<std::pair<std::string, std::vector<std::size_t>>> param_shapes(
    const ModelConfig& cfg) {
  std::size_t V = static_cast<std::size_t>(cfg.vocab_size);
  std::size_t E = static_cast<std::size_t>(cfg.embed_dim);
  std::size_t H = static_cast<std::size_t>(cfg.hidden_dim);
  std::size_t L = static_cast<std::size_t>(cfg.max_len) + 1;
  return {
      {"src_embed", {V, E}},   {"tgt_embed", {V, E}},    {"src_pos", {L, E}},
      {"enc_w", {H, E}},       {"enc_b", {H}},           {"init_w", {H, H}},
      {"init_b", {H}},         {"dec_w_state", {H, H}},  {"dec_w_embed", {H, E}},
      {"dec_b", {H}},          {"attn_w", {H, H}},       {"comb_w_state", {H, H}},
      {"comb_w_ctx", {H, H}},  {"comb_b", {H}},          {"out_w", {V, H}},
      {"out_b", {V}},
  };
}

// Output projection starts at zero, so a fresh model is an exact uniform
// distribution at every step.
inline ParamSet init_params(const ModelConfig& cfg) {
  validate_config(cfg);
  ParamSet params;
  Rng rng(cfg.seed, /*stream=*/2);
  for (const auto& [name, shape] : param_shapes(cfg)) {
    Tensor t = Tensor::zeros(shape);
    if (name != "out_w" && name != "out_b" && !name.ends_with("_b"))
      for (double& x : t.data) x = 0.1 * rng.normal();
    params.add(name, std::move(t));
  }
  return params;
}

inline ParamSet zero_grads(const ModelConfig& cfg) {
  ParamSet g;
  for (const auto& [name, shape] : param_shapes(cfg)) g.add(name, Tensor::zeros(shape));
  return g;
}

namespace detail {

inline void add_matvec(const Tensor& w, const double* x, double* out) {
  std::size_t r = w.rows(), c = w.cols();
  for (std::size_t i = 0; i < r; ++i) {
    const double* row = w.data.data() + i * c;
    double acc = 0.0;
    for (std::size_t j = 0; j < c; ++j) acc += row[j] * x[j];
    out[i] += acc;
  }
}

inline void add_matvec_t(const Tensor& w, const double* v, double* out) {
  std::size_t r = w.rows(), c = w.cols();
  for (std::size_t i = 0; i < r; ++i) {
    const double* row = w.data.data() + i * c;
    double vi = v[i];
    if (vi == 0.0) continue;
    for (std::size_t j = 0; j < c; ++j) out[j] += row[j] * vi;
  }
}

inline void add_outer(Tensor& w, const double* a, const double* b) {
  std::size_t r = w.rows(), c = w.cols();
  for (std::size_t i = 0; i < r; ++i) {
    double ai = a[i];
    if (ai == 0.0) continue;
    double* row = w.data.data() + i * c;
    for (std::size_t j = 0; j < c; ++j) row[j] += ai * b[j];
  }
}

inline double log_sum_exp(const std::vector<double>& v) {
  double m = *std::max_element(v.begin(), v.end());
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - m);
  return m + std::log(acc);
}

inline void check_ids(const IdSeq& seq, int vocab_size, const char* what) {
  for (int id : seq)
    if (id < 0 || id >= vocab_size)
      throw std::invalid_argument(std::string(what) + ": token id out of vocabulary");
}

// Target framing: everything from the first EOS on is ignored, so padding
// beyond EOS cannot change the result.
inline IdSeq effective_target(const IdSeq& tgt) {
  auto it = std::find(tgt.begin(), tgt.end(), Vocab::kEos);
  return IdSeq(tgt.begin(), it);
}

struct Encoded {
  int m = 0;
  std::vector<double> x, h, p;  // m x E, m x H, m x H
  std::vector<double> hbar, s0;
};

inline Encoded encode(const ModelConfig& cfg, const ParamSet& params, const IdSeq& src) {
  check_ids(src, cfg.vocab_size, "encode");
  if (static_cast<int>(src.size()) > cfg.max_len)
    throw std::invalid_argument("encode: source exceeds max_len");
  const Tensor& src_embed = params.get("src_embed");
  const Tensor& src_pos = params.get("src_pos");
  const Tensor& enc_w = params.get("enc_w");
  const Tensor& enc_b = params.get("enc_b");
  const Tensor& attn_w = params.get("attn_w");
  const Tensor& init_w = params.get("init_w");
  const Tensor& init_b = params.get("init_b");
  std::size_t E = static_cast<std::size_t>(cfg.embed_dim);
  std::size_t H = static_cast<std::size_t>(cfg.hidden_dim);

  Encoded enc;
  enc.m = static_cast<int>(src.size()) + 1;
  enc.x.assign(enc.m * E, 0.0);
  enc.h.assign(enc.m * H, 0.0);
  enc.p.assign(enc.m * H, 0.0);
  enc.hbar.assign(H, 0.0);
  enc.s0.assign(H, 0.0);

  for (int j = 0; j < enc.m; ++j) {
    int tok = j == 0 ? Vocab::kBos : src[j - 1];
    double* xj = enc.x.data() + j * E;
    const double* emb = src_embed.row(tok);
    const double* pos = src_pos.row(j);
    for (std::size_t k = 0; k < E; ++k) xj[k] = emb[k] + pos[k];
    double* hj = enc.h.data() + j * H;
    for (std::size_t k = 0; k < H; ++k) hj[k] = enc_b.data[k];
    add_matvec(enc_w, xj, hj);
    for (std::size_t k = 0; k < H; ++k) hj[k] = std::tanh(hj[k]);
    add_matvec(attn_w, hj, enc.p.data() + j * H);
    for (std::size_t k = 0; k < H; ++k) enc.hbar[k] += hj[k];
  }
  for (std::size_t k = 0; k < H; ++k)
    enc.hbar[k] /= static_cast<double>(enc.m);
  for (std::size_t k = 0; k < H; ++k) enc.s0[k] = init_b.data[k];
  add_matvec(init_w, enc.hbar.data(), enc.s0.data());
  for (std::size_t k = 0; k < H; ++k) enc.s0[k] = std::tanh(enc.s0[k]);
  return enc;
}

struct StepCache {
  std::vector<double> s, alpha, c, u, logits;
};

// Advances the decoder state from s_prev on input token z_prev and produces
// the next-token logits.
inline StepCache decode_step(const ModelConfig& cfg, const ParamSet& params, const Encoded& enc,
                             const std::vector<double>& s_prev, int z_prev) {
  const Tensor& tgt_embed = params.get("tgt_embed");
  const Tensor& dec_w_state = params.get("dec_w_state");
  const Tensor& dec_w_embed = params.get("dec_w_embed");
  const Tensor& dec_b = params.get("dec_b");
  const Tensor& comb_w_state = params.get("comb_w_state");
  const Tensor& comb_w_ctx = params.get("comb_w_ctx");
  const Tensor& comb_b = params.get("comb_b");
  const Tensor& out_w = params.get("out_w");
  const Tensor& out_b = params.get("out_b");
  std::size_t H = static_cast<std::size_t>(cfg.hidden_dim);
  std::size_t V = static_cast<std::size_t>(cfg.vocab_size);

  StepCache sc;
  sc.s.assign(H, 0.0);
  for (std::size_t k = 0; k < H; ++k) sc.s[k] = dec_b.data[k];
  add_matvec(dec_w_state, s_prev.data(), sc.s.data());
  add_matvec(dec_w_embed, tgt_embed.row(z_prev), sc.s.data());
  for (std::size_t k = 0; k < H; ++k) sc.s[k] = std::tanh(sc.s[k]);

  sc.alpha.assign(enc.m, 0.0);
  double emax = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < enc.m; ++j) {
    const double* pj = enc.p.data() + j * H;
    double e = 0.0;
    for (std::size_t k = 0; k < H; ++k) e += sc.s[k] * pj[k];
    sc.alpha[j] = e;
    emax = std::max(emax, e);
  }
  double z = 0.0;
  for (int j = 0; j < enc.m; ++j) {
    sc.alpha[j] = std::exp(sc.alpha[j] - emax);
    z += sc.alpha[j];
  }
  sc.c.assign(H, 0.0);
  for (int j = 0; j < enc.m; ++j) {
    sc.alpha[j] /= z;
    const double* hj = enc.h.data() + j * H;
    for (std::size_t k = 0; k < H; ++k) sc.c[k] += sc.alpha[j] * hj[k];
  }

  sc.u.assign(H, 0.0);
  for (std::size_t k = 0; k < H; ++k) sc.u[k] = comb_b.data[k];
  add_matvec(comb_w_state, sc.s.data(), sc.u.data());
  add_matvec(comb_w_ctx, sc.c.data(), sc.u.data());
  for (std::size_t k = 0; k < H; ++k) sc.u[k] = std::tanh(sc.u[k]);

  sc.logits.assign(V, 0.0);
  for (std::size_t k = 0; k < V; ++k) sc.logits[k] = out_b.data[k];
  add_matvec(out_w, sc.u.data(), sc.logits.data());
  return sc;
}

inline std::vector<double> log_softmax(const std::vector<double>& logits) {
  double lse = log_sum_exp(logits);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

struct ForwardCache {
  Encoded enc;
  std::vector<StepCache> steps;
  std::vector<std::vector<double>> pi;  // per-step softmax
  std::vector<int> inputs;              // z_0..z_T
  std::vector<int> outputs;             // y_1..y_{T+1}
  double log_prob = 0.0;
};

inline ForwardCache forward_teacher(const ModelConfig& cfg, const ParamSet& params,
                                    const IdSeq& src, const IdSeq& tgt_raw) {
  IdSeq tgt = effective_target(tgt_raw);
  check_ids(tgt, cfg.vocab_size, "log_prob");
  if (static_cast<int>(tgt.size()) > cfg.max_len)
    throw std::invalid_argument("log_prob: target exceeds max_len");
  ForwardCache f;
  f.enc = encode(cfg, params, src);
  f.inputs.push_back(Vocab::kBos);
  for (int id : tgt) f.inputs.push_back(id);
  f.outputs = tgt;
  f.outputs.push_back(Vocab::kEos);

  std::vector<double> s = f.enc.s0;
  for (std::size_t t = 0; t < f.outputs.size(); ++t) {
    StepCache sc = decode_step(cfg, params, f.enc, s, f.inputs[t]);
    s = sc.s;
    double lse = log_sum_exp(sc.logits);
    f.log_prob += sc.logits[f.outputs[t]] - lse;
    std::vector<double> pi(sc.logits.size());
    for (std::size_t k = 0; k < pi.size(); ++k) pi[k] = std::exp(sc.logits[k] - lse);
    f.pi.push_back(std::move(pi));
    f.steps.push_back(std::move(sc));
  }
  return f;
}

// Accumulates weight * d(log_prob)/d(theta) into grad.
inline void backward_teacher(const ModelConfig& cfg, const ParamSet& params, const IdSeq& src,
                             const ForwardCache& f, double weight, ParamSet& grad) {
  const Tensor& dec_w_state = params.get("dec_w_state");
  const Tensor& dec_w_embed = params.get("dec_w_embed");
  const Tensor& comb_w_state = params.get("comb_w_state");
  const Tensor& comb_w_ctx = params.get("comb_w_ctx");
  const Tensor& out_w = params.get("out_w");
  const Tensor& attn_w = params.get("attn_w");
  const Tensor& init_w = params.get("init_w");
  const Tensor& enc_w = params.get("enc_w");
  const Tensor& tgt_embed = params.get("tgt_embed");

  Tensor& g_src_embed = grad.get("src_embed");
  Tensor& g_tgt_embed = grad.get("tgt_embed");
  Tensor& g_src_pos = grad.get("src_pos");
  Tensor& g_enc_w = grad.get("enc_w");
  Tensor& g_enc_b = grad.get("enc_b");
  Tensor& g_init_w = grad.get("init_w");
  Tensor& g_init_b = grad.get("init_b");
  Tensor& g_dec_w_state = grad.get("dec_w_state");
  Tensor& g_dec_w_embed = grad.get("dec_w_embed");
  Tensor& g_dec_b = grad.get("dec_b");
  Tensor& g_attn_w = grad.get("attn_w");
  Tensor& g_comb_w_state = grad.get("comb_w_state");
  Tensor& g_comb_w_ctx = grad.get("comb_w_ctx");
  Tensor& g_comb_b = grad.get("comb_b");
  Tensor& g_out_w = grad.get("out_w");
  Tensor& g_out_b = grad.get("out_b");

  std::size_t E = static_cast<std::size_t>(cfg.embed_dim);
  std::size_t H = static_cast<std::size_t>(cfg.hidden_dim);
  std::size_t V = static_cast<std::size_t>(cfg.vocab_size);
  int m = f.enc.m;

  std::vector<double> dh(m * H, 0.0), dp(m * H, 0.0);
  std::vector<double> ds_carry(H, 0.0);

  for (int t = static_cast<int>(f.outputs.size()) - 1; t >= 0; --t) {
    const StepCache& sc = f.steps[t];
    const std::vector<double>& pi = f.pi[t];
    // d log p(y_t) / d logits = onehot - pi, scaled by weight.
    std::vector<double> dlogits(V);
    for (std::size_t k = 0; k < V; ++k) dlogits[k] = -weight * pi[k];
    dlogits[f.outputs[t]] += weight;

    add_outer(g_out_w, dlogits.data(), sc.u.data());
    for (std::size_t k = 0; k < V; ++k) g_out_b.data[k] += dlogits[k];
    std::vector<double> du(H, 0.0);
    add_matvec_t(out_w, dlogits.data(), du.data());

    std::vector<double> dau(H);
    for (std::size_t k = 0; k < H; ++k) dau[k] = (1.0 - sc.u[k] * sc.u[k]) * du[k];
    add_outer(g_comb_w_state, dau.data(), sc.s.data());
    add_outer(g_comb_w_ctx, dau.data(), sc.c.data());
    for (std::size_t k = 0; k < H; ++k) g_comb_b.data[k] += dau[k];

    std::vector<double> ds(H, 0.0), dc(H, 0.0);
    add_matvec_t(comb_w_state, dau.data(), ds.data());
    add_matvec_t(comb_w_ctx, dau.data(), dc.data());
    for (std::size_t k = 0; k < H; ++k) ds[k] += ds_carry[k];

    // Attention: c = sum alpha_j h_j, e_j = s . p_j.
    std::vector<double> dalpha(m, 0.0);
    for (int j = 0; j < m; ++j) {
      const double* hj = f.enc.h.data() + j * H;
      double acc = 0.0;
      for (std::size_t k = 0; k < H; ++k) acc += hj[k] * dc[k];
      dalpha[j] = acc;
      double* dhj = dh.data() + j * H;
      for (std::size_t k = 0; k < H; ++k) dhj[k] += sc.alpha[j] * dc[k];
    }
    double dot = 0.0;
    for (int j = 0; j < m; ++j) dot += sc.alpha[j] * dalpha[j];
    for (int j = 0; j < m; ++j) {
      double de = sc.alpha[j] * (dalpha[j] - dot);
      const double* pj = f.enc.p.data() + j * H;
      double* dpj = dp.data() + j * H;
      for (std::size_t k = 0; k < H; ++k) {
        ds[k] += de * pj[k];
        dpj[k] += de * sc.s[k];
      }
    }

    std::vector<double> das(H);
    for (std::size_t k = 0; k < H; ++k) das[k] = (1.0 - sc.s[k] * sc.s[k]) * ds[k];
    const std::vector<double>& s_prev = t == 0 ? f.enc.s0 : f.steps[t - 1].s;
    add_outer(g_dec_w_state, das.data(), s_prev.data());
    add_outer(g_dec_w_embed, das.data(), tgt_embed.row(f.inputs[t]));
    for (std::size_t k = 0; k < H; ++k) g_dec_b.data[k] += das[k];
    {
      double* ge = g_tgt_embed.data.data() + static_cast<std::size_t>(f.inputs[t]) * E;
      std::vector<double> demb(E, 0.0);
      add_matvec_t(dec_w_embed, das.data(), demb.data());
      for (std::size_t k = 0; k < E; ++k) ge[k] += demb[k];
    }
    ds_carry.assign(H, 0.0);
    add_matvec_t(dec_w_state, das.data(), ds_carry.data());
  }

  // ds_carry now holds d/d s0.
  std::vector<double> da0(H);
  for (std::size_t k = 0; k < H; ++k)
    da0[k] = (1.0 - f.enc.s0[k] * f.enc.s0[k]) * ds_carry[k];
  add_outer(g_init_w, da0.data(), f.enc.hbar.data());
  for (std::size_t k = 0; k < H; ++k) g_init_b.data[k] += da0[k];
  std::vector<double> dhbar(H, 0.0);
  add_matvec_t(init_w, da0.data(), dhbar.data());

  // p_j = attn_w h_j and the mean-pool feed h back.
  for (int j = 0; j < m; ++j) {
    const double* hj = f.enc.h.data() + j * H;
    const double* dpj = dp.data() + j * H;
    add_outer(g_attn_w, dpj, hj);
    double* dhj = dh.data() + j * H;
    std::vector<double> tmp(H, 0.0);
    add_matvec_t(attn_w, dpj, tmp.data());
    for (std::size_t k = 0; k < H; ++k)
      dhj[k] += tmp[k] + dhbar[k] / static_cast<double>(m);
  }

  for (int j = 0; j < m; ++j) {
    const double* hj = f.enc.h.data() + j * H;
    const double* dhj = dh.data() + j * H;
    std::vector<double> dah(H);
    for (std::size_t k = 0; k < H; ++k) dah[k] = (1.0 - hj[k] * hj[k]) * dhj[k];
    const double* xj = f.enc.x.data() + j * E;
    add_outer(g_enc_w, dah.data(), xj);
    for (std::size_t k = 0; k < H; ++k) g_enc_b.data[k] += dah[k];
    std::vector<double> dx(E, 0.0);
    add_matvec_t(enc_w, dah.data(), dx.data());
    int tok = j == 0 ? Vocab::kBos : src[j - 1];
    double* ge = g_src_embed.data.data() + static_cast<std::size_t>(tok) * E;
    double* gp = g_src_pos.data.data() + static_cast<std::size_t>(j) * E;
    for (std::size_t k = 0; k < E; ++k) {
      ge[k] += dx[k];
      gp[k] += dx[k];
    }
  }
}

}  // namespace detail

inline double log_prob(const ModelConfig& cfg, const ParamSet& params, const IdSeq& src,
                       const IdSeq& tgt) {
  return detail::forward_teacher(cfg, params, src, tgt).log_prob;
}

// Adds weight * grad(log_prob) into grad and returns the log-prob.
inline double accumulate_grad_log_prob(const ModelConfig& cfg, const ParamSet& params,
                                       const IdSeq& src, const IdSeq& tgt, double weight,
                                       ParamSet& grad) {
  detail::ForwardCache f = detail::forward_teacher(cfg, params, src, tgt);
  detail::backward_teacher(cfg, params, src, f, weight, grad);
  return f.log_prob;
}

inline ParamSet grad_log_prob(const ModelConfig& cfg, const ParamSet& params, const IdSeq& src,
                              const IdSeq& tgt) {
  ParamSet grad = zero_grads(cfg);
  accumulate_grad_log_prob(cfg, params, src, tgt, 1.0, grad);
  return grad;
}

struct SampleResult {
  IdSeq tokens;
  double log_prob = 0.0;  // untempered, EOS step included
  bool truncated = false;
};

// Ancestral sampling from softmax(logits / tau); the returned log-prob is the
// tau=1 model probability of the sampled sequence, so it always equals
// log_prob(tokens) even for truncated draws.
inline SampleResult sample(const ModelConfig& cfg, const ParamSet& params, const IdSeq& src,
                           double tau, Rng& rng) {
  if (!(tau > 0.0)) throw std::invalid_argument("sample: tau must be > 0");
  detail::Encoded enc = detail::encode(cfg, params, src);
  SampleResult out;
  std::vector<double> s = enc.s0;
  int z = Vocab::kBos;
  for (int t = 0; t < cfg.max_len; ++t) {
    detail::StepCache sc = detail::decode_step(cfg, params, enc, s, z);
    std::vector<double> lp = detail::log_softmax(sc.logits);
    std::vector<double> tempered(sc.logits.size());
    for (std::size_t k = 0; k < tempered.size(); ++k) tempered[k] = sc.logits[k] / tau;
    double lse = detail::log_sum_exp(tempered);
    double u = rng.uniform01();
    double acc = 0.0;
    int pick = static_cast<int>(tempered.size()) - 1;
    for (std::size_t k = 0; k < tempered.size(); ++k) {
      acc += std::exp(tempered[k] - lse);
      if (u < acc) {
        pick = static_cast<int>(k);
        break;
      }
    }
    out.log_prob += lp[pick];
    if (pick == Vocab::kEos) return out;
    out.tokens.push_back(pick);
    s = sc.s;
    z = pick;
  }
  detail::StepCache sc = detail::decode_step(cfg, params, enc, s, z);
  out.log_prob += detail::log_softmax(sc.logits)[Vocab::kEos];
  out.truncated = true;
  return out;
}

inline IdSeq greedy_decode(const ModelConfig& cfg, const ParamSet& params, const IdSeq& src) {
  detail::Encoded enc = detail::encode(cfg, params, src);
  IdSeq out;
  std::vector<double> s = enc.s0;
  int z = Vocab::kBos;
  for (int t = 0; t < cfg.max_len; ++t) {
    detail::StepCache sc = detail::decode_step(cfg, params, enc, s, z);
    int best = 0;
    for (std::size_t k = 1; k < sc.logits.size(); ++k)
      if (sc.logits[k] > sc.logits[best]) best = static_cast<int>(k);
    if (best == Vocab::kEos) break;
    out.push_back(best);
    s = sc.s;
    z = best;
  }
  return out;
}

// Length-unnormalized beam search; finished hypotheses carry their EOS term.
// Ties break by score, then smaller new-token id, then parent beam order.
inline IdSeq beam_search(const ModelConfig& cfg, const ParamSet& params, const IdSeq& src,
                         int beam_size = 4) {
  if (beam_size < 1) throw std::invalid_argument("beam_search: beam_size must be >= 1");
  detail::Encoded enc = detail::encode(cfg, params, src);

  struct Beam {
    IdSeq prefix;
    double score = 0.0;
    std::vector<double> s;
    int last = Vocab::kBos;
  };
  struct Cand {
    double score;
    int token;
    int parent;
  };

  std::vector<Beam> live(1);
  live[0].s = enc.s0;
  bool has_best = false;
  IdSeq best_seq;
  double best_score = -std::numeric_limits<double>::infinity();

  for (int t = 0; t < cfg.max_len && !live.empty(); ++t) {
    std::vector<detail::StepCache> steps(live.size());
    std::vector<Cand> cands;
    for (std::size_t b = 0; b < live.size(); ++b) {
      steps[b] = detail::decode_step(cfg, params, enc, live[b].s, live[b].last);
      std::vector<double> lp = detail::log_softmax(steps[b].logits);
      for (int v = 0; v < cfg.vocab_size; ++v)
        cands.push_back({live[b].score + lp[v], v, static_cast<int>(b)});
    }
    std::stable_sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
      if (a.score != b.score) return a.score > b.score;
      if (a.token != b.token) return a.token < b.token;
      return a.parent < b.parent;
    });
    // Only candidates inside the top beam_size survive; an EOS candidate
    // must make that cut to finish (beam_size=1 therefore equals greedy).
    std::vector<Beam> next;
    int taken = 0;
    for (const Cand& c : cands) {
      if (taken >= beam_size) break;
      ++taken;
      if (c.token == Vocab::kEos) {
        if (!has_best || c.score > best_score) {
          best_score = c.score;
          best_seq = live[c.parent].prefix;
          has_best = true;
        }
        continue;
      }
      Beam nb;
      nb.prefix = live[c.parent].prefix;
      nb.prefix.push_back(c.token);
      nb.score = c.score;
      nb.s = steps[c.parent].s;
      nb.last = c.token;
      next.push_back(std::move(nb));
    }
    live = std::move(next);
    if (has_best && (live.empty() || best_score >= live[0].score)) return best_seq;
  }
  if (has_best) return best_seq;
  return live.empty() ? IdSeq{} : live[0].prefix;
}

}  // namespace seqrisk