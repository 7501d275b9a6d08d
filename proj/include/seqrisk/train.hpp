// Optimizer and training loop: token-budget micro-batches, gradient
// accumulation, periodic beam-4 validation with early stopping, and final
// checkpoint averaging.
#pragma once

#include <cmath>
#include <cstdio>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "bleu.hpp"
#include "checkpoint.hpp"
#include "corpus.hpp"
#include "model.hpp"
#include "objectives.hpp"
#include "rng.hpp"
#include "tensor.hpp"
#include "vocab.hpp"

namespace seqrisk {

struct AdamState {
  ParamSet m, v;
  long t = 0;
};

inline AdamState make_adam_state(const ParamSet& params) {
  return {params.zeros_like(), params.zeros_like(), 0};
}

inline void adam_step(ParamSet& params, AdamState& state, const ParamSet& grad, double lr,
                      double beta1 = 0.9, double beta2 = 0.98, double eps = 1e-9) {
  if (!grad.all_finite()) throw std::runtime_error("adam_step: non-finite gradient");
  if (!params.same_shapes(grad)) throw std::invalid_argument("adam_step: shape mismatch");
  ++state.t;
  double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params.entry(i).second.data;
    auto& m = state.m.entry(i).second.data;
    auto& v = state.v.entry(i).second.data;
    const auto& g = grad.entry(i).second.data;
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = beta1 * m[k] + (1.0 - beta1) * g[k];
      v[k] = beta2 * v[k] + (1.0 - beta2) * g[k] * g[k];
      double mhat = m[k] / bc1;
      double vhat = v[k] / bc2;
      p[k] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

struct TrainConfig {
  std::string objective = "mle";  // mle | mrt | doc_mrt
  ObjectiveConfig obj;
  double learning_rate = 5e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.98;
  double adam_eps = 1e-9;
  int micro_batch_tokens = 256;
  int accumulation_factor = 4;
  int checkpoint_every = 200;
  int patience = 3;
  long max_updates = 1000;
  std::uint64_t seed = 1;
};

inline TrainConfig parse_train_config(const std::map<std::string, std::string>& kv) {
  TrainConfig cfg;
  auto to_double = [](const std::string& k, const std::string& v) {
    std::size_t used = 0;
    double d = std::stod(v, &used);
    if (used != v.size()) throw std::runtime_error("bad numeric value for " + k + ": " + v);
    return d;
  };
  auto to_long = [&to_double](const std::string& k, const std::string& v) {
    double d = to_double(k, v);
    long l = static_cast<long>(d);
    if (static_cast<double>(l) != d) throw std::runtime_error("expected integer for " + k);
    return l;
  };
  auto to_bool = [](const std::string& k, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw std::runtime_error("expected boolean for " + k + ": " + v);
  };
  for (const auto& [k, v] : kv) {
    if (k == "objective") {
      if (v != "mle" && v != "mrt" && v != "doc_mrt")
        throw std::runtime_error("unknown objective: " + v);
      cfg.objective = v;
    } else if (k == "alpha") {
      cfg.obj.alpha = to_double(k, v);
    } else if (k == "tau") {
      cfg.obj.tau = to_double(k, v);
    } else if (k == "n_samples") {
      cfg.obj.n_samples = static_cast<int>(to_long(k, v));
    } else if (k == "cost") {
      if (v == "sbleu")
        cfg.obj.cost = CostKind::SentenceBleu;
      else if (v == "document")
        cfg.obj.cost = CostKind::DocumentBleu;
      else
        throw std::runtime_error("unknown cost kind: " + v);
    } else if (k == "include_reference") {
      cfg.obj.include_reference = to_bool(k, v);
    } else if (k == "q_tempered") {
      cfg.obj.q_tempered = to_bool(k, v);
    } else if (k == "learning_rate") {
      cfg.learning_rate = to_double(k, v);
    } else if (k == "adam_beta1") {
      cfg.adam_beta1 = to_double(k, v);
    } else if (k == "adam_beta2") {
      cfg.adam_beta2 = to_double(k, v);
    } else if (k == "adam_eps") {
      cfg.adam_eps = to_double(k, v);
    } else if (k == "micro_batch_tokens") {
      cfg.micro_batch_tokens = static_cast<int>(to_long(k, v));
    } else if (k == "accumulation_factor") {
      cfg.accumulation_factor = static_cast<int>(to_long(k, v));
    } else if (k == "checkpoint_every") {
      cfg.checkpoint_every = static_cast<int>(to_long(k, v));
    } else if (k == "patience") {
      cfg.patience = static_cast<int>(to_long(k, v));
    } else if (k == "max_updates") {
      cfg.max_updates = to_long(k, v);
    } else if (k == "seed") {
      cfg.seed = static_cast<std::uint64_t>(to_long(k, v));
    } else {
      throw std::runtime_error("unknown config key: " + k);
    }
  }
  if (cfg.learning_rate <= 0 || cfg.micro_batch_tokens < 1 || cfg.accumulation_factor < 1 ||
      cfg.checkpoint_every < 1 || cfg.patience < 1 || cfg.max_updates < 0)
    throw std::runtime_error("config values out of range");
  return cfg;
}

inline TrainConfig load_train_config(const std::string& path) {
  return parse_train_config(read_kv_file(path));
}

struct TrainResult {
  Checkpoint final;
  std::vector<Checkpoint> recorded;
  std::string log;
  bool diverged = false;
};

namespace detail {

inline std::string format_float(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt, v);
  return buf;
}

inline std::vector<IdPair> encode_pairs(const Vocab& vocab, const Corpus& corpus,
                                        const ModelConfig& cfg, const char* what) {
  std::vector<IdPair> out;
  for (const ParallelPair& p : corpus.pairs) {
    IdPair pair{vocab.encode(p.source), vocab.encode(p.target)};
    if (static_cast<int>(pair.source.size()) > cfg.max_len ||
        static_cast<int>(pair.target.size()) + 1 > cfg.max_len)
      throw std::runtime_error(std::string(what) + ": pair " + std::to_string(p.id) +
                               " exceeds max_len");
    out.push_back(std::move(pair));
  }
  return out;
}

}  // namespace detail

// Beam-4 decode of the validation set scored with corpus BLEU on surface
// tokens, exactly as the translate + evaluate commands would recompute it.
inline double validation_bleu_score(const ModelConfig& cfg, const ParamSet& params,
                                    const Vocab& vocab, const Corpus& valid) {
  std::vector<TokenSeq> hyps, refs;
  for (const ParallelPair& p : valid.pairs) {
    IdSeq src = vocab.encode(p.source);
    if (static_cast<int>(src.size()) > cfg.max_len) src.resize(cfg.max_len);
    hyps.push_back(vocab.decode(beam_search(cfg, params, src, 4)));
    refs.push_back(p.target);
  }
  return 100.0 * corpus_bleu(hyps, refs).score;
}

// One training run.  Micro-batches are cut from a seeded shuffle by token
// budget; accumulation_factor micro-batch gradients sum into one Adam update
// (sum reduction makes this equal to the concatenated batch).  Validation
// checkpoints are recorded every checkpoint_every updates and once more at
// termination if the last window is partial; the returned model averages the
// final three recorded checkpoints.
inline TrainResult train(const TrainConfig& tc, const ModelConfig& mc, const ParamSet& start,
                         const Vocab& vocab, const Corpus& train_corpus, const Corpus& valid_corpus,
                         const std::string& init_id = "fresh") {
  if (train_corpus.pairs.empty() || valid_corpus.pairs.empty())
    throw std::invalid_argument("train: empty corpus");
  if (vocab.size() != mc.vocab_size)
    throw std::invalid_argument("train: vocab size does not match model config");

  std::vector<IdPair> data = detail::encode_pairs(vocab, train_corpus, mc, "train corpus");

  TrainResult res;
  res.log = "init=" + init_id + " objective=" + tc.objective +
            " seed=" + std::to_string(tc.seed) + "\n";

  ParamSet params = start;
  AdamState adam = make_adam_state(params);
  Rng shuffle_rng(tc.seed, /*stream=*/3);
  Rng sample_rng(tc.seed, /*stream=*/4);

  long updates = 0;
  double best_val = -1.0;
  int streak = 0;
  double loss_sum = 0.0;
  long loss_batches = 0;
  bool stop = false;

  auto record_checkpoint = [&]() {
    double val = validation_bleu_score(mc, params, vocab, valid_corpus);
    if (val > best_val) {
      best_val = val;
      streak = 0;
    } else {
      ++streak;
    }
    Checkpoint ck;
    ck.config = mc;
    ck.vocab = vocab;
    ck.params = params;
    ck.step = static_cast<std::uint64_t>(updates);
    ck.validation_bleu = val;
    res.recorded.push_back(std::move(ck));
    double mean_loss = loss_batches ? loss_sum / static_cast<double>(loss_batches) : 0.0;
    res.log += "step=" + std::to_string(updates) + " objective=" + tc.objective +
               " loss=" + detail::format_float("%.6f", mean_loss) +
               " val_bleu=" + detail::format_float("%.4f", val) +
               " streak=" + std::to_string(streak) + "\n";
    loss_sum = 0.0;
    loss_batches = 0;
  };

  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  ParamSet grad_sum = params.zeros_like();
  int micro_in_window = 0;

  while (!stop && updates < tc.max_updates) {
    shuffle_rng.shuffle(order);
    std::size_t pos = 0;
    while (pos < order.size() && !stop) {
      std::vector<IdPair> micro;
      long tokens = 0;
      while (pos < order.size()) {
        const IdPair& p = data[order[pos]];
        long cost = static_cast<long>(p.source.size() + p.target.size());
        if (!micro.empty() && tokens + cost > tc.micro_batch_tokens) break;
        micro.push_back(p);
        tokens += cost;
        ++pos;
      }

      LossGrad lg;
      if (tc.objective == "mle") {
        lg = mle_loss_and_grad(mc, params, micro);
      } else {
        SampleSet samples = draw_samples(mc, params, micro, tc.obj, sample_rng);
        lg = tc.objective == "mrt" ? mrt_loss_and_grad(mc, params, samples, tc.obj)
                                   : doc_mrt_loss_and_grad(mc, params, samples, tc.obj);
      }
      if (!std::isfinite(lg.value) || !lg.grad.all_finite()) {
        res.diverged = true;
        res.log += "diverged at update " + std::to_string(updates) + "\n";
        stop = true;
        break;
      }
      loss_sum += lg.value;
      ++loss_batches;
      grad_sum.axpy(1.0, lg.grad);
      ++micro_in_window;

      if (micro_in_window == tc.accumulation_factor) {
        adam_step(params, adam, grad_sum, tc.learning_rate, tc.adam_beta1, tc.adam_beta2,
                  tc.adam_eps);
        grad_sum = params.zeros_like();
        micro_in_window = 0;
        ++updates;
        if (updates % tc.checkpoint_every == 0) {
          record_checkpoint();
          if (streak >= tc.patience) stop = true;
        }
        if (updates >= tc.max_updates) stop = true;
      }
    }
  }

  if (res.diverged) {
    res.final = res.recorded.empty()
                    ? Checkpoint{mc, vocab, start, 0, std::nullopt}
                    : res.recorded.back();
    return res;
  }

  if (updates > 0 && (res.recorded.empty() ||
                      res.recorded.back().step != static_cast<std::uint64_t>(updates)))
    record_checkpoint();

  if (res.recorded.empty()) {
    res.final = Checkpoint{mc, vocab, params, static_cast<std::uint64_t>(updates), std::nullopt};
    return res;
  }
  std::size_t k = std::min<std::size_t>(3, res.recorded.size());
  std::vector<Checkpoint> tail(res.recorded.end() - static_cast<long>(k), res.recorded.end());
  res.final = average_checkpoints(tail);
  return res;
}

inline TrainResult finetune(const Checkpoint& base, const TrainConfig& tc,
                            const Corpus& train_corpus, const Corpus& valid_corpus,
                            const std::string& init_id) {
  return train(tc, base.config, base.params, base.vocab, train_corpus, valid_corpus, init_id);
}

}  // namespace seqrisk