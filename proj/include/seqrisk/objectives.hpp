// Training objectives: maximum likelihood, minimum-risk over per-sentence
// samples, and document-level minimum-risk over rank-sorted sample groups.
//
// Risk is differentiated with the sample set (and document assignment) held
// fixed: gradients flow through the sharpened distribution Q and the sample
// log-probs, never through the BLEU costs.
#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "bleu.hpp"
#include "model.hpp"
#include "rng.hpp"
#include "tensor.hpp"

namespace seqrisk {

enum class CostKind { SentenceBleu, DocumentBleu };

struct ObjectiveConfig {
  double alpha = 0.6;
  double tau = 0.3;
  int n_samples = 8;
  CostKind cost = CostKind::DocumentBleu;  // document cost; MRT always scores per sentence
  bool include_reference = false;          // add the reference to the candidate set
  bool q_tempered = false;                 // compute Q over tau-tempered probabilities
};

struct IdPair {
  IdSeq source;
  IdSeq target;
};

struct SampledCandidate {
  IdSeq tokens;
  double log_prob = 0.0;  // untempered, frozen at sampling time
};

struct SampledSentence {
  IdSeq source;
  IdSeq reference;
  std::vector<SampledCandidate> samples;
};

struct SampleSet {
  std::vector<SampledSentence> sentences;

  int n_samples() const {
    return sentences.empty() ? 0 : static_cast<int>(sentences.front().samples.size());
  }
  void check_rectangular() const {
    for (const SampledSentence& s : sentences)
      if (static_cast<int>(s.samples.size()) != n_samples())
        throw std::invalid_argument("SampleSet: sentences carry different sample counts");
  }
};

inline SampleSet draw_samples(const ModelConfig& cfg, const ParamSet& params,
                              const std::vector<IdPair>& batch, const ObjectiveConfig& obj,
                              Rng& rng) {
  if (obj.n_samples < 1) throw std::invalid_argument("draw_samples: n_samples must be >= 1");
  SampleSet out;
  for (const IdPair& pair : batch) {
    SampledSentence sent;
    sent.source = pair.source;
    sent.reference = pair.target;
    for (int n = 0; n < obj.n_samples; ++n) {
      SampleResult r = sample(cfg, params, pair.source, obj.tau, rng);
      sent.samples.push_back({std::move(r.tokens), r.log_prob});
    }
    if (obj.include_reference)
      sent.samples.push_back({pair.target, log_prob(cfg, params, pair.source, pair.target)});
    out.sentences.push_back(std::move(sent));
  }
  return out;
}

struct LossGrad {
  double value = 0.0;
  ParamSet grad;
};

inline LossGrad mle_loss_and_grad(const ModelConfig& cfg, const ParamSet& params,
                                  const std::vector<IdPair>& batch) {
  if (batch.empty()) throw std::invalid_argument("mle: empty batch");
  LossGrad out;
  out.grad = zero_grads(cfg);
  for (const IdPair& pair : batch)
    out.value -= accumulate_grad_log_prob(cfg, params, pair.source, pair.target, -1.0, out.grad);
  return out;
}

namespace detail {

// Q_n = exp(sharp * lp_n) / Z with a shared max subtraction; returned as the
// normalized weights.
inline std::vector<double> sharpened_distribution(const std::vector<double>& lps, double sharp) {
  double m = *std::max_element(lps.begin(), lps.end());
  std::vector<double> q(lps.size());
  double z = 0.0;
  for (std::size_t i = 0; i < lps.size(); ++i) {
    q[i] = std::exp(sharp * (lps[i] - m));
    z += q[i];
  }
  for (double& v : q) v /= z;
  return q;
}

}  // namespace detail

// Expected per-sentence cost under Q, summed over the minibatch; the gradient
// weight of sample n is sharp * Q_n * (cost_n - risk_s).
inline LossGrad mrt_loss_and_grad(const ModelConfig& cfg, const ParamSet& params,
                                  const SampleSet& samples, const ObjectiveConfig& obj) {
  if (samples.sentences.empty()) throw std::invalid_argument("mrt: empty sample set");
  samples.check_rectangular();
  double sharp = obj.q_tempered ? obj.alpha / obj.tau : obj.alpha;
  LossGrad out;
  out.grad = zero_grads(cfg);
  for (const SampledSentence& sent : samples.sentences) {
    int n = static_cast<int>(sent.samples.size());
    std::vector<seqrisk::detail::ForwardCache> caches;
    std::vector<double> lps(n), costs(n);
    for (int i = 0; i < n; ++i) {
      caches.push_back(seqrisk::detail::forward_teacher(cfg, params, sent.source,
                                                        sent.samples[i].tokens));
      lps[i] = caches.back().log_prob;
      if (!std::isfinite(lps[i])) throw std::runtime_error("mrt: non-finite log-prob");
      costs[i] = sbleu_cost(sent.samples[i].tokens, sent.reference);
    }
    std::vector<double> q = detail::sharpened_distribution(lps, sharp);
    double risk = 0.0;
    for (int i = 0; i < n; ++i) risk += q[i] * costs[i];
    out.value += risk;
    for (int i = 0; i < n; ++i) {
      double w = sharp * q[i] * (costs[i] - risk);
      if (w != 0.0)
        seqrisk::detail::backward_teacher(cfg, params, sent.source, caches[i], w, out.grad);
    }
  }
  return out;
}

// Rank-aligned documents: each sentence's samples are sorted by cost
// ascending (ties: higher frozen log-prob, then sample index), and document n
// collects every sentence's rank-n sample.
struct DocumentBatch {
  std::vector<IdSeq> references;
  std::vector<std::vector<int>> ranks;  // ranks[n][s] = sample index of sentence s
};

inline DocumentBatch build_documents(const SampleSet& samples) {
  samples.check_rectangular();
  DocumentBatch out;
  int n = samples.n_samples();
  int s_count = static_cast<int>(samples.sentences.size());
  out.ranks.assign(n, std::vector<int>(s_count, 0));
  for (int s = 0; s < s_count; ++s) {
    const SampledSentence& sent = samples.sentences[s];
    out.references.push_back(sent.reference);
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> costs(n);
    for (int i = 0; i < n; ++i) costs[i] = sbleu_cost(sent.samples[i].tokens, sent.reference);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      if (costs[a] != costs[b]) return costs[a] < costs[b];
      if (sent.samples[a].log_prob != sent.samples[b].log_prob)
        return sent.samples[a].log_prob > sent.samples[b].log_prob;
      return a < b;
    });
    for (int r = 0; r < n; ++r) out.ranks[r][s] = order[r];
  }
  return out;
}

inline std::vector<IdSeq> document_tokens(const SampleSet& samples, const DocumentBatch& docs,
                                          int rank) {
  std::vector<IdSeq> out;
  for (std::size_t s = 0; s < samples.sentences.size(); ++s)
    out.push_back(samples.sentences[s].samples[docs.ranks[rank][s]].tokens);
  return out;
}

// Q over documents via summed member log-probs; every member sample of
// document n inherits the weight sharp * Q_n * (D_n - risk).
inline LossGrad doc_mrt_loss_and_grad(const ModelConfig& cfg, const ParamSet& params,
                                      const SampleSet& samples, const ObjectiveConfig& obj) {
  if (samples.sentences.empty()) throw std::invalid_argument("doc_mrt: empty sample set");
  samples.check_rectangular();
  double sharp = obj.q_tempered ? obj.alpha / obj.tau : obj.alpha;
  DocumentBatch docs = build_documents(samples);
  int n = samples.n_samples();
  int s_count = static_cast<int>(samples.sentences.size());

  std::vector<std::vector<seqrisk::detail::ForwardCache>> caches(s_count);
  for (int s = 0; s < s_count; ++s) {
    const SampledSentence& sent = samples.sentences[s];
    for (int i = 0; i < n; ++i) {
      caches[s].push_back(seqrisk::detail::forward_teacher(cfg, params, sent.source,
                                                           sent.samples[i].tokens));
      if (!std::isfinite(caches[s].back().log_prob))
        throw std::runtime_error("doc_mrt: non-finite log-prob");
    }
  }

  std::vector<double> doc_lps(n, 0.0), doc_costs(n, 0.0);
  for (int r = 0; r < n; ++r) {
    for (int s = 0; s < s_count; ++s) doc_lps[r] += caches[s][docs.ranks[r][s]].log_prob;
    if (obj.cost == CostKind::DocumentBleu) {
      doc_costs[r] = document_cost(document_tokens(samples, docs, r), docs.references);
    } else {
      double acc = 0.0;
      for (int s = 0; s < s_count; ++s)
        acc += sbleu_cost(samples.sentences[s].samples[docs.ranks[r][s]].tokens,
                          docs.references[s]);
      doc_costs[r] = acc / static_cast<double>(s_count);
    }
  }

  std::vector<double> q = detail::sharpened_distribution(doc_lps, sharp);
  LossGrad out;
  out.grad = zero_grads(cfg);
  for (int r = 0; r < n; ++r) out.value += q[r] * doc_costs[r];
  for (int r = 0; r < n; ++r) {
    double w = sharp * q[r] * (doc_costs[r] - out.value);
    if (w == 0.0) continue;
    for (int s = 0; s < s_count; ++s)
      seqrisk::detail::backward_teacher(cfg, params, samples.sentences[s].source,
                                        caches[s][docs.ranks[r][s]], w, out.grad);
  }
  return out;
}

inline ParamSet accumulate_gradients(const std::vector<ParamSet>& grads) {
  if (grads.empty()) throw std::invalid_argument("accumulate_gradients: empty list");
  ParamSet out = grads.front().zeros_like();
  for (const ParamSet& g : grads) out.axpy(1.0, g);
  return out;
}

}  // namespace seqrisk