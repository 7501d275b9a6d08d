#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "oracles.hpp"
#include "seqrisk/objectives.hpp"

using namespace seqrisk;
using Catch::Matchers::WithinAbs;

namespace {

ModelConfig toy_config(std::uint64_t seed = 1) {
  ModelConfig cfg;
  cfg.vocab_size = 7;
  cfg.embed_dim = 3;
  cfg.hidden_dim = 4;
  cfg.max_len = 6;
  cfg.seed = seed;
  return cfg;
}

ParamSet warmed_params(const ModelConfig& cfg, double scale = 0.3) {
  ParamSet params = init_params(cfg);
  Rng rng(cfg.seed ^ 0x5eed, 0);
  for (double& v : params.get("out_w").data) v = scale * rng.normal();
  for (double& v : params.get("out_b").data) v = 0.1 * rng.normal();
  return params;
}

std::vector<IdPair> toy_batch() {
  return {{{4, 5}, {5, 4, 6}}, {{6, 6, 4}, {4}}};
}

SampleSet drawn_set(const ModelConfig& cfg, const ParamSet& params, const ObjectiveConfig& obj,
                    std::uint64_t seed = 77) {
  Rng rng(seed, 4);
  return draw_samples(cfg, params, toy_batch(), obj, rng);
}

}  // namespace

TEST_CASE("mle loss on the uniform initial model is exact") {
  ModelConfig cfg = toy_config(2);
  ParamSet params = init_params(cfg);
  std::vector<IdPair> batch = toy_batch();
  LossGrad lg = mle_loss_and_grad(cfg, params, batch);
  // Zero output projection: every step scores -ln(V), lengths 3+1 and 1+1.
  CHECK_THAT(lg.value, WithinAbs(6.0 * std::log(7.0), 1e-12));
  CHECK(lg.grad.all_finite());
  CHECK_THROWS_AS(mle_loss_and_grad(cfg, params, {}), std::invalid_argument);
}

TEST_CASE("mle gradient matches finite differences and is additive") {
  ModelConfig cfg = toy_config(3);
  ParamSet params = warmed_params(cfg);
  std::vector<IdPair> batch = toy_batch();

  LossGrad lg = mle_loss_and_grad(cfg, params, batch);
  ParamSet fd = oracle::finite_difference_grad(params, [&](const ParamSet& p) {
    return mle_loss_and_grad(cfg, p, batch).value;
  });
  CHECK(oracle::max_grad_mismatch(lg.grad, fd) < 1e-4);

  LossGrad a = mle_loss_and_grad(cfg, params, {batch[0]});
  LossGrad b = mle_loss_and_grad(cfg, params, {batch[1]});
  CHECK_THAT(a.value + b.value, WithinAbs(lg.value, 1e-12));
  ParamSet sum = accumulate_gradients({a.grad, b.grad});
  CHECK(sum.max_abs_diff(lg.grad) < 1e-12);
}

TEST_CASE("draw_samples produces a rectangular frozen sample set") {
  ModelConfig cfg = toy_config(4);
  ParamSet params = warmed_params(cfg);
  ObjectiveConfig obj;
  obj.n_samples = 5;
  SampleSet set = drawn_set(cfg, params, obj);
  REQUIRE(set.sentences.size() == 2);
  CHECK(set.n_samples() == 5);
  CHECK_NOTHROW(set.check_rectangular());
  for (const SampledSentence& sent : set.sentences) {
    for (const SampledCandidate& cand : sent.samples) {
      CHECK_THAT(cand.log_prob,
                 WithinAbs(log_prob(cfg, params, sent.source, cand.tokens), 1e-12));
    }
  }

  // Same seed reproduces the draw; the reference flag appends one candidate.
  SampleSet again = drawn_set(cfg, params, obj);
  for (std::size_t s = 0; s < set.sentences.size(); ++s)
    for (int i = 0; i < 5; ++i)
      CHECK(again.sentences[s].samples[i].tokens == set.sentences[s].samples[i].tokens);

  obj.include_reference = true;
  SampleSet with_ref = drawn_set(cfg, params, obj);
  CHECK(with_ref.n_samples() == 6);
  for (std::size_t s = 0; s < with_ref.sentences.size(); ++s) {
    const SampledCandidate& last = with_ref.sentences[s].samples.back();
    CHECK(last.tokens == with_ref.sentences[s].reference);
    CHECK_THAT(last.log_prob,
               WithinAbs(log_prob(cfg, params, with_ref.sentences[s].source, last.tokens),
                         1e-15));
  }

  SampleSet ragged = set;
  ragged.sentences[1].samples.pop_back();
  CHECK_THROWS_AS(ragged.check_rectangular(), std::invalid_argument);
}

TEST_CASE("sharpened distribution is a shift-invariant softmax") {
  std::vector<double> lps = {-3.0, -1.5, -7.0, -2.2};
  std::vector<double> q = detail::sharpened_distribution(lps, 0.6);
  double sum = 0.0;
  for (double v : q) {
    CHECK(v >= 0.0);
    sum += v;
  }
  CHECK_THAT(sum, WithinAbs(1.0, 1e-12));

  std::vector<double> shifted = lps;
  for (double& v : shifted) v += 11.25;
  std::vector<double> q2 = detail::sharpened_distribution(shifted, 0.6);
  for (std::size_t i = 0; i < q.size(); ++i) CHECK_THAT(q2[i], WithinAbs(q[i], 1e-12));

  // Large sharpness concentrates on the unique maximum.
  std::vector<double> qinf = detail::sharpened_distribution(lps, 1e3);
  CHECK_THAT(qinf[1], WithinAbs(1.0, 1e-6));
}

TEST_CASE("mrt risk with constant cost has an exactly zero gradient") {
  ModelConfig cfg = toy_config(5);
  ParamSet params = warmed_params(cfg);
  // All samples identical: every cost is equal by construction.
  SampleSet set;
  SampledSentence sent;
  sent.source = {4, 5};
  sent.reference = {5, 4};
  for (int i = 0; i < 4; ++i)
    sent.samples.push_back({{6, 6}, log_prob(cfg, params, sent.source, {6, 6})});
  set.sentences.push_back(sent);

  ObjectiveConfig obj;
  LossGrad lg = mrt_loss_and_grad(cfg, params, set, obj);
  CHECK_THAT(lg.value, WithinAbs(sbleu_cost(IdSeq{6, 6}, IdSeq{5, 4}), 1e-12));
  for (std::size_t i = 0; i < lg.grad.size(); ++i)
    for (double v : lg.grad.entry(i).second.data) REQUIRE(v == 0.0);
}

TEST_CASE("single-sample mrt is degenerate") {
  ModelConfig cfg = toy_config(6);
  ParamSet params = warmed_params(cfg);
  ObjectiveConfig obj;
  obj.n_samples = 1;
  SampleSet set = drawn_set(cfg, params, obj);
  LossGrad lg = mrt_loss_and_grad(cfg, params, set, obj);
  double want = 0.0;
  for (const SampledSentence& sent : set.sentences)
    want += sbleu_cost(sent.samples[0].tokens, sent.reference);
  CHECK_THAT(lg.value, WithinAbs(want, 1e-12));
  for (std::size_t i = 0; i < lg.grad.size(); ++i)
    for (double v : lg.grad.entry(i).second.data) REQUIRE(v == 0.0);
}

TEST_CASE("mrt risk stays within the per-sentence cost range") {
  ModelConfig cfg = toy_config(7);
  ParamSet params = warmed_params(cfg);
  ObjectiveConfig obj;
  obj.n_samples = 6;
  SampleSet set = drawn_set(cfg, params, obj);
  LossGrad lg = mrt_loss_and_grad(cfg, params, set, obj);
  CHECK(lg.value >= 0.0);
  CHECK(lg.value <= static_cast<double>(set.sentences.size()));
  CHECK(lg.grad.all_finite());
}

TEST_CASE("mrt gradient matches finite differences on frozen samples") {
  ModelConfig cfg = toy_config(8);
  ParamSet params = warmed_params(cfg);
  ObjectiveConfig obj;
  obj.n_samples = 3;
  SampleSet set = drawn_set(cfg, params, obj, 91);
  for (bool tempered : {false, true}) {
    obj.q_tempered = tempered;
    LossGrad lg = mrt_loss_and_grad(cfg, params, set, obj);
    ParamSet fd = oracle::finite_difference_grad(params, [&](const ParamSet& p) {
      return mrt_loss_and_grad(cfg, p, set, obj).value;
    });
    CHECK(oracle::max_grad_mismatch(lg.grad, fd) < 1e-4);
  }
}

TEST_CASE("tempered q uses alpha over tau as sharpness") {
  ModelConfig cfg = toy_config(9);
  ParamSet params = warmed_params(cfg);
  ObjectiveConfig obj;
  obj.n_samples = 4;
  obj.q_tempered = true;
  SampleSet set = drawn_set(cfg, params, obj, 55);
  LossGrad lg = mrt_loss_and_grad(cfg, params, set, obj);

  double manual = 0.0;
  for (const SampledSentence& sent : set.sentences) {
    std::vector<double> lps, costs;
    for (const SampledCandidate& cand : sent.samples) {
      lps.push_back(log_prob(cfg, params, sent.source, cand.tokens));
      costs.push_back(sbleu_cost(cand.tokens, sent.reference));
    }
    std::vector<double> q = detail::sharpened_distribution(lps, obj.alpha / obj.tau);
    for (std::size_t i = 0; i < q.size(); ++i) manual += q[i] * costs[i];
  }
  CHECK_THAT(lg.value, WithinAbs(manual, 1e-12));
}

TEST_CASE("non-finite parameters abort the risk computation") {
  ModelConfig cfg = toy_config(10);
  ParamSet params = warmed_params(cfg);
  ObjectiveConfig obj;
  obj.n_samples = 2;
  SampleSet set = drawn_set(cfg, params, obj);
  params.get("enc_w").data[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(mrt_loss_and_grad(cfg, params, set, obj), std::runtime_error);
  CHECK_THROWS_AS(doc_mrt_loss_and_grad(cfg, params, set, obj), std::runtime_error);
}

TEST_CASE("documents are rank-aligned cost-sorted partitions") {
  ModelConfig cfg = toy_config(11);
  ParamSet params = warmed_params(cfg);
  ObjectiveConfig obj;
  obj.n_samples = 3;
  SampleSet set = drawn_set(cfg, params, obj, 17);
  REQUIRE(set.sentences.size() == 2);
  DocumentBatch docs = build_documents(set);
  REQUIRE(docs.ranks.size() == 3);
  for (const auto& doc : docs.ranks) REQUIRE(doc.size() == 2);

  for (std::size_t s = 0; s < set.sentences.size(); ++s) {
    std::vector<bool> seen(3, false);
    double prev = -1.0;
    for (int r = 0; r < 3; ++r) {
      int idx = docs.ranks[r][s];
      REQUIRE(idx >= 0);
      REQUIRE(idx < 3);
      REQUIRE_FALSE(seen[idx]);
      seen[idx] = true;
      double cost = sbleu_cost(set.sentences[s].samples[idx].tokens, set.sentences[s].reference);
      CHECK(cost >= prev);
      prev = cost;
    }
  }
}

TEST_CASE("document sorting breaks cost ties by log-prob then index") {
  SampleSet set;
  SampledSentence sent;
  sent.source = {4};
  sent.reference = {5};
  // Identical tokens give identical costs; log-probs differ.
  sent.samples.push_back({{6}, -3.0});
  sent.samples.push_back({{6}, -1.0});
  sent.samples.push_back({{6}, -3.0});
  set.sentences.push_back(sent);
  DocumentBatch docs = build_documents(set);
  CHECK(docs.ranks[0][0] == 1);  // highest log-prob first
  CHECK(docs.ranks[1][0] == 0);  // then earlier index
  CHECK(docs.ranks[2][0] == 2);
}

TEST_CASE("single-sentence doc-mrt equals mrt under the per-segment cost") {
  ModelConfig cfg = toy_config(12);
  ParamSet params = warmed_params(cfg);
  ObjectiveConfig obj;
  obj.n_samples = 4;
  obj.cost = CostKind::SentenceBleu;
  Rng rng(31, 4);
  SampleSet set = draw_samples(cfg, params, {{{4, 5, 6}, {6, 5}}}, obj, rng);

  LossGrad mrt = mrt_loss_and_grad(cfg, params, set, obj);
  LossGrad doc = doc_mrt_loss_and_grad(cfg, params, set, obj);
  CHECK_THAT(doc.value, WithinAbs(mrt.value, 1e-12));
  CHECK(doc.grad.max_abs_diff(mrt.grad) < 1e-12);
}

TEST_CASE("doc-mrt with identical documents has zero gradient") {
  ModelConfig cfg = toy_config(13);
  ParamSet params = warmed_params(cfg);
  SampleSet set;
  for (int s = 0; s < 2; ++s) {
    SampledSentence sent;
    sent.source = {4, 5};
    sent.reference = {5, 6};
    for (int i = 0; i < 3; ++i)
      sent.samples.push_back({{6, 4}, log_prob(cfg, params, sent.source, {6, 4})});
    set.sentences.push_back(sent);
  }
  ObjectiveConfig obj;
  LossGrad lg = doc_mrt_loss_and_grad(cfg, params, set, obj);
  std::vector<IdSeq> doc = {{6, 4}, {6, 4}};
  std::vector<IdSeq> refs = {{5, 6}, {5, 6}};
  CHECK_THAT(lg.value, WithinAbs(document_cost(doc, refs), 1e-12));
  for (std::size_t i = 0; i < lg.grad.size(); ++i)
    for (double v : lg.grad.entry(i).second.data) REQUIRE(v == 0.0);
}

TEST_CASE("doc-mrt risk is a cost convex combination") {
  ModelConfig cfg = toy_config(14);
  ParamSet params = warmed_params(cfg);
  ObjectiveConfig obj;
  obj.n_samples = 5;
  SampleSet set = drawn_set(cfg, params, obj, 23);
  LossGrad lg = doc_mrt_loss_and_grad(cfg, params, set, obj);
  CHECK(lg.value >= 0.0);
  CHECK(lg.value <= 1.0);
}

TEST_CASE("doc-mrt gradient matches finite differences on frozen samples") {
  ModelConfig cfg = toy_config(15);
  ParamSet params = warmed_params(cfg);
  ObjectiveConfig obj;
  obj.n_samples = 3;
  SampleSet set = drawn_set(cfg, params, obj, 41);
  for (CostKind kind : {CostKind::DocumentBleu, CostKind::SentenceBleu}) {
    obj.cost = kind;
    LossGrad lg = doc_mrt_loss_and_grad(cfg, params, set, obj);
    ParamSet fd = oracle::finite_difference_grad(params, [&](const ParamSet& p) {
      return doc_mrt_loss_and_grad(cfg, p, set, obj).value;
    });
    CHECK(oracle::max_grad_mismatch(lg.grad, fd) < 1e-4);
  }
}

TEST_CASE("doc-mrt is invariant to sentence order") {
  ModelConfig cfg = toy_config(16);
  ParamSet params = warmed_params(cfg);
  ObjectiveConfig obj;
  obj.n_samples = 4;
  Rng rng(67, 4);
  std::vector<IdPair> batch = {{{4, 5}, {5, 4}}, {{6, 4, 5}, {4, 6}}, {{5}, {6}}};
  SampleSet set = draw_samples(cfg, params, batch, obj, rng);

  SampleSet reversed;
  for (auto it = set.sentences.rbegin(); it != set.sentences.rend(); ++it)
    reversed.sentences.push_back(*it);

  LossGrad a = doc_mrt_loss_and_grad(cfg, params, set, obj);
  LossGrad b = doc_mrt_loss_and_grad(cfg, params, reversed, obj);
  CHECK_THAT(b.value, WithinAbs(a.value, 1e-9));
  CHECK(a.grad.max_abs_diff(b.grad) < 1e-9);
}

TEST_CASE("accumulate_gradients sums elementwise") {
  ModelConfig cfg = toy_config(18);
  ParamSet params = warmed_params(cfg);
  ParamSet g1 = grad_log_prob(cfg, params, {4}, {5});
  ParamSet g2 = grad_log_prob(cfg, params, {5, 6}, {4});
  ParamSet zero = g1.zeros_like();

  ParamSet identity = accumulate_gradients({g1});
  CHECK(identity.max_abs_diff(g1) == 0.0);
  ParamSet with_zero = accumulate_gradients({zero, g1});
  CHECK(with_zero.max_abs_diff(g1) == 0.0);

  ParamSet sum = accumulate_gradients({g1, g2});
  ParamSet manual = g1;
  manual.axpy(1.0, g2);
  CHECK(sum.max_abs_diff(manual) < 1e-15);
  CHECK_THROWS_AS(accumulate_gradients({}), std::invalid_argument);
}
