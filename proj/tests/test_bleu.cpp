#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "oracles.hpp"
#include "seqrisk/bleu.hpp"
#include "seqrisk/rng.hpp"

using namespace seqrisk;
using Catch::Matchers::WithinAbs;

namespace {

std::vector<IdSeq> random_id_corpus(Rng& rng, std::size_t segments, int vocab,
                                    std::size_t max_len, bool allow_empty) {
  std::vector<IdSeq> out;
  for (std::size_t s = 0; s < segments; ++s) {
    std::size_t len = rng.below(max_len + 1);
    if (!allow_empty && len == 0) len = 1;
    IdSeq seq;
    for (std::size_t i = 0; i < len; ++i) seq.push_back(static_cast<int>(rng.below(vocab)));
    out.push_back(seq);
  }
  return out;
}

}  // namespace

TEST_CASE("corpus_bleu trivial cases") {
  std::vector<TokenSeq> hyps = {{"a", "b"}, {"c"}};
  BleuScore perfect = corpus_bleu(hyps, hyps);
  CHECK_THAT(perfect.score, WithinAbs(1.0, 1e-15));
  CHECK_THAT(perfect.brevity_penalty, WithinAbs(1.0, 1e-15));

  BleuScore none = corpus_bleu(std::vector<TokenSeq>{{"a", "b"}}, std::vector<TokenSeq>{{"c", "d"}});
  CHECK(none.score == 0.0);

  CHECK_THROWS_AS(corpus_bleu(std::vector<TokenSeq>{}, std::vector<TokenSeq>{}),
                  std::invalid_argument);
  CHECK_THROWS_AS(corpus_bleu({{"a"}}, {{"a"}, {"b"}}), std::invalid_argument);
}

TEST_CASE("corpus_bleu clipping follows the counting oracle") {
  std::vector<TokenSeq> hyps = {{"the", "the", "the", "the"}};
  std::vector<TokenSeq> refs = {{"the", "cat", "sat"}};
  BleuScore got = corpus_bleu(hyps, refs);
  // Ref contains "the" once, so the clipped unigram count is 1, not 2.
  CHECK_THAT(got.p[0], WithinAbs(0.25, 1e-15));
  CHECK(got.p[1] == 0.0);
  CHECK(got.score == 0.0);
  oracle::BleuParts want = oracle::corpus_bleu_tokens(hyps, refs);
  CHECK_THAT(got.p[0], WithinAbs(want.p[0], 1e-15));
  CHECK(want.score == 0.0);
}

TEST_CASE("empty hypotheses zero the corpus score") {
  BleuScore got = corpus_bleu(std::vector<TokenSeq>{{}, {}}, {{"a"}, {"b"}});
  CHECK(got.score == 0.0);
  CHECK(got.brevity_penalty == 0.0);
  CHECK(got.hyp_len == 0);
  CHECK(got.ref_len == 2);
}

TEST_CASE("corpus_bleu folds ASCII case on string tokens") {
  BleuScore got = corpus_bleu(std::vector<TokenSeq>{{"The", "CAT"}}, std::vector<TokenSeq>{{"the", "cat"}});
  CHECK_THAT(got.score, WithinAbs(1.0, 1e-15));
}

TEST_CASE("sentence_bleu_smoothed matches the frozen hand computation") {
  BleuScore got = sentence_bleu_smoothed({"a", "b", "c"}, {"a", "b", "d"});
  CHECK_THAT(got.p[0], WithinAbs(2.0 / 3.0, 1e-15));
  CHECK_THAT(got.p[1], WithinAbs(0.5, 1e-15));
  CHECK_THAT(got.p[2], WithinAbs(0.5, 1e-15));   // smoothed: 2^-1
  CHECK_THAT(got.p[3], WithinAbs(0.25, 1e-15));  // smoothed: 2^-2
  CHECK_THAT(got.brevity_penalty, WithinAbs(1.0, 1e-15));
  CHECK_THAT(got.score, WithinAbs(0.4518010018049224, 1e-15));
  CHECK_THAT(got.score,
             WithinAbs(oracle::sentence_bleu_tokens({"a", "b", "c"}, {"a", "b", "d"}), 1e-15));
}

TEST_CASE("sentence_bleu_smoothed trivia and errors") {
  CHECK_THAT(sentence_bleu_smoothed({"a", "b", "c", "d"}, {"a", "b", "c", "d"}).score,
             WithinAbs(1.0, 1e-15));
  CHECK(sentence_bleu_smoothed({}, {"a"}).score == 0.0);
  CHECK_THROWS_AS(sentence_bleu_smoothed({"a"}, {}), std::invalid_argument);
}

TEST_CASE("sbleu_cost and document_cost are one minus the scores") {
  TokenSeq h = {"a", "b", "c"};
  TokenSeq r = {"a", "b", "d"};
  TokenSeq four = {"a", "b", "c", "d"};
  CHECK_THAT(sbleu_cost(four, four), WithinAbs(0.0, 1e-15));
  // Smoothing keeps disjoint pairs above zero score: every order smooths to
  // 2^-invcnt, so the cost is 1 - 2^-2.5 here, not 1.
  CHECK_THAT(sbleu_cost(h, TokenSeq{"x", "y"}),
             WithinAbs(1.0 - std::pow(2.0, -2.5), 1e-15));
  CHECK_THAT(sbleu_cost(h, TokenSeq{"x", "y"}),
             WithinAbs(1.0 - oracle::sentence_bleu_tokens(h, {"x", "y"}), 1e-15));
  CHECK_THAT(sbleu_cost(h, r), WithinAbs(1.0 - 0.4518010018049224, 1e-15));

  std::vector<TokenSeq> doc = {h, r, {"q"}};
  CHECK_THAT(document_cost(doc, doc), WithinAbs(0.0, 1e-15));
  CHECK_THAT(document_cost(doc, std::vector<TokenSeq>{{"z"}, {"z"}, {"z"}}),
             WithinAbs(1.0, 1e-15));
  std::vector<TokenSeq> refs = {{"a", "b", "d"}, {"a", "b", "d"}, {"q", "r"}};
  CHECK_THAT(document_cost(doc, refs),
             WithinAbs(1.0 - oracle::corpus_bleu_tokens(doc, refs).score, 1e-15));
}

TEST_CASE("scores are invariant under alphabet relabeling") {
  Rng rng(3, 0);
  for (int trial = 0; trial < 200; ++trial) {
    auto hyps = random_id_corpus(rng, 1 + rng.below(3), 5, 7, true);
    auto refs = random_id_corpus(rng, hyps.size(), 5, 7, false);
    std::vector<int> perm = {0, 1, 2, 3, 4};
    rng.shuffle(perm);
    auto relabel = [&perm](const std::vector<IdSeq>& in) {
      std::vector<IdSeq> out = in;
      for (auto& seq : out)
        for (int& t : seq) t = perm[t];
      return out;
    };
    BleuScore base = corpus_bleu(hyps, refs);
    BleuScore mapped = corpus_bleu(relabel(hyps), relabel(refs));
    CHECK_THAT(mapped.score, WithinAbs(base.score, 1e-12));
    if (!hyps[0].empty()) {
      CHECK_THAT(sentence_bleu_smoothed(relabel(hyps)[0], relabel(refs)[0]).score,
                 WithinAbs(sentence_bleu_smoothed(hyps[0], refs[0]).score, 1e-12));
    }
  }
}

TEST_CASE("corpus equals smoothed sentence when no order needs smoothing") {
  IdSeq hyp = {1, 2, 3, 4, 1, 2};
  IdSeq ref = {1, 2, 3, 4, 1, 2, 3};
  BleuScore c = corpus_bleu(std::vector<IdSeq>{hyp}, std::vector<IdSeq>{ref});
  BleuScore s = sentence_bleu_smoothed(hyp, ref);
  for (int n = 0; n < kBleuMaxOrder; ++n) REQUIRE(c.p[n] > 0.0);
  CHECK_THAT(c.score, WithinAbs(s.score, 1e-15));
}

TEST_CASE("brevity penalty never decreases as a short hypothesis grows") {
  IdSeq ref = {1, 2, 3, 4, 5, 6, 7, 8};
  IdSeq hyp = {1};
  double prev = corpus_bleu(std::vector<IdSeq>{hyp}, std::vector<IdSeq>{ref}).brevity_penalty;
  for (std::size_t k = 2; k <= ref.size(); ++k) {
    hyp.push_back(ref[k - 1]);
    double cur = corpus_bleu(std::vector<IdSeq>{hyp}, std::vector<IdSeq>{ref}).brevity_penalty;
    CHECK(cur >= prev);
    prev = cur;
  }
  CHECK_THAT(prev, WithinAbs(1.0, 1e-15));
}

TEST_CASE("corpus_bleu agrees with the brute-force oracle on random corpora") {
  Rng rng(11, 0);
  for (int trial = 0; trial < 400; ++trial) {
    std::size_t segments = 1 + rng.below(4);
    auto hyps = random_id_corpus(rng, segments, 6, 9, true);
    auto refs = random_id_corpus(rng, segments, 6, 9, false);
    BleuScore got = corpus_bleu(hyps, refs);
    oracle::BleuParts want = oracle::corpus_bleu_parts(hyps, refs);
    CHECK_THAT(got.score, WithinAbs(want.score, 1e-12));
    CHECK_THAT(got.brevity_penalty, WithinAbs(want.bp, 1e-12));
    CHECK(got.hyp_len == want.hyp_len);
    CHECK(got.ref_len == want.ref_len);
    for (int n = 0; n < 4; ++n) CHECK_THAT(got.p[n], WithinAbs(want.p[n], 1e-12));
  }
}

TEST_CASE("sentence_bleu_smoothed agrees with the oracle on random pairs") {
  Rng rng(12, 0);
  for (int trial = 0; trial < 400; ++trial) {
    IdSeq hyp = random_id_corpus(rng, 1, 5, 8, true)[0];
    IdSeq ref = random_id_corpus(rng, 1, 5, 8, false)[0];
    CHECK_THAT(sentence_bleu_smoothed(hyp, ref).score,
               WithinAbs(oracle::sentence_bleu(hyp, ref), 1e-12));
  }
}

TEST_CASE("exhaustive two-symbol grid matches the oracle") {
  std::vector<IdSeq> all;
  oracle::enumerate_sequences({0, 1}, 5, [&all](const IdSeq& s) { all.push_back(s); });
  for (const IdSeq& hyp : all) {
    for (const IdSeq& ref : all) {
      if (ref.empty()) continue;
      BleuScore got = corpus_bleu(std::vector<IdSeq>{hyp}, std::vector<IdSeq>{ref});
      oracle::BleuParts want =
          oracle::corpus_bleu_parts(std::vector<IdSeq>{hyp}, std::vector<IdSeq>{ref});
      REQUIRE_THAT(got.score, WithinAbs(want.score, 1e-12));
      REQUIRE_THAT(sentence_bleu_smoothed(hyp, ref).score,
                   WithinAbs(oracle::sentence_bleu(hyp, ref), 1e-12));
    }
  }
}
