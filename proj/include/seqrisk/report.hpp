// Exposure-bias report: clean/titled BLEU plus title coverage, the fraction
// of titled sentences whose decode carries at least half of the expected
// title-image tokens.
#pragma once

#include <cstdio>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "bleu.hpp"
#include "corpus.hpp"
#include "text.hpp"
#include "translate.hpp"

namespace seqrisk {

struct BiasModelReport {
  std::string model;
  double clean_bleu = 0.0;
  double titled_bleu = 0.0;
  double coverage = 0.0;
  double exact_coverage = 0.0;
  long titled_sentences = 0;
};

// Distinct cipher images of the title tokens inside the source's bracket
// spans; empty when the line carries no title.
inline std::set<std::string> expected_title_images(const CipherTask& task, const TokenSeq& source) {
  std::set<std::string> expected;
  for (const BracketSpan& span : find_bracket_spans(source))
    for (std::size_t i = span.start; i < span.end; ++i)
      if (source[i] != "[" && source[i] != "]") expected.insert(task.map_token(source[i]));
  return expected;
}

inline BiasModelReport build_bias_report(const std::string& name, const LineTranslator& decode,
                                         const Corpus& titled, const Corpus& clean,
                                         const CipherTask& task) {
  BiasModelReport rep;
  rep.model = name;

  std::vector<TokenSeq> hyps, refs;
  for (const ParallelPair& p : clean.pairs) {
    hyps.push_back(decode(p.source));
    refs.push_back(p.target);
  }
  rep.clean_bleu = 100.0 * corpus_bleu(hyps, refs).score;

  hyps.clear();
  refs.clear();
  long covered = 0, exact = 0;
  for (const ParallelPair& p : titled.pairs) {
    TokenSeq hyp = decode(p.source);
    std::set<std::string> expected = expected_title_images(task, p.source);
    if (!expected.empty()) {
      ++rep.titled_sentences;
      std::unordered_set<std::string> present(hyp.begin(), hyp.end());
      long hit = 0;
      for (const std::string& t : expected) hit += present.count(t) ? 1 : 0;
      if (2 * hit >= static_cast<long>(expected.size())) ++covered;
      if (hit == static_cast<long>(expected.size())) ++exact;
    }
    hyps.push_back(std::move(hyp));
    refs.push_back(p.target);
  }
  rep.titled_bleu = 100.0 * corpus_bleu(hyps, refs).score;
  if (rep.titled_sentences > 0) {
    rep.coverage = static_cast<double>(covered) / static_cast<double>(rep.titled_sentences);
    rep.exact_coverage = static_cast<double>(exact) / static_cast<double>(rep.titled_sentences);
  }
  return rep;
}

inline std::string format_bias_report(const BiasModelReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "model=%s clean_bleu=%.2f titled_bleu=%.2f coverage=%.4f exact_coverage=%.4f "
                "titled_sentences=%ld",
                r.model.c_str(), r.clean_bleu, r.titled_bleu, r.coverage, r.exact_coverage,
                r.titled_sentences);
  return buf;
}

inline BiasModelReport parse_bias_report(const std::string& line) {
  BiasModelReport r;
  char model[128];
  int n = std::sscanf(line.c_str(),
                      "model=%127s clean_bleu=%lf titled_bleu=%lf coverage=%lf "
                      "exact_coverage=%lf titled_sentences=%ld",
                      model, &r.clean_bleu, &r.titled_bleu, &r.coverage, &r.exact_coverage,
                      &r.titled_sentences);
  if (n != 6) throw std::runtime_error("malformed bias report line: " + line);
  r.model = model;
  return r;
}

}  // namespace seqrisk