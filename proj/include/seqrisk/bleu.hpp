// BLEU-4: corpus-level (unsmoothed) and sentence-level with exponential
// smoothing, plus the 1-minus-BLEU costs used by the risk objectives.
#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "text.hpp"

namespace seqrisk {

inline constexpr int kBleuMaxOrder = 4;

struct BleuScore {
  double score = 0.0;
  double p[kBleuMaxOrder] = {0.0, 0.0, 0.0, 0.0};
  double brevity_penalty = 0.0;
  long hyp_len = 0;
  long ref_len = 0;
};

namespace detail {

template <typename Tok>
std::map<std::vector<Tok>, long> ngram_counts(const std::vector<Tok>& seq, int n) {
  std::map<std::vector<Tok>, long> counts;
  if (static_cast<int>(seq.size()) < n) return counts;
  for (std::size_t i = 0; i + n <= seq.size(); ++i)
    ++counts[std::vector<Tok>(seq.begin() + i, seq.begin() + i + n)];
  return counts;
}

template <typename Tok>
long clipped_matches(const std::vector<Tok>& hyp, const std::vector<Tok>& ref, int n) {
  auto hc = ngram_counts(hyp, n);
  auto rc = ngram_counts(ref, n);
  long m = 0;
  for (const auto& [gram, cnt] : hc) {
    auto it = rc.find(gram);
    if (it != rc.end()) m += std::min(cnt, it->second);
  }
  return m;
}

inline double brevity_penalty(long hyp_len, long ref_len) {
  if (hyp_len <= 0) return 0.0;
  if (hyp_len >= ref_len) return 1.0;
  return std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len));
}

// Clipped counts are pooled over segments before taking precisions.  Orders
// with an empty total are left out of the quarter-weighted log sum (weights
// are not renormalized); a zero-match order with a non-empty total zeroes the
// whole score.
template <typename Tok>
BleuScore corpus_bleu_impl(const std::vector<std::vector<Tok>>& hyps,
                           const std::vector<std::vector<Tok>>& refs) {
  if (hyps.size() != refs.size()) throw std::invalid_argument("corpus_bleu: list length mismatch");
  if (hyps.empty()) throw std::invalid_argument("corpus_bleu: empty input");
  BleuScore out;
  long match[kBleuMaxOrder] = {0, 0, 0, 0};
  long total[kBleuMaxOrder] = {0, 0, 0, 0};
  for (std::size_t s = 0; s < hyps.size(); ++s) {
    out.hyp_len += static_cast<long>(hyps[s].size());
    out.ref_len += static_cast<long>(refs[s].size());
    for (int n = 1; n <= kBleuMaxOrder; ++n) {
      long t = static_cast<long>(hyps[s].size()) - n + 1;
      if (t <= 0) continue;
      total[n - 1] += t;
      match[n - 1] += clipped_matches(hyps[s], refs[s], n);
    }
  }
  out.brevity_penalty = brevity_penalty(out.hyp_len, out.ref_len);
  bool zero = out.hyp_len == 0;
  double log_sum = 0.0;
  for (int n = 0; n < kBleuMaxOrder; ++n) {
    if (total[n] == 0) continue;
    out.p[n] = static_cast<double>(match[n]) / static_cast<double>(total[n]);
    if (match[n] == 0)
      zero = true;
    else
      log_sum += 0.25 * std::log(out.p[n]);
  }
  out.score = zero ? 0.0 : out.brevity_penalty * std::exp(log_sum);
  return out;
}

// Exponential smoothing: a zero-match (or empty-total) order scores 2^-invcnt
// with invcnt starting at 1 and bumped after each use; all four orders enter
// the product.
template <typename Tok>
BleuScore sentence_bleu_impl(const std::vector<Tok>& hyp, const std::vector<Tok>& ref) {
  if (ref.empty()) throw std::invalid_argument("sentence_bleu: empty reference");
  BleuScore out;
  out.hyp_len = static_cast<long>(hyp.size());
  out.ref_len = static_cast<long>(ref.size());
  out.brevity_penalty = brevity_penalty(out.hyp_len, out.ref_len);
  int invcnt = 1;
  double log_sum = 0.0;
  for (int n = 1; n <= kBleuMaxOrder; ++n) {
    long t = static_cast<long>(hyp.size()) - n + 1;
    long m = t > 0 ? clipped_matches(hyp, ref, n) : 0;
    if (t <= 0 || m == 0) {
      out.p[n - 1] = std::ldexp(1.0, -invcnt);
      ++invcnt;
    } else {
      out.p[n - 1] = static_cast<double>(m) / static_cast<double>(t);
    }
    log_sum += 0.25 * std::log(out.p[n - 1]);
  }
  out.score = hyp.empty() ? 0.0 : out.brevity_penalty * std::exp(log_sum);
  return out;
}

inline std::string ascii_lower(const std::string& s) {
  std::string out = s;
  for (char& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return out;
}

inline TokenSeq fold_case(const TokenSeq& seq) {
  TokenSeq out;
  out.reserve(seq.size());
  for (const std::string& t : seq) out.push_back(ascii_lower(t));
  return out;
}

inline std::vector<TokenSeq> fold_case(const std::vector<TokenSeq>& seqs) {
  std::vector<TokenSeq> out;
  out.reserve(seqs.size());
  for (const TokenSeq& s : seqs) out.push_back(fold_case(s));
  return out;
}

}  // namespace detail

// String tokens are compared case-insensitively (ASCII fold).
inline BleuScore corpus_bleu(const std::vector<TokenSeq>& hyps, const std::vector<TokenSeq>& refs) {
  return detail::corpus_bleu_impl(detail::fold_case(hyps), detail::fold_case(refs));
}

inline BleuScore sentence_bleu_smoothed(const TokenSeq& hyp, const TokenSeq& ref) {
  return detail::sentence_bleu_impl(detail::fold_case(hyp), detail::fold_case(ref));
}

// Id-token overloads for decode-time scoring; equivalent to the string forms
// under any relabeling of the alphabet.
inline BleuScore corpus_bleu(const std::vector<IdSeq>& hyps, const std::vector<IdSeq>& refs) {
  return detail::corpus_bleu_impl(hyps, refs);
}

inline BleuScore sentence_bleu_smoothed(const IdSeq& hyp, const IdSeq& ref) {
  return detail::sentence_bleu_impl(hyp, ref);
}

template <typename Seq>
double sbleu_cost(const Seq& hyp, const Seq& ref) {
  return 1.0 - sentence_bleu_smoothed(hyp, ref).score;
}

template <typename Seq>
double document_cost(const std::vector<Seq>& doc, const std::vector<Seq>& ref_doc) {
  return 1.0 - corpus_bleu(doc, ref_doc).score;
}

}  // namespace seqrisk