// Line translation: sentence-split the input, beam-decode each piece, merge.
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "model.hpp"
#include "text.hpp"
#include "vocab.hpp"

namespace seqrisk {

struct TranslateOptions {
  int beam_size = 4;
  bool strip_brackets = false;
};

inline TokenSeq translate_tokens(const ModelConfig& cfg, const ParamSet& params,
                                 const Vocab& vocab, const TokenSeq& line,
                                 const TranslateOptions& opt = {}) {
  TokenSeq work = opt.strip_brackets ? strip_bracket_tokens(line) : line;
  std::vector<TokenSeq> out_parts;
  for (const TokenSeq& piece : split_sentences(work)) {
    IdSeq src = vocab.encode(piece);
    if (static_cast<int>(src.size()) > cfg.max_len) src.resize(cfg.max_len);
    out_parts.push_back(vocab.decode(beam_search(cfg, params, src, opt.beam_size)));
  }
  return merge_sentences(out_parts);
}

using LineTranslator = std::function<TokenSeq(const TokenSeq&)>;

// The returned closure borrows cfg/params/vocab; they must outlive it.
inline LineTranslator make_model_translator(const ModelConfig& cfg, const ParamSet& params,
                                            const Vocab& vocab, const TranslateOptions& opt = {}) {
  return [&cfg, &params, &vocab, opt](const TokenSeq& line) {
    return translate_tokens(cfg, params, vocab, line, opt);
  };
}

}  // namespace seqrisk