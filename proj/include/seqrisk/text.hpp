// Tokenization, sentence splitting/merging and bracket-span utilities.
#pragma once

#include <cctype>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace seqrisk {

using TokenSeq = std::vector<std::string>;
using IdSeq = std::vector<int>;

inline std::string join_tokens(const TokenSeq& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

inline bool is_sentence_terminal(char c) { return c == '.' || c == '?' || c == '!'; }

// Whitespace split, with "[" and "]" always isolated and any trailing run of
// sentence-terminal characters (. ? !) split off a word one character per
// token.  Interior punctuation ("e.g.", "3.5") stays attached.
inline TokenSeq tokenize(std::string_view line) {
  TokenSeq out;
  std::size_t i = 0;
  auto emit_chunk = [&out](std::string_view chunk) {
    while (!chunk.empty()) {
      if (chunk.front() == '[' || chunk.front() == ']') {
        out.emplace_back(1, chunk.front());
        chunk.remove_prefix(1);
        continue;
      }
      // Extent of the word up to the next bracket.
      std::size_t stop = 0;
      while (stop < chunk.size() && chunk[stop] != '[' && chunk[stop] != ']') ++stop;
      std::string_view word = chunk.substr(0, stop);
      chunk.remove_prefix(stop);
      // Peel trailing sentence-terminal characters off the word.
      std::size_t end = word.size();
      while (end > 0 && is_sentence_terminal(word[end - 1])) --end;
      if (end > 0) out.emplace_back(word.substr(0, end));
      for (std::size_t k = end; k < word.size(); ++k) out.emplace_back(1, word[k]);
    }
  };
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) emit_chunk(line.substr(start, i - start));
  }
  return out;
}

inline bool is_sentence_terminal_token(const std::string& tok) {
  return tok.size() == 1 && is_sentence_terminal(tok[0]);
}

// A token opens a new sentence if it starts with an ASCII uppercase letter or
// an opening bracket.
inline bool opens_sentence(const std::string& tok) {
  if (tok.empty()) return false;
  char c = tok[0];
  return (c >= 'A' && c <= 'Z') || c == '[';
}

// Split after a sentence-terminal token whenever the following token opens a
// sentence.  Concatenating the pieces always reproduces the input.
inline std::vector<TokenSeq> split_sentences(const TokenSeq& seq) {
  std::vector<TokenSeq> out;
  TokenSeq cur;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    cur.push_back(seq[i]);
    if (is_sentence_terminal_token(seq[i]) && i + 1 < seq.size() && opens_sentence(seq[i + 1])) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

inline TokenSeq merge_sentences(const std::vector<TokenSeq>& parts) {
  TokenSeq out;
  for (const TokenSeq& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

// [start, end) token span delimited by bracket tokens.
struct BracketSpan {
  std::size_t start;
  std::size_t end;
  bool operator==(const BracketSpan&) const = default;
};

inline bool opens_bracket(const std::string& tok) { return !tok.empty() && tok.front() == '['; }
inline bool closes_bracket(const std::string& tok) { return !tok.empty() && tok.back() == ']'; }

// Maximal non-nested spans, matched greedily left to right.  Unmatched
// brackets yield no span.
inline std::vector<BracketSpan> find_bracket_spans(const TokenSeq& seq) {
  std::vector<BracketSpan> spans;
  std::size_t i = 0;
  while (i < seq.size()) {
    if (!opens_bracket(seq[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < seq.size() && !closes_bracket(seq[j])) ++j;
    if (j == seq.size()) break;  // unmatched "["
    spans.push_back({i, j + 1});
    i = j + 1;
  }
  return spans;
}

// Number of content tokens inside a span.  Pure "[" / "]" delimiters do not
// count; a delimiter that carries word characters ("[Conflict") does.
inline std::size_t bracket_inner_count(const TokenSeq& seq, const BracketSpan& span) {
  std::size_t n = span.end - span.start;
  if (seq[span.start] == "[") --n;
  if (span.end > span.start && seq[span.end - 1] == "]" && span.end - 1 != span.start) --n;
  return n;
}

inline TokenSeq strip_bracket_tokens(const TokenSeq& seq) {
  TokenSeq out;
  out.reserve(seq.size());
  for (const std::string& t : seq)
    if (t != "[" && t != "]") out.push_back(t);
  return out;
}

}  // namespace seqrisk
