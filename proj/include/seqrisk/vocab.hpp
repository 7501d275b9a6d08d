// Token/id bijection with fixed reserved ids.
#pragma once

#include <algorithm>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "text.hpp"

namespace seqrisk {

class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;

  Vocab() {
    for (const char* t : {"<pad>", "<bos>", "<eos>", "<unk>"}) add(t);
  }

  // Deterministic construction: reserved tokens then the given tokens in
  // sorted order, duplicates ignored.
  static Vocab from_tokens(const std::vector<std::string>& tokens) {
    Vocab v;
    std::set<std::string> uniq(tokens.begin(), tokens.end());
    for (const std::string& t : uniq) v.add(t);
    return v;
  }

  static Vocab from_corpus_lines(const std::vector<TokenSeq>& lines) {
    std::vector<std::string> flat;
    for (const TokenSeq& l : lines) flat.insert(flat.end(), l.begin(), l.end());
    return from_tokens(flat);
  }

  int add(const std::string& token) {
    auto it = index_.find(token);
    if (it != index_.end()) return it->second;
    int id = static_cast<int>(tokens_.size());
    tokens_.push_back(token);
    index_.emplace(token, id);
    return id;
  }

  int id(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? kUnk : it->second;
  }

  bool contains(const std::string& token) const { return index_.count(token) != 0; }

  const std::string& token(int id) const {
    if (id < 0 || id >= static_cast<int>(tokens_.size()))
      throw std::out_of_range("Vocab: id out of range");
    return tokens_[id];
  }

  int size() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  IdSeq encode(const TokenSeq& seq) const {
    IdSeq out;
    out.reserve(seq.size());
    for (const std::string& t : seq) out.push_back(id(t));
    return out;
  }

  TokenSeq decode(const IdSeq& ids) const {
    TokenSeq out;
    out.reserve(ids.size());
    for (int i : ids) out.push_back(token(i));
    return out;
  }

  bool operator==(const Vocab& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace seqrisk