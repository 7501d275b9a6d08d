// Synthetic parallel corpus: token-cipher translation task with controlled
// title-misalignment noise, plus the filtering pipeline with per-rule counts.
#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "rng.hpp"
#include "text.hpp"

namespace seqrisk {

struct ParallelPair {
  TokenSeq source;
  TokenSeq target;
  int id = 0;
  bool operator==(const ParallelPair&) const = default;
};

struct Corpus {
  std::vector<ParallelPair> pairs;
  std::map<std::string, std::string> metadata;

  std::size_t size() const { return pairs.size(); }
};

struct IntRange {
  int lo = 1;
  int hi = 1;
};

inline constexpr std::uint64_t kDefaultCipherSeed = 0xC1F3ED;

// The base translation task: a seeded bijection between disjoint source and
// target vocabularies, composed with a swap of each adjacent even/odd target
// position.  Title tokens have their own image vocabulary and are never
// swapped; the swap applies within maximal runs of tokens outside bracket
// spans.
class CipherTask {
 public:
  CipherTask(int body_vocab_size, std::vector<std::string> title_vocab,
             std::uint64_t cipher_seed = kDefaultCipherSeed)
      : title_vocab_(std::move(title_vocab)) {
    if (body_vocab_size < 4) throw std::invalid_argument("CipherTask: body vocab too small");
    char buf[16];
    for (int i = 0; i < body_vocab_size; ++i) {
      std::snprintf(buf, sizeof(buf), "s%03d", i);
      src_body_.emplace_back(buf);
      std::snprintf(buf, sizeof(buf), "t%03d", i);
      tgt_body_.emplace_back(buf);
    }
    for (std::size_t j = 0; j < title_vocab_.size(); ++j) {
      std::snprintf(buf, sizeof(buf), "v%03zu", j);
      title_images_.emplace_back(buf);
    }
    check_disjoint();
    std::vector<int> body_perm(body_vocab_size), title_perm(title_vocab_.size());
    for (int i = 0; i < body_vocab_size; ++i) body_perm[i] = i;
    for (std::size_t j = 0; j < title_perm.size(); ++j) title_perm[j] = static_cast<int>(j);
    Rng rng(cipher_seed, /*stream=*/7);
    rng.shuffle(body_perm);
    rng.shuffle(title_perm);
    for (int i = 0; i < body_vocab_size; ++i) map_[src_body_[i]] = tgt_body_[body_perm[i]];
    for (std::size_t j = 0; j < title_vocab_.size(); ++j)
      map_[title_vocab_[j]] = title_images_[title_perm[j]];
  }

  static std::vector<std::string> default_title_vocab(int n) {
    std::vector<std::string> out;
    char buf[16];
    for (int i = 0; i < n; ++i) {
      std::snprintf(buf, sizeof(buf), "u%03d", i);
      out.emplace_back(buf);
    }
    return out;
  }

  const std::vector<std::string>& source_body_tokens() const { return src_body_; }
  const std::vector<std::string>& target_body_tokens() const { return tgt_body_; }
  const std::vector<std::string>& title_tokens() const { return title_vocab_; }
  const std::vector<std::string>& title_images() const { return title_images_; }

  // Unknown tokens map to themselves so the function is total.
  const std::string& map_token(const std::string& tok) const {
    auto it = map_.find(tok);
    return it == map_.end() ? tok : it->second;
  }

  bool is_title_image(const std::string& tok) const {
    return image_set().count(tok) != 0;
  }

  static void swap_adjacent(TokenSeq& seq) {
    for (std::size_t i = 0; i + 1 < seq.size(); i += 2) std::swap(seq[i], seq[i + 1]);
  }

  // Reference translation: bracket spans map token-wise in order; body runs
  // map token-wise then swap adjacent positions run-locally.
  TokenSeq oracle_translate(const TokenSeq& source) const {
    std::vector<BracketSpan> spans = find_bracket_spans(source);
    TokenSeq out;
    std::size_t span_idx = 0;
    std::size_t i = 0;
    while (i < source.size()) {
      if (span_idx < spans.size() && spans[span_idx].start == i) {
        for (std::size_t k = spans[span_idx].start; k < spans[span_idx].end; ++k)
          out.push_back(source[k] == "[" || source[k] == "]" ? source[k] : map_token(source[k]));
        i = spans[span_idx].end;
        ++span_idx;
        continue;
      }
      std::size_t run_end = i;
      while (run_end < source.size() &&
             (span_idx >= spans.size() || run_end < spans[span_idx].start))
        ++run_end;
      TokenSeq run;
      for (std::size_t k = i; k < run_end; ++k) run.push_back(map_token(source[k]));
      swap_adjacent(run);
      out.insert(out.end(), run.begin(), run.end());
      i = run_end;
    }
    return out;
  }

  // All surface tokens a corpus built on this task can contain.
  std::vector<std::string> all_tokens() const {
    std::vector<std::string> out = src_body_;
    out.insert(out.end(), tgt_body_.begin(), tgt_body_.end());
    out.insert(out.end(), title_vocab_.begin(), title_vocab_.end());
    out.insert(out.end(), title_images_.begin(), title_images_.end());
    out.emplace_back("[");
    out.emplace_back("]");
    return out;
  }

  const std::unordered_set<std::string>& source_side_set() const {
    if (src_side_.empty()) {
      src_side_.insert(src_body_.begin(), src_body_.end());
      src_side_.insert(title_vocab_.begin(), title_vocab_.end());
    }
    return src_side_;
  }

  const std::unordered_set<std::string>& target_side_set() const {
    if (tgt_side_.empty()) {
      tgt_side_.insert(tgt_body_.begin(), tgt_body_.end());
      tgt_side_.insert(title_images_.begin(), title_images_.end());
    }
    return tgt_side_;
  }

 private:
  void check_disjoint() const {
    std::set<std::string> seen(src_body_.begin(), src_body_.end());
    auto insert_all = [&seen](const std::vector<std::string>& v) {
      for (const std::string& t : v)
        if (!seen.insert(t).second)
          throw std::invalid_argument("CipherTask: overlapping vocabularies at token " + t);
    };
    insert_all(tgt_body_);
    insert_all(title_vocab_);
    insert_all(title_images_);
  }

  const std::unordered_set<std::string>& image_set() const {
    if (image_set_.empty()) image_set_.insert(title_images_.begin(), title_images_.end());
    return image_set_;
  }

  std::vector<std::string> src_body_, tgt_body_, title_vocab_, title_images_;
  std::map<std::string, std::string> map_;
  mutable std::unordered_set<std::string> image_set_, src_side_, tgt_side_;
};

struct NoiseSpec {
  double title_probability = 0.0;
  IntRange title_length_range{2, 4};
  std::vector<std::string> title_vocab;  // empty: CipherTask::default_title_vocab(12)
  // Fraction of titled pairs whose target carries the bracketed title images
  // as well (a correctly translated title); the remainder get the title on
  // the source side only, the misalignment pattern under study.
  double aligned_title_fraction = 0.0;
  std::uint64_t seed = 1;
};

inline Corpus generate_corpus(const CipherTask& task, int size, IntRange length_range,
                              const NoiseSpec& noise, std::uint64_t seed) {
  if (size < 1) throw std::invalid_argument("generate_corpus: size must be >= 1");
  if (length_range.lo < 1 || length_range.hi < length_range.lo)
    throw std::invalid_argument("generate_corpus: bad length range");
  if (noise.title_probability < 0.0 || noise.title_probability > 1.0)
    throw std::invalid_argument("generate_corpus: title probability out of range");
  if (noise.title_length_range.lo < 1 ||
      noise.title_length_range.hi < noise.title_length_range.lo)
    throw std::invalid_argument("generate_corpus: bad title length range");
  const auto& titles = task.title_tokens();
  if (noise.title_probability > 0.0 && titles.empty())
    throw std::invalid_argument("generate_corpus: title noise requested without title vocab");

  Rng body_rng(seed, /*stream=*/0);
  Rng noise_rng(noise.seed, /*stream=*/1);
  const auto& body = task.source_body_tokens();
  Corpus out;
  long titled_count = 0, aligned_count = 0;
  for (int i = 0; i < size; ++i) {
    int len = body_rng.between(length_range.lo, length_range.hi);
    TokenSeq src_body;
    for (int t = 0; t < len; ++t) src_body.push_back(body[body_rng.below(body.size())]);
    TokenSeq tgt_body;
    for (const std::string& t : src_body) tgt_body.push_back(task.map_token(t));
    CipherTask::swap_adjacent(tgt_body);

    ParallelPair pair;
    pair.id = i;
    bool titled = noise_rng.bernoulli(noise.title_probability);
    if (titled) {
      ++titled_count;
      int k = noise_rng.between(noise.title_length_range.lo, noise.title_length_range.hi);
      TokenSeq title;
      for (int t = 0; t < k; ++t) title.push_back(titles[noise_rng.below(titles.size())]);
      bool aligned = noise_rng.bernoulli(noise.aligned_title_fraction);
      pair.source.push_back("[");
      pair.source.insert(pair.source.end(), title.begin(), title.end());
      pair.source.push_back("]");
      if (aligned) {
        ++aligned_count;
        pair.target.push_back("[");
        for (const std::string& t : title) pair.target.push_back(task.map_token(t));
        pair.target.push_back("]");
      }
    }
    pair.source.insert(pair.source.end(), src_body.begin(), src_body.end());
    pair.target.insert(pair.target.end(), tgt_body.begin(), tgt_body.end());
    out.pairs.push_back(std::move(pair));
  }

  auto put = [&out](const std::string& k, const std::string& v) { out.metadata[k] = v; };
  put("size", std::to_string(size));
  put("seed", std::to_string(seed));
  put("noise_seed", std::to_string(noise.seed));
  put("title_probability", std::to_string(noise.title_probability));
  put("aligned_title_fraction", std::to_string(noise.aligned_title_fraction));
  put("title_len_min", std::to_string(noise.title_length_range.lo));
  put("title_len_max", std::to_string(noise.title_length_range.hi));
  put("len_min", std::to_string(length_range.lo));
  put("len_max", std::to_string(length_range.hi));
  put("body_vocab_size", std::to_string(task.source_body_tokens().size()));
  put("title_vocab_size", std::to_string(task.title_tokens().size()));
  put("titled_count", std::to_string(titled_count));
  put("aligned_count", std::to_string(aligned_count));
  return out;
}

inline Corpus generate_corpus(int size, int vocab_size, IntRange length_range,
                              const NoiseSpec& noise, std::uint64_t seed,
                              std::uint64_t cipher_seed = kDefaultCipherSeed) {
  std::vector<std::string> titles =
      noise.title_vocab.empty() ? CipherTask::default_title_vocab(12) : noise.title_vocab;
  CipherTask task(vocab_size, std::move(titles), cipher_seed);
  return generate_corpus(task, size, length_range, noise, seed);
}

// ---------------------------------------------------------------------------
// Filtering

struct FilterReport {
  long kept = 0;
  std::vector<std::pair<std::string, long>> dropped;

  long total_dropped() const {
    long n = 0;
    for (const auto& [_, c] : dropped) n += c;
    return n;
  }
  void add_rule(const std::string& name, long count) { dropped.emplace_back(name, count); }
};

inline std::string format_filter_report(const FilterReport& report) {
  std::string out;
  for (const auto& [name, count] : report.dropped)
    out += "rule=" + name + " dropped=" + std::to_string(count) + "\n";
  out += "kept=" + std::to_string(report.kept) + "\n";
  return out;
}

namespace detail {

inline void reindex(Corpus& c) {
  for (std::size_t i = 0; i < c.pairs.size(); ++i) c.pairs[i].id = static_cast<int>(i);
}

// Keeps pairs failing the drop predicate; surviving pairs are token-exact and
// re-numbered densely.
template <typename DropFn>
std::pair<Corpus, FilterReport> drop_filter(const Corpus& c, const std::string& name,
                                            DropFn&& drops) {
  Corpus out;
  out.metadata = c.metadata;
  long dropped = 0;
  for (const ParallelPair& p : c.pairs) {
    if (drops(p))
      ++dropped;
    else
      out.pairs.push_back(p);
  }
  reindex(out);
  FilterReport report;
  report.kept = static_cast<long>(out.pairs.size());
  report.add_rule(name, dropped);
  return {std::move(out), std::move(report)};
}

}  // namespace detail

inline std::pair<Corpus, FilterReport> filter_duplicates(const Corpus& c) {
  std::set<std::pair<std::string, std::string>> seen;
  return detail::drop_filter(c, "duplicates", [&seen](const ParallelPair& p) {
    return !seen.emplace(join_tokens(p.source), join_tokens(p.target)).second;
  });
}

inline std::pair<Corpus, FilterReport> filter_length_ratio(const Corpus& c,
                                                           double max_ratio = 3.5) {
  if (!(max_ratio > 1.0)) throw std::invalid_argument("filter_length_ratio: max_ratio must be > 1");
  return detail::drop_filter(c, "ratio", [max_ratio](const ParallelPair& p) {
    double a = static_cast<double>(p.source.size());
    double b = static_cast<double>(p.target.size());
    if (p.source.empty() || p.target.empty()) return true;
    return a > max_ratio * b || b > max_ratio * a;
  });
}

inline std::pair<Corpus, FilterReport> filter_max_length(const Corpus& c, int max_tokens = 120) {
  if (max_tokens < 1) throw std::invalid_argument("filter_max_length: max_tokens must be >= 1");
  return detail::drop_filter(c, "max-length", [max_tokens](const ParallelPair& p) {
    return static_cast<int>(p.source.size()) > max_tokens ||
           static_cast<int>(p.target.size()) > max_tokens;
  });
}

inline bool has_multi_token_bracket_span(const TokenSeq& seq) {
  for (const BracketSpan& span : find_bracket_spans(seq))
    if (bracket_inner_count(seq, span) >= 2) return true;
  return false;
}

inline std::pair<Corpus, FilterReport> filter_titles(const Corpus& c) {
  return detail::drop_filter(c, "titles", [](const ParallelPair& p) {
    return has_multi_token_bracket_span(p.source) || has_multi_token_bracket_span(p.target);
  });
}

enum class Lang { Source, Target, Unknown };

using LanguageDetector = std::function<Lang(const TokenSeq&)>;

// Classifies by vocabulary-overlap fractions; below a 0.5 margin between the
// two fractions the verdict is Unknown.
inline LanguageDetector make_overlap_detector(std::unordered_set<std::string> src_vocab,
                                              std::unordered_set<std::string> tgt_vocab,
                                              double margin = 0.5) {
  return [src_vocab = std::move(src_vocab), tgt_vocab = std::move(tgt_vocab),
          margin](const TokenSeq& seq) -> Lang {
    if (seq.empty()) return Lang::Unknown;
    double in_src = 0, in_tgt = 0;
    for (const std::string& t : seq) {
      if (src_vocab.count(t)) ++in_src;
      if (tgt_vocab.count(t)) ++in_tgt;
    }
    double f_src = in_src / static_cast<double>(seq.size());
    double f_tgt = in_tgt / static_cast<double>(seq.size());
    if (f_src - f_tgt >= margin) return Lang::Source;
    if (f_tgt - f_src >= margin) return Lang::Target;
    return Lang::Unknown;
  };
}

inline LanguageDetector make_task_detector(const CipherTask& task, double margin = 0.5) {
  return make_overlap_detector(task.source_side_set(), task.target_side_set(), margin);
}

// Drops a pair when the source reads as target-language or the target reads
// as source-language; `require_both` switches the OR to an AND.
inline std::pair<Corpus, FilterReport> filter_language_direction(const Corpus& c,
                                                                 const LanguageDetector& detector,
                                                                 bool require_both = false) {
  return detail::drop_filter(c, "language", [&detector, require_both](const ParallelPair& p) {
    bool src_wrong = detector(p.source) == Lang::Target;
    bool tgt_wrong = detector(p.target) == Lang::Source;
    return require_both ? (src_wrong && tgt_wrong) : (src_wrong || tgt_wrong);
  });
}

using FilterStep = std::function<std::pair<Corpus, FilterReport>(const Corpus&)>;

struct PipelineOptions {
  bool no_title = false;
  double max_ratio = 3.5;
  int max_tokens = 120;
  bool lang_require_both = false;
};

inline std::vector<FilterStep> default_pipeline(const LanguageDetector& detector,
                                                const PipelineOptions& opt = {}) {
  std::vector<FilterStep> steps;
  steps.push_back([detector, opt](const Corpus& c) {
    return filter_language_direction(c, detector, opt.lang_require_both);
  });
  steps.push_back([](const Corpus& c) { return filter_duplicates(c); });
  steps.push_back([opt](const Corpus& c) { return filter_length_ratio(c, opt.max_ratio); });
  steps.push_back([opt](const Corpus& c) { return filter_max_length(c, opt.max_tokens); });
  if (opt.no_title) steps.push_back([](const Corpus& c) { return filter_titles(c); });
  return steps;
}

// Applies rules in order; each drop is attributed to the first rule that
// rejects the pair.
inline std::pair<Corpus, FilterReport> run_pipeline(const Corpus& c,
                                                    const std::vector<FilterStep>& steps) {
  Corpus cur = c;
  FilterReport combined;
  for (const FilterStep& step : steps) {
    auto [next, report] = step(cur);
    for (const auto& [name, count] : report.dropped) combined.add_rule(name, count);
    cur = std::move(next);
  }
  combined.kept = static_cast<long>(cur.pairs.size());
  return {std::move(cur), std::move(combined)};
}

// ---------------------------------------------------------------------------
// Disk format: parallel UTF-8 text files <base>.src / <base>.tgt plus a
// key=value manifest at <base>.manifest.

inline void write_lines(const std::string& path, const std::vector<TokenSeq>& lines) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const TokenSeq& l : lines) out << join_tokens(l) << '\n';
}

inline std::vector<TokenSeq> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::vector<TokenSeq> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    out.push_back(tokenize(line));
  }
  return out;
}

inline void write_kv_file(const std::string& path,
                          const std::map<std::string, std::string>& kv) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const auto& [k, v] : kv) out << k << '=' << v << '\n';
}

inline std::map<std::string, std::string> read_kv_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::size_t start = line.find_first_not_of(" \t");
    if (start == std::string::npos || line[start] == '#') continue;
    std::size_t eq = line.find('=', start);
    if (eq == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected key=value");
    std::string key = line.substr(start, eq - start);
    while (!key.empty() && (key.back() == ' ' || key.back() == '\t')) key.pop_back();
    std::string val = line.substr(eq + 1);
    std::size_t vs = val.find_first_not_of(" \t");
    val = vs == std::string::npos ? "" : val.substr(vs);
    kv[key] = val;
  }
  return kv;
}

inline void write_corpus(const std::string& base, const Corpus& c) {
  std::vector<TokenSeq> src, tgt;
  for (const ParallelPair& p : c.pairs) {
    src.push_back(p.source);
    tgt.push_back(p.target);
  }
  write_lines(base + ".src", src);
  write_lines(base + ".tgt", tgt);
  if (!c.metadata.empty()) write_kv_file(base + ".manifest", c.metadata);
}

inline Corpus read_corpus(const std::string& src_path, const std::string& tgt_path) {
  Corpus c;
  std::vector<TokenSeq> src = read_lines(src_path);
  std::vector<TokenSeq> tgt = read_lines(tgt_path);
  if (src.size() != tgt.size())
    throw std::runtime_error("corpus line counts differ: " + src_path + " vs " + tgt_path);
  for (std::size_t i = 0; i < src.size(); ++i)
    c.pairs.push_back({std::move(src[i]), std::move(tgt[i]), static_cast<int>(i)});
  return c;
}

}  // namespace seqrisk