// Command-line harness: corpus generation, filtering, training, decoding and
// the exposure-bias report.  Exit codes: 0 success, 1 usage error, 2 data or
// model error.
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "seqrisk/seqrisk.hpp"

namespace {

using namespace seqrisk;

struct GenOpts {
  std::string out;
  int size = 1000;
  int vocab_size = 32;
  int title_vocab_size = 12;
  int len_min = 4, len_max = 10;
  int title_len_min = 2, title_len_max = 4;
  double title_prob = 0.0;
  double aligned_frac = 0.0;
  std::uint64_t seed = 1;
  std::int64_t noise_seed = -1;  // -1: follow --seed
  std::uint64_t cipher_seed = kDefaultCipherSeed;
};

int cmd_gen_data(const GenOpts& o) {
  NoiseSpec noise;
  noise.title_probability = o.title_prob;
  noise.title_length_range = {o.title_len_min, o.title_len_max};
  noise.aligned_title_fraction = o.aligned_frac;
  noise.seed = o.noise_seed < 0 ? o.seed : static_cast<std::uint64_t>(o.noise_seed);
  CipherTask task(o.vocab_size, CipherTask::default_title_vocab(o.title_vocab_size),
                  o.cipher_seed);
  Corpus corpus = generate_corpus(task, o.size, {o.len_min, o.len_max}, noise, o.seed);
  corpus.metadata["cipher_seed"] = std::to_string(o.cipher_seed);
  write_corpus(o.out, corpus);
  std::cout << "wrote " << corpus.size() << " pairs to " << o.out << ".src/.tgt\n";
  std::cout << "titled_count=" << corpus.metadata["titled_count"]
            << " aligned_count=" << corpus.metadata["aligned_count"] << "\n";
  return 0;
}

CipherTask task_from_manifest(const std::map<std::string, std::string>& kv) {
  auto get = [&kv](const char* key, long fallback) {
    auto it = kv.find(key);
    return it == kv.end() ? fallback : std::stol(it->second);
  };
  int body = static_cast<int>(get("body_vocab_size", 32));
  int titles = static_cast<int>(get("title_vocab_size", 12));
  std::uint64_t cipher_seed = static_cast<std::uint64_t>(
      get("cipher_seed", static_cast<long>(kDefaultCipherSeed)));
  return CipherTask(body, CipherTask::default_title_vocab(titles), cipher_seed);
}

struct FilterOpts {
  std::string src, tgt, out, manifest;
  bool no_title = false;
  bool lang_and = false;
  double max_ratio = 3.5;
  int max_tokens = 120;
};

int cmd_filter(const FilterOpts& o) {
  Corpus corpus = read_corpus(o.src, o.tgt);
  std::map<std::string, std::string> manifest = read_kv_file(o.manifest);
  CipherTask task = task_from_manifest(manifest);
  PipelineOptions opt;
  opt.no_title = o.no_title;
  opt.max_ratio = o.max_ratio;
  opt.max_tokens = o.max_tokens;
  opt.lang_require_both = o.lang_and;
  auto [filtered, report] = run_pipeline(corpus, default_pipeline(make_task_detector(task), opt));
  filtered.metadata = manifest;
  filtered.metadata["size"] = std::to_string(filtered.size());
  for (const auto& [rule, count] : report.dropped)
    filtered.metadata["dropped_" + rule] = std::to_string(count);
  write_corpus(o.out, filtered);
  std::cout << format_filter_report(report);
  return 0;
}

struct TrainOpts {
  std::string train_src, train_tgt, valid_src, valid_tgt, config, out, log;
  int embed_dim = 32, hidden_dim = 48, max_len = 32;
  std::uint64_t model_seed = 1;
};

void write_log(const std::string& path, const std::string& log) {
  if (path.empty()) return;
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << log;
}

int cmd_train(const TrainOpts& o) {
  Corpus train_corpus = read_corpus(o.train_src, o.train_tgt);
  Corpus valid_corpus = read_corpus(o.valid_src, o.valid_tgt);
  TrainConfig tc = load_train_config(o.config);

  std::vector<TokenSeq> lines;
  for (const Corpus* c : {&train_corpus, &valid_corpus})
    for (const ParallelPair& p : c->pairs) {
      lines.push_back(p.source);
      lines.push_back(p.target);
    }
  Vocab vocab = Vocab::from_corpus_lines(lines);

  ModelConfig mc;
  mc.vocab_size = vocab.size();
  mc.embed_dim = o.embed_dim;
  mc.hidden_dim = o.hidden_dim;
  mc.max_len = o.max_len;
  mc.seed = o.model_seed;
  TrainResult res = train(tc, mc, init_params(mc), vocab, train_corpus, valid_corpus, "fresh");
  std::cout << res.log;
  write_log(o.log, res.log);
  save_checkpoint(o.out, res.final);
  if (res.diverged) throw std::runtime_error("training diverged");
  std::cout << "saved " << o.out << " at step " << res.final.step << "\n";
  return 0;
}

struct FinetuneOpts {
  std::string base, train_src, train_tgt, valid_src, valid_tgt, config, out, log;
  std::string init_id = "base";
};

int cmd_finetune(const FinetuneOpts& o) {
  Checkpoint base = load_checkpoint(o.base);
  Corpus train_corpus = read_corpus(o.train_src, o.train_tgt);
  Corpus valid_corpus = read_corpus(o.valid_src, o.valid_tgt);
  TrainConfig tc = load_train_config(o.config);
  TrainResult res = finetune(base, tc, train_corpus, valid_corpus, o.init_id);
  std::cout << res.log;
  write_log(o.log, res.log);
  save_checkpoint(o.out, res.final);
  if (res.diverged) throw std::runtime_error("fine-tuning diverged");
  std::cout << "saved " << o.out << " at step " << res.final.step << "\n";
  return 0;
}

struct AvgOpts {
  std::vector<std::string> inputs;
  std::string out;
};

int cmd_avg(const AvgOpts& o) {
  std::vector<Checkpoint> ckpts;
  for (const std::string& path : o.inputs) ckpts.push_back(load_checkpoint(path));
  save_checkpoint(o.out, average_checkpoints(ckpts));
  std::cout << "averaged " << ckpts.size() << " checkpoints into " << o.out << "\n";
  return 0;
}

struct TranslateOpts2 {
  std::string ckpt, in, out;
  int beam = 4;
  bool strip_brackets = false;
};

int cmd_translate(const TranslateOpts2& o) {
  Checkpoint ckpt = load_checkpoint(o.ckpt);
  std::vector<TokenSeq> lines = read_lines(o.in);
  TranslateOptions topt;
  topt.beam_size = o.beam;
  topt.strip_brackets = o.strip_brackets;
  std::vector<TokenSeq> out_lines;
  for (const TokenSeq& line : lines)
    out_lines.push_back(translate_tokens(ckpt.config, ckpt.params, ckpt.vocab, line, topt));
  write_lines(o.out, out_lines);
  std::cout << "translated " << lines.size() << " lines to " << o.out << "\n";
  return 0;
}

struct EvalOpts {
  std::string hyp, ref;
};

int cmd_evaluate(const EvalOpts& o) {
  std::vector<TokenSeq> hyps = read_lines(o.hyp);
  std::vector<TokenSeq> refs = read_lines(o.ref);
  if (hyps.size() != refs.size())
    throw std::runtime_error("hypothesis and reference line counts differ");
  BleuScore b = corpus_bleu(hyps, refs);
  std::printf("BLEU=%.2f BP=%.4f p1=%.4f p2=%.4f p3=%.4f p4=%.4f hyp_len=%ld ref_len=%ld\n",
              100.0 * b.score, b.brevity_penalty, b.p[0], b.p[1], b.p[2], b.p[3], b.hyp_len,
              b.ref_len);
  return 0;
}

struct BiasOpts {
  std::string titled_src, titled_tgt, clean_src, clean_tgt, manifest;
  std::vector<std::string> models;  // name=checkpoint-path
  int beam = 4;
};

int cmd_bias_report(const BiasOpts& o) {
  Corpus titled = read_corpus(o.titled_src, o.titled_tgt);
  Corpus clean = read_corpus(o.clean_src, o.clean_tgt);
  CipherTask task = task_from_manifest(read_kv_file(o.manifest));
  for (const std::string& spec : o.models) {
    std::size_t eq = spec.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size()) {
      std::cerr << "error: --ckpt expects name=path, got: " << spec << "\n";
      return 1;
    }
    std::string name = spec.substr(0, eq);
    Checkpoint ckpt = load_checkpoint(spec.substr(eq + 1));
    TranslateOptions topt;
    topt.beam_size = o.beam;
    LineTranslator decode = make_model_translator(ckpt.config, ckpt.params, ckpt.vocab, topt);
    std::cout << format_bias_report(build_bias_report(name, decode, titled, clean, task)) << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sequence-level risk training toolkit"};
  app.require_subcommand(1);

  GenOpts gen;
  CLI::App* sub_gen = app.add_subcommand("gen-data", "generate a synthetic parallel corpus");
  sub_gen->add_option("--out", gen.out, "output basename (.src/.tgt/.manifest)")->required();
  sub_gen->add_option("--size", gen.size, "number of sentence pairs")->required();
  sub_gen->add_option("--vocab-size", gen.vocab_size, "body vocabulary size");
  sub_gen->add_option("--title-vocab-size", gen.title_vocab_size, "title vocabulary size");
  sub_gen->add_option("--len-min", gen.len_min, "minimum body length");
  sub_gen->add_option("--len-max", gen.len_max, "maximum body length");
  sub_gen->add_option("--title-len-min", gen.title_len_min, "minimum title length");
  sub_gen->add_option("--title-len-max", gen.title_len_max, "maximum title length");
  sub_gen->add_option("--title-prob", gen.title_prob, "probability of a bracketed title");
  sub_gen->add_option("--aligned-title-frac", gen.aligned_frac,
                      "fraction of titled pairs with the title translated on the target side");
  sub_gen->add_option("--seed", gen.seed, "generator seed");
  sub_gen->add_option("--noise-seed", gen.noise_seed, "noise stream seed (default: --seed)");
  sub_gen->add_option("--cipher-seed", gen.cipher_seed, "vocabulary mapping seed");

  FilterOpts fil;
  CLI::App* sub_filter = app.add_subcommand("filter", "run the filtering pipeline");
  sub_filter->add_option("--src", fil.src, "source file")->required();
  sub_filter->add_option("--tgt", fil.tgt, "target file")->required();
  sub_filter->add_option("--out", fil.out, "output basename")->required();
  sub_filter->add_option("--manifest", fil.manifest, "generation manifest")->required();
  sub_filter->add_flag("--no-title", fil.no_title, "also drop lines with bracketed multi-token spans");
  sub_filter->add_flag("--lang-and", fil.lang_and,
                       "drop on language mismatch only when both sides disagree");
  sub_filter->add_option("--max-ratio", fil.max_ratio, "length-ratio bound");
  sub_filter->add_option("--max-tokens", fil.max_tokens, "per-side token cap");

  TrainOpts tr;
  CLI::App* sub_train = app.add_subcommand("train", "train a model from scratch");
  sub_train->add_option("--train-src", tr.train_src)->required();
  sub_train->add_option("--train-tgt", tr.train_tgt)->required();
  sub_train->add_option("--valid-src", tr.valid_src)->required();
  sub_train->add_option("--valid-tgt", tr.valid_tgt)->required();
  sub_train->add_option("--config", tr.config, "key=value training config")->required();
  sub_train->add_option("--out", tr.out, "output checkpoint")->required();
  sub_train->add_option("--log", tr.log, "write the training log here");
  sub_train->add_option("--embed-dim", tr.embed_dim);
  sub_train->add_option("--hidden-dim", tr.hidden_dim);
  sub_train->add_option("--max-len", tr.max_len);
  sub_train->add_option("--model-seed", tr.model_seed);

  FinetuneOpts ft;
  CLI::App* sub_ft = app.add_subcommand("finetune", "fine-tune from a checkpoint");
  sub_ft->add_option("--base", ft.base, "base checkpoint")->required();
  sub_ft->add_option("--train-src", ft.train_src)->required();
  sub_ft->add_option("--train-tgt", ft.train_tgt)->required();
  sub_ft->add_option("--valid-src", ft.valid_src)->required();
  sub_ft->add_option("--valid-tgt", ft.valid_tgt)->required();
  sub_ft->add_option("--config", ft.config)->required();
  sub_ft->add_option("--out", ft.out)->required();
  sub_ft->add_option("--log", ft.log);
  sub_ft->add_option("--init-id", ft.init_id, "provenance label for the log");

  AvgOpts avg;
  CLI::App* sub_avg = app.add_subcommand("avg-checkpoints", "average checkpoints element-wise");
  sub_avg->add_option("--out", avg.out)->required();
  sub_avg->add_option("inputs", avg.inputs, "checkpoints to average")->required();

  TranslateOpts2 tl;
  CLI::App* sub_tl = app.add_subcommand("translate", "decode a file line by line");
  sub_tl->add_option("--ckpt", tl.ckpt)->required();
  sub_tl->add_option("--in", tl.in)->required();
  sub_tl->add_option("--out", tl.out)->required();
  sub_tl->add_option("--beam", tl.beam);
  sub_tl->add_flag("--strip-brackets", tl.strip_brackets,
                   "remove bracket tokens from sources before decoding");

  EvalOpts ev;
  CLI::App* sub_ev = app.add_subcommand("evaluate", "corpus BLEU of a hypothesis file");
  sub_ev->add_option("--hyp", ev.hyp)->required();
  sub_ev->add_option("--ref", ev.ref)->required();

  BiasOpts bias;
  CLI::App* sub_bias = app.add_subcommand("bias-report", "clean/titled BLEU and title coverage");
  sub_bias->add_option("--titled-src", bias.titled_src)->required();
  sub_bias->add_option("--titled-tgt", bias.titled_tgt)->required();
  sub_bias->add_option("--clean-src", bias.clean_src)->required();
  sub_bias->add_option("--clean-tgt", bias.clean_tgt)->required();
  sub_bias->add_option("--manifest", bias.manifest, "generation manifest")->required();
  sub_bias->add_option("--ckpt", bias.models, "model as name=checkpoint-path")->required();
  sub_bias->add_option("--beam", bias.beam);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (sub_gen->parsed()) return cmd_gen_data(gen);
    if (sub_filter->parsed()) return cmd_filter(fil);
    if (sub_train->parsed()) return cmd_train(tr);
    if (sub_ft->parsed()) return cmd_finetune(ft);
    if (sub_avg->parsed()) return cmd_avg(avg);
    if (sub_tl->parsed()) return cmd_translate(tl);
    if (sub_ev->parsed()) return cmd_evaluate(ev);
    if (sub_bias->parsed()) return cmd_bias_report(bias);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}