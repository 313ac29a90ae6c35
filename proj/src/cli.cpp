#include "sanmt/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sanmt/analysis.hpp"
#include "sanmt/checkpoint.hpp"
#include "sanmt/conllu.hpp"
#include "sanmt/errors.hpp"
#include "sanmt/metrics.hpp"
#include "sanmt/synth.hpp"
#include "sanmt/train.hpp"

namespace sanmt {

namespace {

using json = nlohmann::json;

void check_mode_flag(const std::string& flag_mode, const ModelConfig& cfg) {
  if (!flag_mode.empty() && flag_mode != cfg.mode)
    throw DataError("mode flag '" + flag_mode + "' conflicts with checkpoint mode '" +
                    cfg.mode + "'");
}

std::unique_ptr<BpeCodes> maybe_codes(const std::string& path) {
  if (path.empty()) return nullptr;
  return std::make_unique<BpeCodes>(load_codes(path));
}

void write_output(const std::string& path, const std::vector<std::string>& lines) {
  if (path == "-") {
    for (const auto& l : lines) std::cout << l << "\n";
  } else {
    write_lines(path, lines);
  }
}

ParallelCorpus numerize(const std::vector<std::string>& src_lines,
                        const std::vector<std::string>& tgt_lines, const Vocab& src_vocab,
                        const Vocab& tgt_vocab, int max_len, const char* name) {
  if (src_lines.size() != tgt_lines.size())
    throw DataError(std::string(name) + ": source and target line counts differ (" +
                    std::to_string(src_lines.size()) + " vs " +
                    std::to_string(tgt_lines.size()) + ")");
  ParallelCorpus c;
  long skipped = 0;
  for (std::size_t i = 0; i < src_lines.size(); ++i) {
    std::vector<std::string> s = split_ws(src_lines[i]);
    std::vector<std::string> t = split_ws(tgt_lines[i]);
    if (s.empty() || t.empty() || static_cast<int>(s.size()) > max_len ||
        static_cast<int>(t.size()) > max_len) {
      ++skipped;
      continue;
    }
    c.src.push_back(src_vocab.encode(s));
    c.tgt.push_back(tgt_vocab.encode(t));
  }
  if (skipped > 0)
    std::cerr << name << ": skipped " << skipped << " empty or overlong sentence pairs\n";
  if (c.size() == 0) throw DataError(std::string(name) + ": no usable sentence pairs");
  return c;
}

struct TrainArgs {
  std::string mode = "baseline";
  std::string src, tgt, valid_src, valid_tgt, out, log_path, config_path;
  int embed_dim = 64;
  int layers = 1;
  int max_len = 400;
  TrainConfig tc;
};

void run_train(const TrainArgs& a) {
  std::ofstream log(a.log_path, std::ios::binary);
  if (!log) throw DataError("cannot write training log to " + a.log_path);

  std::vector<std::string> src_lines = read_lines(a.src);
  std::vector<std::string> tgt_lines = read_lines(a.tgt);
  std::vector<std::vector<std::string>> src_tok, tgt_tok;
  for (const auto& l : src_lines) src_tok.push_back(split_ws(l));
  for (const auto& l : tgt_lines) tgt_tok.push_back(split_ws(l));
  Vocab src_vocab = Vocab::build(src_tok);
  Vocab tgt_vocab = Vocab::build(tgt_tok);

  ParallelCorpus train_data =
      numerize(src_lines, tgt_lines, src_vocab, tgt_vocab, a.max_len, "train corpus");
  ParallelCorpus valid_data =
      numerize(read_lines(a.valid_src), read_lines(a.valid_tgt), src_vocab, tgt_vocab,
               a.max_len, "validation corpus");

  ModelConfig mc;
  mc.mode = a.mode;
  mc.embed_dim = a.embed_dim;
  mc.layers = a.layers;
  mc.dropout = a.tc.dropout;
  mc.max_len = a.max_len;
  mc.src_vocab = src_vocab.id_to_tok;
  mc.tgt_vocab = tgt_vocab.id_to_tok;

  Rng init_rng = Rng(a.tc.seed).fork(0);
  Model model = Model::init(mc, init_rng, a.tc.init_range);

  TrainResult r = train(model, train_data, valid_data, a.tc, a.out, &log);
  std::cerr << "training stopped after " << r.updates << " updates, " << r.decays
            << " lr decays, best validation perplexity " << r.best_valid_ppl << "\n";
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"neural machine translation with latent dependency trees"};
  app.require_subcommand(1);

  // ----- bpe-learn -----
  struct {
    std::string input, output;
    int merges = 32000;
  } bl;
  auto* bpe_learn_cmd = app.add_subcommand("bpe-learn", "learn BPE merge operations");
  bpe_learn_cmd->add_option("--input", bl.input, "tokenized corpus")->required();
  bpe_learn_cmd->add_option("--merges", bl.merges, "merge operations");
  bpe_learn_cmd->add_option("--output", bl.output, "codes file")->required();
  bpe_learn_cmd->callback(
      [&] { save_codes(bpe_learn(read_lines(bl.input), bl.merges), bl.output); });

  // ----- bpe-apply -----
  struct {
    std::string input, codes, output = "-";
  } ba;
  auto* bpe_apply_cmd = app.add_subcommand("bpe-apply", "apply BPE merge operations");
  bpe_apply_cmd->add_option("--input", ba.input, "text to segment")->required();
  bpe_apply_cmd->add_option("--codes", ba.codes, "codes file")->required();
  bpe_apply_cmd->add_option("--output", ba.output, "output file, - for stdout");
  bpe_apply_cmd->callback([&] {
    BpeCodes codes = load_codes(ba.codes);
    std::vector<std::string> out;
    for (const auto& line : read_lines(ba.input))
      out.push_back(join_ws(bpe_apply(line, codes).first));
    write_output(ba.output, out);
  });

  // ----- make-synth -----
  struct {
    int size = 10000;
    std::uint64_t seed = 1;
    std::string out;
  } ms;
  auto* synth_cmd = app.add_subcommand("make-synth", "generate the agreement benchmark corpus");
  synth_cmd->add_option("--size", ms.size, "sentence count")->required();
  synth_cmd->add_option("--seed", ms.seed, "rng seed");
  synth_cmd->add_option("--out", ms.out, "output directory")->required();
  synth_cmd->callback([&] { make_synthetic_corpus(ms.size, ms.seed, ms.out); });

  // ----- train -----
  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "train a translation model");
  train_cmd->add_option("--mode", tr.mode, "model flavor")
      ->check(CLI::IsMember(model_modes()));
  train_cmd->add_option("--src", tr.src)->required();
  train_cmd->add_option("--tgt", tr.tgt)->required();
  train_cmd->add_option("--valid-src", tr.valid_src)->required();
  train_cmd->add_option("--valid-tgt", tr.valid_tgt)->required();
  train_cmd->add_option("--out", tr.out, "checkpoint path")->required();
  train_cmd->add_option("--log", tr.log_path, "TSV training log (default <out>.log)");
  train_cmd->add_option("--config", tr.config_path, "JSON config file");
  train_cmd->add_option("--embed-dim", tr.embed_dim);
  train_cmd->add_option("--layers", tr.layers);
  train_cmd->add_option("--max-len", tr.max_len);
  train_cmd->add_option("--dropout", tr.tc.dropout);
  train_cmd->add_option("--lr", tr.tc.lr);
  train_cmd->add_option("--lr-decay", tr.tc.lr_decay);
  train_cmd->add_option("--max-decays", tr.tc.max_decays);
  train_cmd->add_option("--batch-size", tr.tc.batch_size);
  train_cmd->add_option("--eval-interval", tr.tc.eval_interval);
  train_cmd->add_option("--max-updates", tr.tc.max_updates);
  train_cmd->add_option("--init-range", tr.tc.init_range);
  train_cmd->add_option("--clip-norm", tr.tc.clip_norm);
  train_cmd->add_option("--seed", tr.tc.seed);
  train_cmd->callback([&] {
    // precedence: flags > config file > defaults
    if (!tr.config_path.empty()) {
      std::ifstream in(tr.config_path);
      if (!in) throw DataError("cannot open config file " + tr.config_path);
      json cfg;
      try {
        in >> cfg;
      } catch (const json::parse_error& e) {
        throw DataError(tr.config_path + ": " + e.what());
      }
      auto overlay = [&](const char* flag, const char* key, auto& var) {
        if (train_cmd->count(flag) == 0 && cfg.contains(key))
          var = cfg.at(key).get<std::decay_t<decltype(var)>>();
      };
      overlay("--mode", "mode", tr.mode);
      overlay("--embed-dim", "embed-dim", tr.embed_dim);
      overlay("--layers", "layers", tr.layers);
      overlay("--max-len", "max-len", tr.max_len);
      overlay("--dropout", "dropout", tr.tc.dropout);
      overlay("--lr", "lr", tr.tc.lr);
      overlay("--lr-decay", "lr-decay", tr.tc.lr_decay);
      overlay("--max-decays", "max-decays", tr.tc.max_decays);
      overlay("--batch-size", "batch-size", tr.tc.batch_size);
      overlay("--eval-interval", "eval-interval", tr.tc.eval_interval);
      overlay("--max-updates", "max-updates", tr.tc.max_updates);
      overlay("--init-range", "init-range", tr.tc.init_range);
      overlay("--clip-norm", "clip-norm", tr.tc.clip_norm);
      overlay("--seed", "seed", tr.tc.seed);
      if (std::find(model_modes().begin(), model_modes().end(), tr.mode) ==
          model_modes().end())
        throw DataError("config file mode '" + tr.mode + "' is not a model mode");
    }
    if (tr.log_path.empty()) tr.log_path = tr.out + ".log";

    json resolved;
    resolved["mode"] = tr.mode;
    resolved["embed-dim"] = tr.embed_dim;
    resolved["layers"] = tr.layers;
    resolved["max-len"] = tr.max_len;
    resolved["dropout"] = tr.tc.dropout;
    resolved["lr"] = tr.tc.lr;
    resolved["lr-decay"] = tr.tc.lr_decay;
    resolved["max-decays"] = tr.tc.max_decays;
    resolved["batch-size"] = tr.tc.batch_size;
    resolved["eval-interval"] = tr.tc.eval_interval;
    resolved["max-updates"] = tr.tc.max_updates;
    resolved["init-range"] = tr.tc.init_range;
    resolved["clip-norm"] = tr.tc.clip_norm;
    resolved["seed"] = tr.tc.seed;
    std::cerr << "resolved config: " << resolved.dump() << "\n";

    run_train(tr);
  });

  // ----- translate -----
  struct {
    std::string model, src, bpe, out = "-", mode;
  } tl;
  auto* translate_cmd = app.add_subcommand("translate", "greedy-decode source sentences");
  translate_cmd->add_option("--model", tl.model)->required();
  translate_cmd->add_option("--src", tl.src)->required();
  translate_cmd->add_option("--bpe", tl.bpe, "source BPE codes");
  translate_cmd->add_option("--out", tl.out, "output file, - for stdout");
  translate_cmd->add_option("--mode", tl.mode, "assert the checkpoint mode");
  translate_cmd->callback([&] {
    Checkpoint ckpt = load_checkpoint(tl.model);
    check_mode_flag(tl.mode, ckpt.model.cfg);
    auto codes = maybe_codes(tl.bpe);
    write_output(tl.out, translate_corpus(ckpt.model, read_lines(tl.src), codes.get()));
  });

  // ----- induce -----
  struct {
    std::string model, src, bpe, out = "-", mode;
  } in_;
  auto* induce_cmd = app.add_subcommand("induce", "extract dependency trees");
  induce_cmd->add_option("--model", in_.model)->required();
  induce_cmd->add_option("--src", in_.src)->required();
  induce_cmd->add_option("--bpe", in_.bpe, "source BPE codes");
  induce_cmd->add_option("--out", in_.out, "CoNLL-U output, - for stdout");
  induce_cmd->add_option("--mode", in_.mode, "assert the checkpoint mode");
  induce_cmd->callback([&] {
    Checkpoint ckpt = load_checkpoint(in_.model);
    check_mode_flag(in_.mode, ckpt.model.cfg);
    auto codes = maybe_codes(in_.bpe);
    std::ostringstream os;
    for (const InducedTree& t : induce_trees(ckpt.model, read_lines(in_.src), codes.get()))
      write_conllu_sentence(os, t.words, t.tree.heads_conllu());
    if (in_.out == "-") {
      std::cout << os.str();
    } else {
      std::ofstream f(in_.out, std::ios::binary);
      if (!f) throw DataError("cannot write " + in_.out);
      f << os.str();
    }
  });

  // ----- eval-attachment -----
  struct {
    std::string pred, gold;
  } ea;
  auto* attach_cmd = app.add_subcommand("eval-attachment", "score trees against gold");
  attach_cmd->add_option("--pred", ea.pred)->required();
  attach_cmd->add_option("--gold", ea.gold)->required();
  attach_cmd->callback([&] {
    std::vector<GoldTree> pred = read_conllu(ea.pred);
    std::vector<GoldTree> gold = read_conllu(ea.gold);
    std::vector<std::vector<int>> heads;
    for (const auto& t : pred) heads.push_back(t.heads);
    AttachmentReport rep = attachment_accuracy(heads, gold);
    std::printf("%.6f\t%.6f\t%ld\t%ld\n", rep.da, rep.ua, rep.counted, rep.excluded);
  });

  // ----- eval-bleu -----
  struct {
    std::string hyp, ref;
  } eb;
  auto* bleu_cmd = app.add_subcommand("eval-bleu", "corpus BLEU");
  bleu_cmd->add_option("--hyp", eb.hyp)->required();
  bleu_cmd->add_option("--ref", eb.ref)->required();
  bleu_cmd->callback([&] {
    BleuResult r = bleu(read_lines(eb.hyp), read_lines(eb.ref));
    std::printf("%.4f\n", r.bleu);
  });

  // ----- significance -----
  struct {
    std::string hyp_a, hyp_b, ref;
    int resamples = 1000;
    std::uint64_t seed = 1;
  } sg;
  auto* sig_cmd = app.add_subcommand("significance", "paired bootstrap BLEU comparison");
  sig_cmd->add_option("--hyp-a", sg.hyp_a)->required();
  sig_cmd->add_option("--hyp-b", sg.hyp_b)->required();
  sig_cmd->add_option("--ref", sg.ref)->required();
  sig_cmd->add_option("--resamples", sg.resamples);
  sig_cmd->add_option("--seed", sg.seed);
  sig_cmd->callback([&] {
    auto [p_ab, p_ba] = bootstrap_significance(read_lines(sg.hyp_a), read_lines(sg.hyp_b),
                                               read_lines(sg.ref), sg.resamples, sg.seed);
    std::printf("%.6f\t%.6f\n", p_ab, p_ba);
  });

  // ----- gates -----
  struct {
    std::string model, src, bpe, out = "-", mode;
  } gt;
  auto* gates_cmd = app.add_subcommand("gates", "per-token gate activation norms");
  gates_cmd->add_option("--model", gt.model)->required();
  gates_cmd->add_option("--src", gt.src)->required();
  gates_cmd->add_option("--bpe", gt.bpe, "source BPE codes");
  gates_cmd->add_option("--out", gt.out, "TSV output, - for stdout");
  gates_cmd->add_option("--mode", gt.mode, "assert the checkpoint mode");
  gates_cmd->callback([&] {
    Checkpoint ckpt = load_checkpoint(gt.model);
    check_mode_flag(gt.mode, ckpt.model.cfg);
    auto codes = maybe_codes(gt.bpe);
    std::vector<std::string> rows = {"#sentence\tstep\ttoken\tgate_norm\tis_max"};
    char buf[256];
    for (const GateRecord& r : gate_report(ckpt.model, read_lines(gt.src), codes.get())) {
      std::snprintf(buf, sizeof(buf), "%d\t%d\t%s\t%.12g\t%d", r.sentence, r.step,
                    r.token.c_str(), r.gate_norm, r.is_sentence_max ? 1 : 0);
      rows.emplace_back(buf);
    }
    write_output(gt.out, rows);
  });

  // ----- export-attn -----
  struct {
    std::string model, src, bpe, out, mode;
    int sentence = 1;
  } ex;
  auto* export_cmd = app.add_subcommand("export-attn", "dump attention matrices as TSV");
  export_cmd->add_option("--model", ex.model)->required();
  export_cmd->add_option("--src", ex.src)->required();
  export_cmd->add_option("--bpe", ex.bpe, "source BPE codes");
  export_cmd->add_option("--sentence", ex.sentence, "1-based sentence index");
  export_cmd->add_option("--out", ex.out, "output path prefix")->required();
  export_cmd->add_option("--mode", ex.mode, "assert the checkpoint mode");
  export_cmd->callback([&] {
    Checkpoint ckpt = load_checkpoint(ex.model);
    check_mode_flag(ex.mode, ckpt.model.cfg);
    auto codes = maybe_codes(ex.bpe);
    std::vector<std::string> lines = read_lines(ex.src);
    if (ex.sentence < 1 || ex.sentence > static_cast<int>(lines.size()))
      throw DataError("sentence index " + std::to_string(ex.sentence) +
                      " out of range (file has " + std::to_string(lines.size()) +
                      " lines)");
    for (const std::string& path :
         export_attention(ckpt.model, lines[ex.sentence - 1], codes.get(), ex.out))
      std::cerr << "wrote " << path << "\n";
  });

  std::vector<char*> argv;
  std::string prog = "sanmt";
  argv.push_back(prog.data());
  std::vector<std::string> args_copy = args;
  for (auto& a : args_copy) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? 0 : 1;
  } catch (const SingularMatrixError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ContractViolation& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace sanmt
