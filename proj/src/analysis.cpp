#include "sanmt/analysis.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "sanmt/errors.hpp"
#include "sanmt/matrix_tree.hpp"

namespace sanmt {

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

void write_lines(const std::string& path, const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  for (const auto& l : lines) out << l << "\n";
}

TokenizedLine tokenize_line(const std::string& line, const BpeCodes* codes) {
  TokenizedLine t;
  t.words = split_ws(line);
  if (codes) {
    auto [tokens, seg] = bpe_apply(line, *codes);
    t.tokens = std::move(tokens);
    t.seg = std::move(seg);
  } else {
    t.tokens = t.words;
    for (int i = 0; i < static_cast<int>(t.words.size()); ++i)
      t.seg.spans.emplace_back(i, i);
  }
  return t;
}

std::vector<std::string> translate_corpus(const Model& model,
                                          const std::vector<std::string>& src_lines,
                                          const BpeCodes* codes) {
  Vocab src_vocab = Vocab::from_tokens(model.cfg.src_vocab);
  Vocab tgt_vocab = Vocab::from_tokens(model.cfg.tgt_vocab);
  std::vector<std::string> out;
  out.reserve(src_lines.size());
  for (const auto& line : src_lines) {
    TokenizedLine t = tokenize_line(line, codes);
    std::vector<int> ids = src_vocab.encode(t.tokens);
    std::vector<int> hyp = greedy_translate(model, ids);
    out.push_back(join_ws(bpe_unsplit(tgt_vocab.decode(hyp))));
  }
  return out;
}

std::vector<InducedTree> induce_trees(const Model& model,
                                      const std::vector<std::string>& src_lines,
                                      const BpeCodes* codes) {
  if (!model.cfg.uses_syntax())
    throw DataError("induce: model mode '" + model.cfg.mode +
                    "' has no head-score matrix");
  Vocab src_vocab = Vocab::from_tokens(model.cfg.src_vocab);
  std::vector<InducedTree> out;
  for (const auto& line : src_lines) {
    TokenizedLine t = tokenize_line(line, codes);
    EncodeValues enc = encode_values(model, src_vocab.encode(t.tokens));
    Tensor phi_hat = collapse_bpe_scores(enc.phi, t.seg.spans);
    out.push_back({t.words, cle_decode(phi_hat)});
  }
  return out;
}

std::vector<GateRecord> gate_report(const Model& model,
                                    const std::vector<std::string>& src_lines,
                                    const BpeCodes* codes) {
  DecoderMode dm = decoder_mode(model.cfg.mode);
  if (dm != DecoderMode::kShared && dm != DecoderMode::kSeparate &&
      dm != DecoderMode::kHardShared)
    throw DataError("gates: model mode '" + model.cfg.mode +
                    "' has no decoder gate");
  Vocab src_vocab = Vocab::from_tokens(model.cfg.src_vocab);
  Vocab tgt_vocab = Vocab::from_tokens(model.cfg.tgt_vocab);

  std::vector<GateRecord> records;
  for (std::size_t s = 0; s < src_lines.size(); ++s) {
    TokenizedLine t = tokenize_line(src_lines[s], codes);
    std::vector<StepTrace> traces;
    std::vector<int> hyp = greedy_translate(model, src_vocab.encode(t.tokens), &traces);

    std::size_t max_step = 0;
    for (std::size_t k = 1; k < traces.size(); ++k)
      if (traces[k].gate_norm > traces[max_step].gate_norm) max_step = k;

    for (std::size_t k = 0; k < traces.size(); ++k) {
      GateRecord r;
      r.sentence = static_cast<int>(s) + 1;
      r.step = static_cast<int>(k) + 1;
      r.token = (k < hyp.size()) ? tgt_vocab.tok(hyp[k]) : "</s>";
      r.gate_norm = traces[k].gate_norm;
      r.is_sentence_max = (k == max_step) && !traces.empty();
      records.push_back(std::move(r));
    }
  }
  return records;
}

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

void write_matrix_tsv(const std::string& path, const Tensor& m,
                      const std::vector<std::string>& row_labels,
                      const std::vector<std::string>& col_labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << "#";
  for (const auto& c : col_labels) out << "\t" << c;
  out << "\n";
  for (int i = 0; i < m.rows(); ++i) {
    out << row_labels[i];
    for (int j = 0; j < m.cols(); ++j) out << "\t" << fmt_double(m.at(i, j));
    out << "\n";
  }
}

}  // namespace

std::vector<std::string> export_attention(const Model& model, const std::string& src_line,
                                          const BpeCodes* codes,
                                          const std::string& out_prefix) {
  Vocab src_vocab = Vocab::from_tokens(model.cfg.src_vocab);
  Vocab tgt_vocab = Vocab::from_tokens(model.cfg.tgt_vocab);
  TokenizedLine t = tokenize_line(src_line, codes);

  std::vector<StepTrace> traces;
  EncodeValues enc;
  std::vector<int> hyp =
      greedy_translate(model, src_vocab.encode(t.tokens), &traces, &enc);

  std::vector<std::string> written;

  if (model.cfg.uses_syntax()) {
    std::string beta_path = out_prefix + ".beta.tsv";
    write_matrix_tsv(beta_path, enc.beta, t.tokens, t.tokens);
    written.push_back(beta_path);

    Tensor phi_hat = collapse_bpe_scores(enc.phi, t.seg.spans);
    std::string phi_path = out_prefix + ".phi_hat.tsv";
    write_matrix_tsv(phi_path, phi_hat, t.words, t.words);
    written.push_back(phi_path);

    Tensor beta_hat = marginals_value(phi_hat).beta;
    std::string bh_path = out_prefix + ".beta_hat.tsv";
    write_matrix_tsv(bh_path, beta_hat, t.words, t.words);
    written.push_back(bh_path);
  }

  // per-step attention rows over the source tokens
  Tensor alpha(std::max<int>(1, static_cast<int>(traces.size())),
               static_cast<int>(t.tokens.size()));
  std::vector<std::string> step_labels;
  for (std::size_t k = 0; k < traces.size(); ++k) {
    for (int j = 0; j < alpha.cols(); ++j) alpha.at(static_cast<int>(k), j) = traces[k].alpha.at(0, j);
    step_labels.push_back(k < hyp.size() ? tgt_vocab.tok(hyp[k]) : "</s>");
  }
  if (traces.empty()) step_labels.push_back("</s>");
  std::string alpha_path = out_prefix + ".alpha.tsv";
  write_matrix_tsv(alpha_path, alpha, step_labels, t.tokens);
  written.push_back(alpha_path);
  return written;
}

Tensor read_matrix_tsv(const std::string& path) {
  std::vector<std::string> lines = read_lines(path);
  if (lines.empty()) throw DataError(path + ": empty matrix file");
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    std::istringstream is(lines[i]);
    std::string label;
    is >> label;
    std::vector<double> row;
    double v;
    while (is >> v) row.push_back(v);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError(path + ": no matrix rows");
  int r = static_cast<int>(rows.size());
  int c = static_cast<int>(rows[0].size());
  Tensor m(r, c);
  for (int i = 0; i < r; ++i) {
    if (static_cast<int>(rows[i].size()) != c)
      throw DataError(path + ": ragged matrix row " + std::to_string(i + 1));
    for (int j = 0; j < c; ++j) m.at(i, j) = rows[i][j];
  }
  return m;
}

}  // namespace sanmt
