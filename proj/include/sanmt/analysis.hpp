#pragma once

#include <string>
#include <vector>

#include "sanmt/bpe.hpp"
#include "sanmt/model.hpp"
#include "sanmt/tree_decode.hpp"
#include "sanmt/vocab.hpp"

namespace sanmt {

std::vector<std::string> read_lines(const std::string& path);
void write_lines(const std::string& path, const std::vector<std::string>& lines);

// Tokenization of one raw line for a trained model: applies BPE when
// codes are present, otherwise whitespace tokens with singleton spans.
struct TokenizedLine {
  std::vector<std::string> words;
  std::vector<std::string> tokens;
  Segmentation seg;
};
TokenizedLine tokenize_line(const std::string& line, const BpeCodes* codes);

// Greedy translation of raw source lines to word-level output (subword
// continuations joined back).
std::vector<std::string> translate_corpus(const Model& model,
                                          const std::vector<std::string>& src_lines,
                                          const BpeCodes* codes);

// Word-level dependency trees via score collapsing and maximum spanning
// arborescence decoding.
struct InducedTree {
  std::vector<std::string> words;
  DependencyTree tree;
};
std::vector<InducedTree> induce_trees(const Model& model,
                                      const std::vector<std::string>& src_lines,
                                      const BpeCodes* codes);

// Per generated token: the gate activation norm recorded when the token
// was predicted, plus whether it is the sentence's maximum.
struct GateRecord {
  int sentence = 0;  // 1-based
  int step = 0;      // 1-based decoding step
  std::string token;
  double gate_norm = 0.0;
  bool is_sentence_max = false;
};
std::vector<GateRecord> gate_report(const Model& model,
                                    const std::vector<std::string>& src_lines,
                                    const BpeCodes* codes);

// Writes attention matrices for one sentence as TSV with token headers:
// subword-level beta, word-level collapsed scores and their marginals,
// and the per-step decoder attention rows. Returns the written paths.
std::vector<std::string> export_attention(const Model& model, const std::string& src_line,
                                          const BpeCodes* codes,
                                          const std::string& out_prefix);

// Reads back a matrix TSV with a header row and row labels.
Tensor read_matrix_tsv(const std::string& path);

}  // namespace sanmt
