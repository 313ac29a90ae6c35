#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sanmt/conllu.hpp"

namespace sanmt {

struct AttachmentReport {
  double da = 0.0;
  double ua = 0.0;
  long counted = 0;
  long excluded = 0;  // punctuation tokens (gold UPOS == PUNCT)
};

// Directed / undirected attachment accuracy. Heads are 1-based with 0
// for the root. A token is undirected-correct when its predicted head is
// its gold head or one of its gold children; punctuation is excluded as
// a dependent only.
AttachmentReport attachment_accuracy(const std::vector<std::vector<int>>& pred,
                                     const std::vector<GoldTree>& gold);

struct BleuResult {
  double bleu = 0.0;  // 100-scaled
  std::array<double, 4> precisions{};
  double brevity_penalty = 1.0;
  long hyp_len = 0;
  long ref_len = 0;
};

// Corpus-level 4-gram BLEU with uniform weights, clipped counts, and the
// brevity penalty; no smoothing, so any empty n-gram match bucket gives
// zero.
BleuResult bleu(const std::vector<std::string>& hyp_lines,
                const std::vector<std::string>& ref_lines);

// Paired bootstrap over sentence indices. Returns the fraction of
// resamples with BLEU(A) <= BLEU(B) and the reverse, deterministic given
// the seed.
std::pair<double, double> bootstrap_significance(const std::vector<std::string>& hyp_a,
                                                 const std::vector<std::string>& hyp_b,
                                                 const std::vector<std::string>& refs,
                                                 int resamples, std::uint64_t seed);

}  // namespace sanmt
