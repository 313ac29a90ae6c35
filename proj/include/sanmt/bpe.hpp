#pragma once

#include <string>
#include <utility>
#include <vector>

namespace sanmt {

// Learned byte-pair merge rules; application order equals learned order.
struct BpeCodes {
  std::vector<std::pair<std::string, std::string>> merges;
};

// Per original word, the inclusive span [u, v] of subword token indices
// it produced. Spans partition the token sequence in order.
struct Segmentation {
  std::vector<std::pair<int, int>> spans;
};

// Iterative most-frequent adjacent-pair merging over a word frequency
// table with an end-of-word marker. Ties break lexicographically.
BpeCodes bpe_learn(const std::vector<std::string>& lines, int merges);

// Greedy in-order application of the merge rules to one sentence.
// Subword boundaries are marked with the "@@ " continuation convention.
std::pair<std::vector<std::string>, Segmentation> bpe_apply(
    const std::string& line, const BpeCodes& codes);

// Inverse of the "@@ " convention: joins continuation tokens back into
// words.
std::vector<std::string> bpe_unsplit(const std::vector<std::string>& tokens);

void save_codes(const BpeCodes& codes, const std::string& path);
BpeCodes load_codes(const std::string& path);

}  // namespace sanmt
