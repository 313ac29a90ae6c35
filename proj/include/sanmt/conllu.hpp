#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sanmt {

// One dependency-annotated sentence: heads are 1-based with 0 marking
// the root, exactly one per sentence.
struct GoldTree {
  std::vector<std::string> forms;
  std::vector<int> heads;
  std::vector<std::string> upos;
};

// Reads CoNLL-U, skipping comments, multiword-token ranges and empty
// nodes. Malformed lines raise a DataError naming the line number.
std::vector<GoldTree> read_conllu(const std::string& path);
std::vector<GoldTree> parse_conllu(std::istream& in, const std::string& name);

void write_conllu_sentence(std::ostream& out, const std::vector<std::string>& forms,
                           const std::vector<int>& heads,
                           const std::vector<std::string>* upos = nullptr);

}  // namespace sanmt
