#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace sanmt {

// Token inventory with reserved entries. Construction is
// frequency-then-lexicographic so identical corpora yield identical id
// assignments.
struct Vocab {
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;

  std::vector<std::string> id_to_tok;
  std::unordered_map<std::string, int> tok_to_id;

  static Vocab build(const std::vector<std::vector<std::string>>& sentences);
  static Vocab from_tokens(std::vector<std::string> id_to_tok);

  int id(const std::string& tok) const {
    auto it = tok_to_id.find(tok);
    return it == tok_to_id.end() ? kUnk : it->second;
  }
  const std::string& tok(int id) const { return id_to_tok[id]; }
  int size() const { return static_cast<int>(id_to_tok.size()); }

  std::vector<int> encode(const std::vector<std::string>& toks) const;
  std::vector<std::string> decode(const std::vector<int>& ids) const;
};

std::vector<std::string> split_ws(const std::string& line);
std::string join_ws(const std::vector<std::string>& toks);

}  // namespace sanmt
