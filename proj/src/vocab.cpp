#include "sanmt/vocab.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "sanmt/errors.hpp"

namespace sanmt {

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream is(line);
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

std::string join_ws(const std::vector<std::string>& toks) {
  std::string out;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (i) out += ' ';
    out += toks[i];
  }
  return out;
}

Vocab Vocab::build(const std::vector<std::vector<std::string>>& sentences) {
  std::map<std::string, long> freq;
  for (const auto& sent : sentences)
    for (const auto& tok : sent) ++freq[tok];

  std::vector<std::pair<std::string, long>> items(freq.begin(), freq.end());
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocab v;
  v.id_to_tok = {"<pad>", "<bos>", "<eos>", "<unk>"};
  for (auto& [tok, count] : items) v.id_to_tok.push_back(tok);
  for (int i = 0; i < static_cast<int>(v.id_to_tok.size()); ++i)
    v.tok_to_id[v.id_to_tok[i]] = i;
  return v;
}

Vocab Vocab::from_tokens(std::vector<std::string> id_to_tok) {
  Vocab v;
  v.id_to_tok = std::move(id_to_tok);
  for (int i = 0; i < static_cast<int>(v.id_to_tok.size()); ++i)
    v.tok_to_id[v.id_to_tok[i]] = i;
  return v;
}

std::vector<int> Vocab::encode(const std::vector<std::string>& toks) const {
  std::vector<int> out;
  out.reserve(toks.size());
  for (const auto& t : toks) out.push_back(id(t));
  return out;
}

std::vector<std::string> Vocab::decode(const std::vector<int>& ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (int i : ids) {
    if (i < 0 || i >= size()) throw ContractViolation("token id out of vocab range");
    out.push_back(id_to_tok[i]);
  }
  return out;
}

}  // namespace sanmt
