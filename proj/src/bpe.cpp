#include "sanmt/bpe.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "sanmt/errors.hpp"
#include "sanmt/vocab.hpp"

namespace sanmt {

namespace {

constexpr const char* kEow = "</w>";

std::size_t utf8_len(unsigned char c) {
  if ((c & 0x80) == 0) return 1;
  if ((c & 0xE0) == 0xC0) return 2;
  if ((c & 0xF0) == 0xE0) return 3;
  if ((c & 0xF8) == 0xF0) return 4;
  return 1;  // stray continuation byte: pass through as a singleton
}

// Splits a word into UTF-8 code points plus the end-of-word marker.
std::vector<std::string> word_symbols(const std::string& word) {
  std::vector<std::string> syms;
  std::size_t i = 0;
  while (i < word.size()) {
    std::size_t len = std::min(utf8_len(word[i]), word.size() - i);
    syms.push_back(word.substr(i, len));
    i += len;
  }
  syms.push_back(kEow);
  return syms;
}

using SymPair = std::pair<std::string, std::string>;

void count_word_pairs(const std::vector<std::string>& syms, long freq,
                      std::map<SymPair, long>& counts,
                      std::map<SymPair, std::set<int>>* index, int word_id) {
  for (std::size_t i = 0; i + 1 < syms.size(); ++i) {
    SymPair p{syms[i], syms[i + 1]};
    counts[p] += freq;
    if (index) (*index)[p].insert(word_id);
  }
}

std::vector<std::string> merge_in_word(const std::vector<std::string>& syms,
                                       const SymPair& pair) {
  std::vector<std::string> out;
  out.reserve(syms.size());
  std::size_t i = 0;
  while (i < syms.size()) {
    if (i + 1 < syms.size() && syms[i] == pair.first && syms[i + 1] == pair.second) {
      out.push_back(pair.first + pair.second);
      i += 2;
    } else {
      out.push_back(syms[i]);
      ++i;
    }
  }
  return out;
}

// Emits subword tokens for a merged symbol sequence using the "@@ "
// continuation convention; the end-of-word marker stays internal.
std::vector<std::string> emit_tokens(std::vector<std::string> syms) {
  if (syms.back() == kEow) {
    syms.pop_back();
  } else {
    std::string& last = syms.back();
    last.resize(last.size() - std::string(kEow).size());
  }
  for (std::size_t i = 0; i + 1 < syms.size(); ++i) syms[i] += "@@";
  return syms;
}

}  // namespace

BpeCodes bpe_learn(const std::vector<std::string>& lines, int merges) {
  std::map<std::string, long> word_freq;
  for (const auto& line : lines)
    for (const auto& w : split_ws(line)) ++word_freq[w];
  if (word_freq.empty()) throw ContractViolation("bpe_learn: empty corpus");

  std::vector<std::vector<std::string>> words;
  std::vector<long> freqs;
  for (const auto& [w, f] : word_freq) {
    words.push_back(word_symbols(w));
    freqs.push_back(f);
  }

  std::map<SymPair, long> counts;
  std::map<SymPair, std::set<int>> index;
  for (std::size_t i = 0; i < words.size(); ++i)
    count_word_pairs(words[i], freqs[i], counts, &index, static_cast<int>(i));

  BpeCodes codes;
  for (int step = 0; step < merges; ++step) {
    // std::map iterates pairs in ascending order, so the first maximum
    // seen is the lexicographically smallest: the tie rule.
    SymPair best;
    long best_count = 0;
    for (const auto& [pair, count] : counts) {
      if (count > best_count) {
        best_count = count;
        best = pair;
      }
    }
    if (best_count < 1) break;  // pair frequencies exhausted
    codes.merges.push_back(best);

    std::set<int> touched = index[best];
    for (int wi : touched) {
      count_word_pairs(words[wi], -freqs[wi], counts, nullptr, 0);
      words[wi] = merge_in_word(words[wi], best);
      count_word_pairs(words[wi], freqs[wi], counts, &index, wi);
    }
    for (auto it = counts.begin(); it != counts.end();) {
      if (it->second <= 0) {
        index.erase(it->first);
        it = counts.erase(it);
      } else {
        ++it;
      }
    }
  }
  return codes;
}

std::pair<std::vector<std::string>, Segmentation> bpe_apply(const std::string& line,
                                                            const BpeCodes& codes) {
  std::vector<std::string> tokens;
  Segmentation seg;
  for (const auto& w : split_ws(line)) {
    std::vector<std::string> syms = word_symbols(w);
    for (const auto& merge : codes.merges) {
      if (syms.size() < 2) break;
      syms = merge_in_word(syms, merge);
    }
    std::vector<std::string> emitted = emit_tokens(std::move(syms));
    int u = static_cast<int>(tokens.size());
    for (auto& t : emitted) tokens.push_back(std::move(t));
    seg.spans.emplace_back(u, static_cast<int>(tokens.size()) - 1);
  }
  return {tokens, seg};
}

std::vector<std::string> bpe_unsplit(const std::vector<std::string>& tokens) {
  std::vector<std::string> words;
  std::string cur;
  for (const auto& t : tokens) {
    if (t.size() >= 2 && t.compare(t.size() - 2, 2, "@@") == 0) {
      cur += t.substr(0, t.size() - 2);
    } else {
      cur += t;
      words.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) words.push_back(cur);  // dangling continuation
  return words;
}

void save_codes(const BpeCodes& codes, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write BPE codes to " + path);
  out << "#version\n";
  for (const auto& [l, r] : codes.merges) out << l << " " << r << "\n";
}

BpeCodes load_codes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read BPE codes from " + path);
  BpeCodes codes;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line_no == 1 && line.rfind("#version", 0) == 0) continue;
    std::istringstream is(line);
    std::string l, r;
    if (!(is >> l >> r))
      throw DataError(path + ":" + std::to_string(line_no) + ": malformed merge pair");
    codes.merges.emplace_back(l, r);
  }
  return codes;
}

}  // namespace sanmt
