#include "sanmt/metrics.hpp"

#include <cmath>
#include <map>

#include "sanmt/errors.hpp"
#include "sanmt/rng.hpp"
#include "sanmt/vocab.hpp"

namespace sanmt {

AttachmentReport attachment_accuracy(const std::vector<std::vector<int>>& pred,
                                     const std::vector<GoldTree>& gold) {
  if (pred.size() != gold.size())
    throw DataError("attachment_accuracy: " + std::to_string(pred.size()) +
                    " predicted vs " + std::to_string(gold.size()) + " gold sentences");
  AttachmentReport rep;
  long da_hits = 0, ua_hits = 0;
  for (std::size_t s = 0; s < pred.size(); ++s) {
    const auto& p = pred[s];
    const auto& g = gold[s];
    if (p.size() != g.heads.size())
      throw DataError("attachment_accuracy: sentence " + std::to_string(s + 1) +
                      " has " + std::to_string(p.size()) + " predicted vs " +
                      std::to_string(g.heads.size()) + " gold tokens");
    for (std::size_t j = 0; j < p.size(); ++j) {
      if (j < g.upos.size() && g.upos[j] == "PUNCT") {
        ++rep.excluded;
        continue;
      }
      ++rep.counted;
      int pos = static_cast<int>(j) + 1;
      bool directed = p[j] == g.heads[j];
      // reverse edge: the predicted head's gold head is this token
      bool reverse = p[j] >= 1 && p[j] <= static_cast<int>(g.heads.size()) &&
                     g.heads[p[j] - 1] == pos;
      if (directed) ++da_hits;
      if (directed || reverse) ++ua_hits;
    }
  }
  if (rep.counted > 0) {
    rep.da = static_cast<double>(da_hits) / rep.counted;
    rep.ua = static_cast<double>(ua_hits) / rep.counted;
  }
  return rep;
}

namespace {

constexpr int kMaxOrder = 4;

struct SentenceStats {
  std::array<long, kMaxOrder> correct{};
  std::array<long, kMaxOrder> total{};
  long hyp_len = 0;
  long ref_len = 0;
};

SentenceStats sentence_stats(const std::vector<std::string>& hyp,
                             const std::vector<std::string>& ref) {
  SentenceStats st;
  st.hyp_len = static_cast<long>(hyp.size());
  st.ref_len = static_cast<long>(ref.size());
  for (int order = 1; order <= kMaxOrder; ++order) {
    std::map<std::string, long> ref_ngrams;
    for (std::size_t i = 0; i + order <= ref.size(); ++i) {
      std::string key = ref[i];
      for (int k = 1; k < order; ++k) key += " " + ref[i + k];
      ++ref_ngrams[key];
    }
    std::map<std::string, long> hyp_ngrams;
    for (std::size_t i = 0; i + order <= hyp.size(); ++i) {
      std::string key = hyp[i];
      for (int k = 1; k < order; ++k) key += " " + hyp[i + k];
      ++hyp_ngrams[key];
    }
    for (const auto& [key, count] : hyp_ngrams) {
      st.total[order - 1] += count;
      auto it = ref_ngrams.find(key);
      if (it != ref_ngrams.end())
        st.correct[order - 1] += std::min(count, it->second);
    }
  }
  return st;
}

double bleu_from_totals(const std::array<long, kMaxOrder>& correct,
                        const std::array<long, kMaxOrder>& total, long hyp_len,
                        long ref_len, BleuResult* detail) {
  double log_precision = 0.0;
  bool zero = hyp_len == 0;
  for (int k = 0; k < kMaxOrder; ++k) {
    double p = (total[k] > 0) ? static_cast<double>(correct[k]) / total[k] : 0.0;
    if (detail) detail->precisions[k] = p;
    if (correct[k] == 0 || total[k] == 0) zero = true;
    else log_precision += std::log(p) / kMaxOrder;
  }
  double bp = 1.0;
  if (hyp_len > 0 && hyp_len < ref_len)
    bp = std::exp(1.0 - static_cast<double>(ref_len) / hyp_len);
  if (detail) {
    detail->brevity_penalty = bp;
    detail->hyp_len = hyp_len;
    detail->ref_len = ref_len;
  }
  double score = zero ? 0.0 : 100.0 * bp * std::exp(log_precision);
  if (detail) detail->bleu = score;
  return score;
}

std::vector<SentenceStats> corpus_stats(const std::vector<std::string>& hyp_lines,
                                        const std::vector<std::string>& ref_lines,
                                        const char* who) {
  if (hyp_lines.size() != ref_lines.size())
    throw ContractViolation(std::string(who) + ": " + std::to_string(hyp_lines.size()) +
                            " hypotheses vs " + std::to_string(ref_lines.size()) +
                            " references");
  std::vector<SentenceStats> stats;
  stats.reserve(hyp_lines.size());
  for (std::size_t i = 0; i < hyp_lines.size(); ++i)
    stats.push_back(sentence_stats(split_ws(hyp_lines[i]), split_ws(ref_lines[i])));
  return stats;
}

double bleu_over_indices(const std::vector<SentenceStats>& stats,
                         const std::vector<int>& idx) {
  std::array<long, kMaxOrder> correct{}, total{};
  long hyp_len = 0, ref_len = 0;
  for (int i : idx) {
    for (int k = 0; k < kMaxOrder; ++k) {
      correct[k] += stats[i].correct[k];
      total[k] += stats[i].total[k];
    }
    hyp_len += stats[i].hyp_len;
    ref_len += stats[i].ref_len;
  }
  return bleu_from_totals(correct, total, hyp_len, ref_len, nullptr);
}

}  // namespace

BleuResult bleu(const std::vector<std::string>& hyp_lines,
                const std::vector<std::string>& ref_lines) {
  std::vector<SentenceStats> stats = corpus_stats(hyp_lines, ref_lines, "bleu");
  std::array<long, kMaxOrder> correct{}, total{};
  long hyp_len = 0, ref_len = 0;
  for (const auto& st : stats) {
    for (int k = 0; k < kMaxOrder; ++k) {
      correct[k] += st.correct[k];
      total[k] += st.total[k];
    }
    hyp_len += st.hyp_len;
    ref_len += st.ref_len;
  }
  BleuResult res;
  bleu_from_totals(correct, total, hyp_len, ref_len, &res);
  return res;
}

std::pair<double, double> bootstrap_significance(const std::vector<std::string>& hyp_a,
                                                 const std::vector<std::string>& hyp_b,
                                                 const std::vector<std::string>& refs,
                                                 int resamples, std::uint64_t seed) {
  std::vector<SentenceStats> stats_a = corpus_stats(hyp_a, refs, "bootstrap_significance");
  std::vector<SentenceStats> stats_b = corpus_stats(hyp_b, refs, "bootstrap_significance");
  int n = static_cast<int>(refs.size());
  if (n == 0) throw ContractViolation("bootstrap_significance: empty corpus");

  Rng rng(seed);
  long a_le_b = 0, b_le_a = 0;
  std::vector<int> idx(n);
  for (int r = 0; r < resamples; ++r) {
    for (int i = 0; i < n; ++i) idx[i] = rng.uniform_int(0, n - 1);
    double ba = bleu_over_indices(stats_a, idx);
    double bb = bleu_over_indices(stats_b, idx);
    if (ba <= bb) ++a_le_b;
    if (bb <= ba) ++b_le_a;
  }
  return {static_cast<double>(a_le_b) / resamples,
          static_cast<double>(b_le_a) / resamples};
}

}  // namespace sanmt
