#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "sanmt/checkpoint.hpp"
#include "sanmt/model.hpp"
#include "sanmt/rng.hpp"

namespace sanmt {

struct ParallelCorpus {
  std::vector<std::vector<int>> src;
  std::vector<std::vector<int>> tgt;
  std::size_t size() const { return src.size(); }
};

struct TrainConfig {
  int batch_size = 32;
  double lr = 0.001;
  double lr_decay = 0.5;
  int max_decays = 5;
  int eval_interval = 500;
  double init_range = 0.04;
  double dropout = 0.3;
  double clip_norm = 5.0;
  std::uint64_t seed = 1;
  int max_updates = 0;  // 0: run until the decay schedule stops
  int sort_window = 1000;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
};

// Mean negative log likelihood per non-padded gold token, teacher
// forced. Gradients flow when `train` is set.
struct BatchLoss {
  int loss = -1;  // scalar node: mean over gold tokens
  long tokens = 0;
  double max_abs_phi = 0.0;
};
BatchLoss batch_nll(BoundModel& bm, const ParallelCorpus& data,
                    const std::vector<int>& batch_indices, bool train, Rng* dropout_rng);

// Teacher-forced mean NLL over a whole corpus (evaluation mode).
double corpus_nll(const Model& model, const ParallelCorpus& data, int batch_size);

inline double perplexity(double mean_nll) { return std::exp(mean_nll); }

// Shuffles indices, sorts by source length inside fixed windows, then
// chunks; deterministic given the rng state.
std::vector<std::vector<int>> make_batches(const std::vector<int>& src_lengths,
                                           int batch_size, int window, Rng& rng);

struct TrainResult {
  double best_valid_ppl = -1.0;
  long updates = 0;
  int decays = 0;
};

// Adam with perplexity-driven learning-rate decay: evaluate every
// eval_interval updates, halve the rate whenever validation perplexity
// worsens, stop after max_decays halvings. The best checkpoint is kept
// at ckpt_path. Log rows: step \t train_loss \t valid_ppl \t lr.
TrainResult train(Model& model, const ParallelCorpus& train_data,
                  const ParallelCorpus& valid_data, const TrainConfig& cfg,
                  const std::string& ckpt_path, std::ostream* log);

}  // namespace sanmt
