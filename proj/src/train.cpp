#include "sanmt/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "sanmt/errors.hpp"

namespace sanmt {

BatchLoss batch_nll(BoundModel& bm, const ParallelCorpus& data,
                    const std::vector<int>& batch_indices, bool train, Rng* dropout_rng) {
  if (batch_indices.empty()) throw ContractViolation("batch_nll: empty batch");
  Tape& tape = *bm.tape;
  BatchLoss out;
  int total = -1;
  for (int idx : batch_indices) {
    SentenceLoss s = sentence_nll(bm, data.src[idx], data.tgt[idx], train, dropout_rng);
    out.tokens += s.n_tokens;
    out.max_abs_phi = std::max(out.max_abs_phi, s.max_abs_phi);
    total = (total < 0) ? s.loss_sum : tape.add(total, s.loss_sum);
  }
  out.loss = tape.scale(total, 1.0 / static_cast<double>(out.tokens));
  return out;
}

double corpus_nll(const Model& model, const ParallelCorpus& data, int batch_size) {
  if (data.size() == 0) throw ContractViolation("corpus_nll: empty corpus");
  double loss_sum = 0.0;
  long tokens = 0;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    Tape tape;
    BoundModel bm = bind(tape, model, false);
    std::vector<int> batch;
    for (std::size_t i = start; i < std::min(data.size(), start + batch_size); ++i)
      batch.push_back(static_cast<int>(i));
    BatchLoss b = batch_nll(bm, data, batch, false, nullptr);
    loss_sum += tape.val(b.loss).item() * static_cast<double>(b.tokens);
    tokens += b.tokens;
  }
  return loss_sum / static_cast<double>(tokens);
}

std::vector<std::vector<int>> make_batches(const std::vector<int>& src_lengths,
                                           int batch_size, int window, Rng& rng) {
  int n = static_cast<int>(src_lengths.size());
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  rng.shuffle(order);
  for (int start = 0; start < n; start += window) {
    auto first = order.begin() + start;
    auto last = order.begin() + std::min(n, start + window);
    std::stable_sort(first, last,
                     [&](int a, int b) { return src_lengths[a] < src_lengths[b]; });
  }
  std::vector<std::vector<int>> batches;
  for (int start = 0; start < n; start += batch_size) {
    batches.emplace_back(order.begin() + start,
                         order.begin() + std::min(n, start + batch_size));
  }
  return batches;
}

namespace {

void adam_update(Model& model, AdamState& opt,
                 const std::map<std::string, Tensor>& grads, const TrainConfig& cfg,
                 double lr) {
  opt.step += 1;
  double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(opt.step));
  double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(opt.step));
  for (auto& [name, param] : model.params) {
    const Tensor& g = grads.at(name);
    Tensor& m = opt.m.at(name);
    Tensor& v = opt.v.at(name);
    for (std::size_t i = 0; i < param.data.size(); ++i) {
      double gi = g.data[i];
      m.data[i] = cfg.adam_beta1 * m.data[i] + (1.0 - cfg.adam_beta1) * gi;
      v.data[i] = cfg.adam_beta2 * v.data[i] + (1.0 - cfg.adam_beta2) * gi * gi;
      double mhat = m.data[i] / bc1;
      double vhat = v.data[i] / bc2;
      param.data[i] -= lr * mhat / (std::sqrt(vhat) + cfg.adam_eps);
    }
  }
}

// clipped = g * min(1, clip / ||g||): direction is preserved
double clip_gradients(std::map<std::string, Tensor>& grads, double clip_norm) {
  double sq = 0.0;
  for (const auto& [name, g] : grads)
    for (double v : g.data) sq += v * v;
  double norm = std::sqrt(sq);
  if (clip_norm > 0.0 && norm > clip_norm) {
    double s = clip_norm / norm;
    for (auto& [name, g] : grads)
      for (double& v : g.data) v *= s;
  }
  return norm;
}

std::string format_log_row(long step, double train_loss, double valid_ppl, double lr) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%ld\t%.6f\t%.6f\t%.8g", step, train_loss, valid_ppl, lr);
  return buf;
}

}  // namespace

TrainResult train(Model& model, const ParallelCorpus& train_data,
                  const ParallelCorpus& valid_data, const TrainConfig& cfg,
                  const std::string& ckpt_path, std::ostream* log) {
  if (train_data.size() == 0) throw ContractViolation("train: empty training corpus");
  if (valid_data.size() == 0) throw ContractViolation("train: empty validation corpus");

  Rng batch_rng = Rng(cfg.seed).fork(1);
  Rng dropout_rng = Rng(cfg.seed).fork(2);

  AdamState opt;
  for (const auto& [name, t] : model.params) {
    opt.m.emplace(name, Tensor(t.rows(), t.cols()));
    opt.v.emplace(name, Tensor(t.rows(), t.cols()));
  }

  std::vector<int> lengths;
  for (const auto& s : train_data.src) lengths.push_back(static_cast<int>(s.size()));

  TrainResult res;
  double lr = cfg.lr;
  double best_ppl = -1.0;
  bool saved = false;
  double loss_accum = 0.0;
  long loss_count = 0;
  bool stop = false;

  auto evaluate = [&]() {
    double ppl = perplexity(corpus_nll(model, valid_data, cfg.batch_size));
    double mean_train = loss_count > 0 ? loss_accum / loss_count : 0.0;
    if (log) *log << format_log_row(res.updates, mean_train, ppl, lr) << "\n";
    loss_accum = 0.0;
    loss_count = 0;
    if (best_ppl < 0.0 || ppl < best_ppl) {
      best_ppl = ppl;
      save_checkpoint(model, &opt, res.updates, best_ppl, ckpt_path);
      saved = true;
    } else if (ppl > best_ppl) {
      lr *= cfg.lr_decay;
      res.decays += 1;
      if (res.decays >= cfg.max_decays) stop = true;
    }
  };

  while (!stop) {
    auto batches = make_batches(lengths, cfg.batch_size, cfg.sort_window, batch_rng);
    for (const auto& batch : batches) {
      Tape tape;
      BoundModel bm = bind(tape, model, true);
      BatchLoss b = batch_nll(bm, train_data, batch, true, &dropout_rng);
      double loss_val = tape.val(b.loss).item();
      if (!std::isfinite(loss_val))
        throw NumericError("non-finite loss at update " + std::to_string(res.updates + 1) +
                           " (batch of " + std::to_string(batch.size()) +
                           " sentences, max |phi| = " + std::to_string(b.max_abs_phi) + ")");

      std::vector<Tensor> grads = tape.backward(b.loss);
      std::map<std::string, Tensor> by_name;
      for (const auto& [name, id] : bm.ids) by_name.emplace(name, std::move(grads[id]));
      clip_gradients(by_name, cfg.clip_norm);
      adam_update(model, opt, by_name, cfg, lr);

      res.updates += 1;
      loss_accum += loss_val;
      loss_count += 1;

      if (cfg.eval_interval > 0 && res.updates % cfg.eval_interval == 0) evaluate();
      if (cfg.max_updates > 0 && res.updates >= cfg.max_updates) stop = true;
      if (stop) break;
    }
  }

  if (!saved) evaluate();  // at least one checkpoint and log row
  res.best_valid_ppl = best_ppl;
  return res;
}

}  // namespace sanmt
