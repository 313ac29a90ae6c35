#include "sanmt/model.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "sanmt/matrix_tree.hpp"
#include "sanmt/vocab.hpp"

namespace sanmt {

using json = nlohmann::json;

AttnMode attention_mode(const std::string& mode) {
  if (mode == "baseline") return AttnMode::kNone;
  if (mode == "fa-shared" || mode == "fa-separate") return AttnMode::kFlat;
  if (mode == "sa-shared" || mode == "sa-separate" || mode == "sa-1set")
    return AttnMode::kStructured;
  if (mode == "sa-hard") return AttnMode::kStructuredHard;
  throw ContractViolation("unknown model mode: " + mode);
}

DecoderMode decoder_mode(const std::string& mode) {
  if (mode == "baseline") return DecoderMode::kBaseline;
  if (mode == "fa-shared" || mode == "sa-shared") return DecoderMode::kShared;
  if (mode == "fa-separate" || mode == "sa-separate") return DecoderMode::kSeparate;
  if (mode == "sa-1set") return DecoderMode::kOneSet;
  if (mode == "sa-hard") return DecoderMode::kHardShared;
  throw ContractViolation("unknown model mode: " + mode);
}

std::string ModelConfig::to_json() const {
  json j;
  j["mode"] = mode;
  j["embed_dim"] = embed_dim;
  j["layers"] = layers;
  j["dropout"] = dropout;
  j["max_len"] = max_len;
  j["src_vocab"] = src_vocab;
  j["tgt_vocab"] = tgt_vocab;
  return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  json j = json::parse(text);
  ModelConfig c;
  c.mode = j.at("mode").get<std::string>();
  c.embed_dim = j.at("embed_dim").get<int>();
  c.layers = j.at("layers").get<int>();
  c.dropout = j.at("dropout").get<double>();
  c.max_len = j.at("max_len").get<int>();
  c.src_vocab = j.at("src_vocab").get<std::vector<std::string>>();
  c.tgt_vocab = j.at("tgt_vocab").get<std::vector<std::string>>();
  return c;
}

std::vector<std::pair<std::string, std::vector<int>>> Model::param_spec(
    const ModelConfig& cfg) {
  if (cfg.embed_dim % 2 != 0)
    throw ContractViolation("embed_dim must be even (split across directions)");
  if (cfg.dropout < 0.0 || cfg.dropout >= 1.0)
    throw ContractViolation("dropout must be in [0, 1)");
  int d = cfg.embed_dim;
  int h = d / 2;  // per-direction encoder width
  int vs = static_cast<int>(cfg.src_vocab.size());
  int vt = static_cast<int>(cfg.tgt_vocab.size());
  DecoderMode dm = decoder_mode(cfg.mode);

  std::vector<std::pair<std::string, std::vector<int>>> spec;
  spec.emplace_back("src_embed", std::vector<int>{vs, d});
  spec.emplace_back("tgt_embed", std::vector<int>{vt, d});
  spec.emplace_back("out_bias", std::vector<int>{vt, 1});
  for (int l = 0; l < cfg.layers; ++l) {
    for (const char* dir : {"fwd", "bwd"}) {
      std::string base = "enc.l" + std::to_string(l) + "." + dir + ".";
      spec.emplace_back(base + "w_ih", std::vector<int>{4 * h, d});
      spec.emplace_back(base + "w_hh", std::vector<int>{4 * h, h});
      spec.emplace_back(base + "bias", std::vector<int>{4 * h, 1});
    }
  }
  if (cfg.uses_syntax()) {
    spec.emplace_back("enc.wq", std::vector<int>{d, d});
    spec.emplace_back("enc.wk", std::vector<int>{d, d});
    spec.emplace_back("enc.wv", std::vector<int>{d, d});
  }
  if (dm == DecoderMode::kOneSet)
    spec.emplace_back("enc.gate", std::vector<int>{d, d});
  for (int l = 0; l < cfg.layers; ++l) {
    std::string base = "dec.l" + std::to_string(l) + ".";
    int in = (l == 0) ? 2 * d : d;  // previous word embedding + input feed
    spec.emplace_back(base + "w_ih", std::vector<int>{4 * d, in});
    spec.emplace_back(base + "w_hh", std::vector<int>{4 * d, d});
    spec.emplace_back(base + "bias", std::vector<int>{4 * d, 1});
    spec.emplace_back("dec.init_h.l" + std::to_string(l), std::vector<int>{d, d});
    spec.emplace_back("dec.init_c.l" + std::to_string(l), std::vector<int>{d, d});
  }
  spec.emplace_back("dec.attn", std::vector<int>{d, d});
  if (dm == DecoderMode::kSeparate)
    spec.emplace_back("dec.attn_syn", std::vector<int>{d, d});
  if (dm == DecoderMode::kShared || dm == DecoderMode::kSeparate ||
      dm == DecoderMode::kHardShared)
    spec.emplace_back("dec.gate", std::vector<int>{d, d});
  int ff_in = (dm == DecoderMode::kBaseline || dm == DecoderMode::kOneSet) ? 2 * d : 3 * d;
  spec.emplace_back("dec.ff", std::vector<int>{d, ff_in});
  spec.emplace_back("dec.ff_bias", std::vector<int>{d, 1});
  return spec;
}

Model Model::init(ModelConfig cfg, Rng& rng, double init_range) {
  Model m;
  m.cfg = std::move(cfg);
  for (const auto& [name, shape] : param_spec(m.cfg)) {
    Tensor t(shape[0], shape[1]);
    for (double& v : t.data) v = rng.uniform(-init_range, init_range);
    t.requires_grad = true;
    m.params.emplace(name, std::move(t));
  }
  return m;
}

int BoundModel::id(const std::string& name) const {
  auto it = ids.find(name);
  if (it == ids.end()) throw ContractViolation("unbound parameter: " + name);
  return it->second;
}

BoundModel bind(Tape& tape, const Model& model, bool with_grad) {
  BoundModel bm;
  bm.model = &model;
  bm.tape = &tape;
  for (const auto& [name, tensor] : model.params) {
    Tensor t = tensor;
    t.requires_grad = with_grad;
    bm.ids[name] = tape.leaf(std::move(t));
  }
  return bm;
}

namespace {

Tensor sample_dropout_mask(int rows, int cols, double rate, Rng& rng) {
  Tensor mask(rows, cols);
  double keep_scale = 1.0 / (1.0 - rate);
  for (double& v : mask.data) v = rng.uniform() < rate ? 0.0 : keep_scale;
  return mask;
}

int maybe_dropout(Tape& tape, int x, double rate, bool train, Rng* rng) {
  if (!train || rate <= 0.0) return x;
  if (!rng) throw ContractViolation("training forward pass needs a dropout rng");
  const Tensor& v = tape.val(x);
  return tape.dropout(x, sample_dropout_mask(v.rows(), v.cols(), rate, *rng));
}

struct LstmCell {
  int w_ih, w_hh, bias, hidden;
};

std::pair<int, int> lstm_step(Tape& tape, const LstmCell& cell, int x, int h_prev,
                              int c_prev) {
  int gates = tape.add(tape.add(tape.matmul(cell.w_ih, x), tape.matmul(cell.w_hh, h_prev)),
                       cell.bias);
  int hd = cell.hidden;
  int i_gate = tape.sigmoid(tape.slice(gates, 0, hd, 0, 1));
  int f_gate = tape.sigmoid(tape.slice(gates, hd, 2 * hd, 0, 1));
  int g_cand = tape.tanh(tape.slice(gates, 2 * hd, 3 * hd, 0, 1));
  int o_gate = tape.sigmoid(tape.slice(gates, 3 * hd, 4 * hd, 0, 1));
  int c = tape.add(tape.mul(f_gate, c_prev), tape.mul(i_gate, g_cand));
  int h = tape.mul(o_gate, tape.tanh(c));
  return {h, c};
}

}  // namespace

EncodeResult encode(BoundModel& bm, const std::vector<int>& tokens, bool train,
                    Rng* dropout_rng) {
  Tape& tape = *bm.tape;
  const ModelConfig& cfg = bm.cfg();
  int n = static_cast<int>(tokens.size());
  if (n < 1) throw ContractViolation("encode: empty sentence");
  if (n > cfg.max_len)
    throw ContractViolation("encode: sentence longer than max_len (" +
                            std::to_string(n) + " > " + std::to_string(cfg.max_len) + ")");
  int d = cfg.embed_dim;
  int h = d / 2;

  EncodeResult out;
  out.n = n;

  int x = tape.embedding_lookup(bm.id("src_embed"), tokens);
  x = maybe_dropout(tape, x, cfg.dropout, train, dropout_rng);

  for (int l = 0; l < cfg.layers; ++l) {
    if (l > 0) x = maybe_dropout(tape, x, cfg.dropout, train, dropout_rng);
    std::string base = "enc.l" + std::to_string(l) + ".";
    LstmCell fwd{bm.id(base + "fwd.w_ih"), bm.id(base + "fwd.w_hh"),
                 bm.id(base + "fwd.bias"), h};
    LstmCell bwd{bm.id(base + "bwd.w_ih"), bm.id(base + "bwd.w_hh"),
                 bm.id(base + "bwd.bias"), h};

    std::vector<int> cols(n);
    for (int t = 0; t < n; ++t) cols[t] = tape.slice(x, 0, d, t, t + 1);

    int h_f = tape.constant(Tensor(h, 1));
    int c_f = tape.constant(Tensor(h, 1));
    std::vector<int> outs_f(n);
    for (int t = 0; t < n; ++t) {
      std::tie(h_f, c_f) = lstm_step(tape, fwd, cols[t], h_f, c_f);
      outs_f[t] = h_f;
    }
    int h_b = tape.constant(Tensor(h, 1));
    int c_b = tape.constant(Tensor(h, 1));
    std::vector<int> outs_b(n);
    for (int t = n - 1; t >= 0; --t) {
      std::tie(h_b, c_b) = lstm_step(tape, bwd, cols[t], h_b, c_b);
      outs_b[t] = h_b;
    }
    int fwd_mat = tape.concat_cols(outs_f);
    int bwd_mat = tape.concat_cols(outs_b);
    x = tape.concat_rows({fwd_mat, bwd_mat});

    out.final_h_fwd.push_back(h_f);
    out.final_c_fwd.push_back(c_f);
    out.final_h_bwd.push_back(h_b);
    out.final_c_bwd.push_back(c_b);
  }
  out.S = x;

  AttnMode am = attention_mode(cfg.mode);
  if (am != AttnMode::kNone) {
    int sq = tape.matmul(bm.id("enc.wq"), out.S);
    int sk = tape.matmul(bm.id("enc.wk"), out.S);
    out.S_v = tape.matmul(bm.id("enc.wv"), out.S);
    out.phi = tape.scale(tape.matmul(tape.transpose(sq), sk), 1.0 / std::sqrt(double(d)));
    if (am == AttnMode::kFlat) {
      out.beta = tape.col_softmax(out.phi);
      out.beta_soft = out.beta;
    } else {
      MarginalNodes m = marginals(tape, out.phi);
      out.log_partition = m.log_partition;
      out.beta_soft = m.beta;
      out.beta = (am == AttnMode::kStructuredHard) ? tape.hard_select(m.beta) : m.beta;
    }
    out.M = tape.matmul(out.S_v, out.beta);
  }
  return out;
}

EncodeValues encode_values(const Model& model, const std::vector<int>& tokens) {
  Tape tape;
  BoundModel bm = bind(tape, model, false);
  EncodeResult enc = encode(bm, tokens, false, nullptr);
  EncodeValues v;
  v.n = enc.n;
  v.S = tape.val(enc.S);
  if (enc.phi >= 0) v.phi = tape.val(enc.phi);
  if (enc.beta >= 0) v.beta = tape.val(enc.beta);
  if (enc.beta_soft >= 0) v.beta_soft = tape.val(enc.beta_soft);
  if (enc.M >= 0) v.M = tape.val(enc.M);
  if (enc.log_partition >= 0) v.log_partition = tape.val(enc.log_partition).item();
  return v;
}

HeadDistribution head_distribution(const EncodeValues& enc, int j) {
  if (j < 1 || j > enc.n)
    throw ContractViolation("head_distribution: position out of range");
  if (enc.beta.size() == 0)
    throw ContractViolation("head_distribution: model has no attention matrix");
  HeadDistribution hd;
  int col = j - 1;
  hd.p_root = enc.beta.at(col, col);
  hd.p_head.resize(enc.n);
  for (int i = 0; i < enc.n; ++i) hd.p_head[i] = enc.beta.at(i, col);
  return hd;
}

AttendResult attend(Tape& tape, int h, int s, int w_a, int true_len) {
  const Tensor& sv = tape.val(s);
  int n = sv.cols();
  if (true_len < 1) throw ContractViolation("attend: all source positions masked");
  if (true_len > n) throw ContractViolation("attend: true_len exceeds source length");
  int logits = tape.matmul(tape.transpose(h), tape.matmul(w_a, s));  // 1 x n
  if (true_len < n) {
    // -1e30 underflows to exactly zero after the softmax shift
    Tensor mask(1, n);
    for (int j = true_len; j < n; ++j) mask.at(0, j) = -1e30;
    logits = tape.add(logits, tape.constant(mask));
  }
  AttendResult r;
  r.alpha = tape.row_softmax(logits);
  r.context = tape.matmul(s, tape.transpose(r.alpha));
  return r;
}

int syntactic_vector_shared(Tape& tape, int m, int alpha) {
  return tape.matmul(m, tape.transpose(alpha));
}

SeparateAttnResult syntactic_vector_separate(Tape& tape, int h, int m, int w_m,
                                             int true_len) {
  AttendResult a = attend(tape, h, m, w_m, true_len);
  return {a.alpha, a.context};
}

GateResult gate_syntax(Tape& tape, int d_syn, int h, int w_g) {
  GateResult r;
  r.gate = tape.sigmoid(tape.matmul(w_g, h));
  r.d_hat = tape.mul(d_syn, r.gate);
  r.gate_norm = tape.l2_norm(r.gate);
  return r;
}

int fuse_1set(Tape& tape, int s, int m, int w_g) {
  int gate = tape.sigmoid(tape.matmul(w_g, s));
  return tape.add(s, tape.mul(gate, m));
}

DecoderInputs decoder_inputs(BoundModel& bm, const EncodeResult& enc) {
  DecoderInputs in;
  in.n = enc.n;
  in.true_len = enc.n;
  DecoderMode dm = decoder_mode(bm.cfg().mode);
  if (dm == DecoderMode::kOneSet) {
    in.S_attend = fuse_1set(*bm.tape, enc.S, enc.M, bm.id("enc.gate"));
    in.M = -1;
  } else {
    in.S_attend = enc.S;
    in.M = (dm == DecoderMode::kBaseline) ? -1 : enc.M;
  }
  return in;
}

DecoderState decoder_init(BoundModel& bm, const EncodeResult& enc) {
  Tape& tape = *bm.tape;
  const ModelConfig& cfg = bm.cfg();
  DecoderState st;
  for (int l = 0; l < cfg.layers; ++l) {
    int h0 = tape.matmul(bm.id("dec.init_h.l" + std::to_string(l)),
                         tape.concat_rows({enc.final_h_fwd[l], enc.final_h_bwd[l]}));
    int c0 = tape.matmul(bm.id("dec.init_c.l" + std::to_string(l)),
                         tape.concat_rows({enc.final_c_fwd[l], enc.final_c_bwd[l]}));
    st.layers.emplace_back(h0, c0);
  }
  st.u_prev = tape.constant(Tensor(cfg.embed_dim, 1));
  st.t = 0;
  return st;
}

StepResult decode_step(BoundModel& bm, int y_prev, DecoderState& state,
                       const DecoderInputs& in, bool train, Rng* dropout_rng) {
  Tape& tape = *bm.tape;
  const ModelConfig& cfg = bm.cfg();
  DecoderMode dm = decoder_mode(cfg.mode);
  int d = cfg.embed_dim;

  int emb = tape.embedding_lookup(bm.id("tgt_embed"), {y_prev});
  emb = maybe_dropout(tape, emb, cfg.dropout, train, dropout_rng);
  int x = tape.concat_rows({emb, state.u_prev});

  for (int l = 0; l < cfg.layers; ++l) {
    if (l > 0) x = maybe_dropout(tape, x, cfg.dropout, train, dropout_rng);
    std::string base = "dec.l" + std::to_string(l) + ".";
    LstmCell cell{bm.id(base + "w_ih"), bm.id(base + "w_hh"), bm.id(base + "bias"), d};
    auto [h, c] = lstm_step(tape, cell, x, state.layers[l].first, state.layers[l].second);
    state.layers[l] = {h, c};
    x = h;
  }
  int h_top = x;

  AttendResult att = attend(tape, h_top, in.S_attend, bm.id("dec.attn"), in.true_len);

  StepResult res;
  res.trace.alpha = tape.val(att.alpha);
  res.trace.context = tape.val(att.context);

  std::vector<int> ff_parts = {h_top, att.context};
  if (dm == DecoderMode::kShared || dm == DecoderMode::kHardShared ||
      dm == DecoderMode::kSeparate) {
    int d_syn;
    if (dm == DecoderMode::kSeparate) {
      SeparateAttnResult sep =
          syntactic_vector_separate(tape, h_top, in.M, bm.id("dec.attn_syn"), in.true_len);
      d_syn = sep.d_syn;
      res.trace.gamma = tape.val(sep.gamma);
    } else {
      d_syn = syntactic_vector_shared(tape, in.M, att.alpha);
    }
    GateResult gate = gate_syntax(tape, d_syn, h_top, bm.id("dec.gate"));
    ff_parts.push_back(gate.d_hat);
    res.trace.d_syn = tape.val(d_syn);
    res.trace.gate = tape.val(gate.gate);
    res.trace.gate_norm = tape.val(gate.gate_norm).item();
  }

  int u = tape.tanh(tape.add(tape.matmul(bm.id("dec.ff"), tape.concat_rows(ff_parts)),
                             bm.id("dec.ff_bias")));
  state.u_prev = u;
  state.t += 1;

  // output weights are tied to the target embeddings
  int logits = tape.add(tape.matmul(bm.id("tgt_embed"), u), bm.id("out_bias"));
  res.dist = tape.col_softmax(logits);
  res.log_probs = tape.log(res.dist);
  return res;
}

SentenceLoss sentence_nll(BoundModel& bm, const std::vector<int>& src,
                          const std::vector<int>& tgt, bool train, Rng* dropout_rng) {
  Tape& tape = *bm.tape;
  EncodeResult enc = encode(bm, src, train, dropout_rng);
  DecoderInputs in = decoder_inputs(bm, enc);
  DecoderState st = decoder_init(bm, enc);

  SentenceLoss out;
  if (enc.phi >= 0) out.max_abs_phi = tape.val(enc.phi).max_abs();

  std::vector<int> inputs = {Vocab::kBos};
  inputs.insert(inputs.end(), tgt.begin(), tgt.end());
  std::vector<int> golds = tgt;
  golds.push_back(Vocab::kEos);

  int loss = -1;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    StepResult r = decode_step(bm, inputs[t], st, in, train, dropout_rng);
    int nll = tape.scale(tape.slice(r.log_probs, golds[t], golds[t] + 1, 0, 1), -1.0);
    loss = (loss < 0) ? nll : tape.add(loss, nll);
  }
  out.loss_sum = loss;
  out.n_tokens = static_cast<int>(golds.size());
  return out;
}

std::vector<int> greedy_translate(const Model& model, const std::vector<int>& src,
                                  std::vector<StepTrace>* traces,
                                  EncodeValues* enc_values) {
  Tape tape;
  BoundModel bm = bind(tape, model, false);
  EncodeResult enc = encode(bm, src, false, nullptr);
  DecoderInputs in = decoder_inputs(bm, enc);
  DecoderState st = decoder_init(bm, enc);

  if (enc_values) {
    enc_values->n = enc.n;
    enc_values->S = tape.val(enc.S);
    if (enc.phi >= 0) enc_values->phi = tape.val(enc.phi);
    if (enc.beta >= 0) enc_values->beta = tape.val(enc.beta);
    if (enc.beta_soft >= 0) enc_values->beta_soft = tape.val(enc.beta_soft);
    if (enc.M >= 0) enc_values->M = tape.val(enc.M);
    if (enc.log_partition >= 0)
      enc_values->log_partition = tape.val(enc.log_partition).item();
  }

  std::vector<int> out;
  int y = Vocab::kBos;
  int max_steps = 2 * static_cast<int>(src.size());
  for (int t = 0; t < max_steps; ++t) {
    StepResult r = decode_step(bm, y, st, in, false, nullptr);
    const Tensor& dist = tape.val(r.dist);
    int best = 0;
    for (int i = 1; i < dist.rows(); ++i)
      if (dist.at(i, 0) > dist.at(best, 0)) best = i;
    if (traces) traces->push_back(r.trace);
    if (best == Vocab::kEos) break;
    out.push_back(best);
    y = best;
  }
  return out;
}

}  // namespace sanmt
