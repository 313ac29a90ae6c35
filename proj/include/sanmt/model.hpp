#pragma once

#include <map>
#include <string>
#include <vector>

#include "sanmt/rng.hpp"
#include "sanmt/tape.hpp"
#include "sanmt/tensor.hpp"

namespace sanmt {

// Model flavors, one per results-table row. The encoder side picks how
// attention probabilities over head words are computed; the decoder side
// picks how the syntactic annotations reach the output.
inline const std::vector<std::string>& model_modes() {
  static const std::vector<std::string> kModes = {
      "baseline",  "fa-shared", "fa-separate", "sa-shared",
      "sa-separate", "sa-1set",   "sa-hard"};
  return kModes;
}

enum class AttnMode { kNone, kStructured, kFlat, kStructuredHard };
enum class DecoderMode { kBaseline, kShared, kSeparate, kOneSet, kHardShared };

AttnMode attention_mode(const std::string& mode);
DecoderMode decoder_mode(const std::string& mode);

struct ModelConfig {
  std::string mode = "baseline";
  int embed_dim = 64;  // d: embedding, hidden, and annotation width
  int layers = 1;
  double dropout = 0.3;
  int max_len = 400;
  std::vector<std::string> src_vocab;
  std::vector<std::string> tgt_vocab;

  bool uses_syntax() const { return attention_mode(mode) != AttnMode::kNone; }
  std::string to_json() const;
  static ModelConfig from_json(const std::string& text);
};

struct Model {
  ModelConfig cfg;
  std::map<std::string, Tensor> params;

  // Ordered parameter names and shapes; initialization draws in exactly
  // this order so runs are reproducible.
  static std::vector<std::pair<std::string, std::vector<int>>> param_spec(
      const ModelConfig& cfg);
  static Model init(ModelConfig cfg, Rng& rng, double init_range);
};

// Parameters registered as leaves on one tape.
struct BoundModel {
  const Model* model = nullptr;
  Tape* tape = nullptr;
  std::map<std::string, int> ids;
  int id(const std::string& name) const;
  const ModelConfig& cfg() const { return model->cfg; }
};

BoundModel bind(Tape& tape, const Model& model, bool with_grad);

// ---------------------------------------------------------------------
// Encoder

struct EncodeResult {
  int n = 0;
  int S = -1;          // d x n content annotations
  int S_v = -1;        // value projection W_v S
  int phi = -1;        // n x n head scores (syntax modes)
  int beta = -1;       // attention matrix used downstream (one-hot in hard mode)
  int beta_soft = -1;  // soft marginals behind the hard selection
  int M = -1;          // d x n syntactic annotations
  int log_partition = -1;
  std::vector<int> final_h_fwd, final_c_fwd, final_h_bwd, final_c_bwd;  // per layer
};

EncodeResult encode(BoundModel& bm, const std::vector<int>& tokens, bool train,
                    Rng* dropout_rng);

// Plain values extracted from an encoder run, for analysis tooling.
struct EncodeValues {
  int n = 0;
  Tensor S, phi, beta, beta_soft, M;
  double log_partition = 0.0;
};

EncodeValues encode_values(const Model& model, const std::vector<int>& tokens);

// Column j of beta: probabilities over candidate heads of word j, with
// the diagonal entry being the root probability.
struct HeadDistribution {
  std::vector<double> p_head;  // per candidate head position
  double p_root = 0.0;         // the diagonal entry
};
HeadDistribution head_distribution(const EncodeValues& enc, int j);

// ---------------------------------------------------------------------
// Decoder

struct StepTrace {
  Tensor alpha;    // 1 x n attention weights
  Tensor context;  // d x 1
  Tensor d_syn;    // d x 1, empty in baseline/1set modes
  Tensor gamma;    // 1 x n separate-attention weights, empty otherwise
  Tensor gate;     // d x 1 gate activations, empty without a gate
  double gate_norm = 0.0;
};

struct DecoderState {
  std::vector<std::pair<int, int>> layers;  // (h, c) node ids per layer
  int u_prev = -1;
  int t = 0;
};

// What one decode run attends to; S_attend is the fused annotation set
// in 1set mode and plain S otherwise.
struct DecoderInputs {
  int S_attend = -1;
  int M = -1;  // -1 when the decoder has no syntactic path
  int n = 0;
  int true_len = 0;
};

DecoderInputs decoder_inputs(BoundModel& bm, const EncodeResult& enc);
DecoderState decoder_init(BoundModel& bm, const EncodeResult& enc);

struct StepResult {
  int dist = -1;       // V x 1 distribution over target words
  int log_probs = -1;  // V x 1 log probabilities
  StepTrace trace;
};

StepResult decode_step(BoundModel& bm, int y_prev, DecoderState& state,
                       const DecoderInputs& in, bool train, Rng* dropout_rng);

// ---------------------------------------------------------------------
// Attention building blocks (the decoder is composed of these; they are
// exposed for reuse and direct testing)

struct AttendResult {
  int alpha = -1;
  int context = -1;
};

// alpha = softmax(h^T W_a S) over the first true_len positions; padded
// positions receive exactly zero weight. c = S alpha^T.
AttendResult attend(Tape& tape, int h, int s, int w_a, int true_len);

int syntactic_vector_shared(Tape& tape, int m, int alpha);

struct SeparateAttnResult {
  int gamma = -1;
  int d_syn = -1;
};
SeparateAttnResult syntactic_vector_separate(Tape& tape, int h, int m, int w_m,
                                             int true_len);

struct GateResult {
  int d_hat = -1;
  int gate = -1;
  int gate_norm = -1;
};
GateResult gate_syntax(Tape& tape, int d_syn, int h, int w_g);

// s_bar_i = s_i + sigma(W_g s_i) (.) m_i: folds per-position head context
// into a single annotation set.
int fuse_1set(Tape& tape, int s, int m, int w_g);

// ---------------------------------------------------------------------
// Whole-sentence helpers

struct SentenceLoss {
  int loss_sum = -1;  // sum of gold-token negative log probabilities
  int n_tokens = 0;
  double max_abs_phi = 0.0;
};

SentenceLoss sentence_nll(BoundModel& bm, const std::vector<int>& src,
                          const std::vector<int>& tgt, bool train, Rng* dropout_rng);

// Greedy decoding; stops at end-of-sequence or 2x source length.
std::vector<int> greedy_translate(const Model& model, const std::vector<int>& src,
                                  std::vector<StepTrace>* traces = nullptr,
                                  EncodeValues* enc_values = nullptr);

}  // namespace sanmt
