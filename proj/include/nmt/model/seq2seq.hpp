#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "nmt/common/matrix.hpp"
#include "nmt/common/random.hpp"
#include "nmt/model/attention.hpp"
#include "nmt/model/config.hpp"
#include "nmt/model/graph.hpp"

namespace nmt::model {

struct Tensor {
  std::string name;
  Matrix value;
};

// One training pair as ids, without BOS/EOS framing.
struct Example {
  std::vector<int> source;
  std::vector<int> target;
};

// Dropout is active only when a generator is supplied and rate > 0.
struct DropoutContext {
  double rate = 0.0;
  Rng* rng = nullptr;

  bool active() const { return rng != nullptr && rate > 0.0; }
};

/// Bidirectional LSTM encoder (optionally followed by multi-head
/// self-attention blocks) and an attentional LSTM decoder.
///
/// LSTM cell, gate order i, f, g, o:
///   [i f g o] = x W_x + h W_h + b
///   c' = sigmoid(f) * c + sigmoid(i) * tanh(g)
///   h' = sigmoid(o) * tanh(c')
///
/// Encoder: each layer runs a forward and a backward LSTM over the sequence;
/// their outputs are concatenated and (bidir=project) projected to the model
/// width. With multi-head attention the recurrent stack is followed by
/// `layers` blocks x <- LayerNorm(x + SelfAttention(x)).
///
/// Decoder step t (input feeding):
///   s_t      = LSTM([E(y_{t-1}); feed_{t-1}], s_{t-1})
///   ctx_t    = Attention(top(s_t), encoder states)
///   feed_t   = tanh([top(s_t); ctx_t] W_c + b_c)
///   logits_t = feed_t W_out + b_out
/// Dropout is applied to every recurrent layer output, to self-attention
/// outputs and to feed_t.
class Seq2Seq {
 public:
  // Uniform [-0.1, 0.1] init from `seed`; layer-norm gains 1, biases 0,
  // PAD embedding rows 0.
  Seq2Seq(ModelConfig config, std::uint64_t seed);
  static Seq2Seq zeros(ModelConfig config);
  // For checkpoint loading: names and shapes must match the layout.
  Seq2Seq(ModelConfig config, std::vector<Tensor> tensors);

  const ModelConfig& config() const { return config_; }
  const std::vector<Tensor>& tensors() const { return tensors_; }
  std::vector<Tensor>& tensors() { return tensors_; }
  const Matrix& tensor(std::string_view name) const;
  Matrix& tensor(std::string_view name);
  bool is_embedding(std::size_t index) const {
    return index == layout_.source_embedding || index == layout_.target_embedding;
  }
  std::vector<Matrix> zero_gradients() const;

  struct Bound {
    std::vector<Var> vars;
  };

  // Registers every tensor with the graph. With `grads`, gradients are
  // accumulated there (embedding tensors are skipped when frozen).
  Bound bind(Graph& g, std::vector<Matrix>* grads, bool freeze_embeddings = false) const;

  struct Memory {
    Var states;  // (steps*batch) x hidden, time-major
    Var keys;    // bahdanau: states W_key; multihead: states W_K
    Var values;  // multihead: states W_V
    Eigen::Index batch = 0;
    Eigen::Index steps = 0;
    Matrix allowed;  // batch x steps
  };

  // Pads with PAD to the longest source. Throws std::invalid_argument when
  // a source has no non-PAD token.
  Memory encode(Graph& g, const Bound& p, const std::vector<std::vector<int>>& sources,
                const DropoutContext& dropout) const;
  // Wraps precomputed states (e.g. from an earlier encode) for decoding.
  Memory attach(Graph& g, const Bound& p, Var states, Matrix allowed) const;

  struct State {
    std::vector<Var> h;
    std::vector<Var> c;
    Var feed;
  };

  State initial_state(Graph& g, Eigen::Index batch) const;

  struct Step {
    State state;
    Var feed;
    Matrix attention;  // batch x steps, averaged over heads
  };

  Step step(Graph& g, const Bound& p, const Memory& memory, const std::vector<int>& previous, const State& state,
            const DropoutContext& dropout) const;
  Var logits(Graph& g, const Bound& p, Var feed) const;

  /// Teacher-forced mean token cross-entropy over a batch (targets get EOS
  /// appended). `example_nll` receives the summed nll per example.
  Var loss(Graph& g, const Bound& p, const std::vector<Example>& batch, const DropoutContext& dropout,
           std::vector<double>* example_nll = nullptr) const;

 private:
  struct LstmIndex {
    std::size_t wx, wh, b;
  };
  struct Layout {
    std::size_t source_embedding = 0, target_embedding = 0;
    std::optional<std::size_t> source_proj, target_proj;
    std::vector<LstmIndex> enc_fwd, enc_bwd, dec;
    std::vector<std::size_t> enc_proj_w, enc_proj_b;
    struct SelfAttn {
      std::size_t wq, wk, wv, wo, ln_gain, ln_bias;
    };
    std::vector<SelfAttn> self_attn;
    // bahdanau: w_query, w_key, v; multihead: wq, wk, wv, wo
    std::size_t a0 = 0, a1 = 0, a2 = 0, a3 = 0;
    std::size_t combine_w = 0, combine_b = 0, out_w = 0, out_b = 0;
  };

  explicit Seq2Seq(ModelConfig config);
  std::size_t add(std::string name, Eigen::Index rows, Eigen::Index cols);
  void build_layout();

  std::pair<Var, Var> lstm_cell(Graph& g, const Bound& p, const LstmIndex& w, Var input_proj, Var h, Var c) const;
  Var apply_dropout(Graph& g, Var x, const DropoutContext& dropout) const;

  ModelConfig config_;
  std::vector<Tensor> tensors_;
  std::unordered_map<std::string, std::size_t> index_;
  Layout layout_;
};

// Training-mode dropout: zero with probability p, scale survivors by
// 1/(1-p). Identity when !training or p == 0.
Matrix dropout(const Matrix& x, double p, bool training, Rng& rng);
Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, Rng& rng);

}  // namespace nmt::model
