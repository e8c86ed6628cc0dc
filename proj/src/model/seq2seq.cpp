#include "nmt/model/seq2seq.hpp"

#include <algorithm>
#include <stdexcept>

#include "nmt/bpe/vocab.hpp"
#include "nmt/common/error.hpp"

namespace nmt::model {
namespace {

constexpr int kPad = bpe::Vocab::kPad;
constexpr int kBos = bpe::Vocab::kBos;
constexpr int kEos = bpe::Vocab::kEos;

Eigen::Index idx(std::size_t n) { return static_cast<Eigen::Index>(n); }

bool all_ones(const Eigen::VectorXd& v) { return (v.array() == 1.0).all(); }

}  // namespace

Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, Rng& rng) {
  Matrix mask(rows, cols);
  const double keep_scale = 1.0 / (1.0 - p);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) mask(r, c) = rng.uniform01() < p ? 0.0 : keep_scale;
  }
  return mask;
}

Matrix dropout(const Matrix& x, double p, bool training, Rng& rng) {
  if (!(p >= 0.0 && p < 1.0)) throw std::invalid_argument("dropout probability must lie in [0, 1)");
  if (!training || p == 0.0) return x;
  return x.cwiseProduct(dropout_mask(x.rows(), x.cols(), p, rng));
}

Seq2Seq::Seq2Seq(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  build_layout();
}

Seq2Seq::Seq2Seq(ModelConfig config, std::uint64_t seed) : Seq2Seq(std::move(config)) {
  Rng rng(seed);
  for (auto& t : tensors_) {
    for (Eigen::Index r = 0; r < t.value.rows(); ++r) {
      for (Eigen::Index c = 0; c < t.value.cols(); ++c) t.value(r, c) = rng.uniform(-0.1, 0.1);
    }
  }
  for (const auto& sa : layout_.self_attn) {
    tensors_[sa.ln_gain].value.setOnes();
    tensors_[sa.ln_bias].value.setZero();
  }
  tensors_[layout_.source_embedding].value.row(kPad).setZero();
  tensors_[layout_.target_embedding].value.row(kPad).setZero();
}

Seq2Seq Seq2Seq::zeros(ModelConfig config) { return Seq2Seq(std::move(config)); }

Seq2Seq::Seq2Seq(ModelConfig config, std::vector<Tensor> tensors) : Seq2Seq(std::move(config)) {
  if (tensors.size() != tensors_.size()) {
    throw FormatError("expected " + std::to_string(tensors_.size()) + " tensors, got " +
                      std::to_string(tensors.size()));
  }
  for (auto& t : tensors) {
    const auto it = index_.find(t.name);
    if (it == index_.end()) throw FormatError("unexpected tensor '" + t.name + "'");
    auto& slot = tensors_[it->second].value;
    if (slot.rows() != t.value.rows() || slot.cols() != t.value.cols()) {
      throw FormatError("tensor '" + t.name + "' has shape " + std::to_string(t.value.rows()) + "x" +
                        std::to_string(t.value.cols()) + ", expected " + std::to_string(slot.rows()) + "x" +
                        std::to_string(slot.cols()));
    }
    slot = std::move(t.value);
  }
}

std::size_t Seq2Seq::add(std::string name, Eigen::Index rows, Eigen::Index cols) {
  const std::size_t i = tensors_.size();
  index_.emplace(name, i);
  tensors_.push_back({std::move(name), Matrix::Zero(rows, cols)});
  return i;
}

void Seq2Seq::build_layout() {
  const Eigen::Index emb = idx(config_.embedding_width());
  const Eigen::Index h = idx(config_.hidden);
  const Eigen::Index d = idx(config_.direction_width());

  layout_.source_embedding = add("src_embedding", idx(config_.source_vocab), emb);
  layout_.target_embedding = add("tgt_embedding", idx(config_.target_vocab), emb);
  if (emb != h) {
    layout_.source_proj = add("src_input_proj", emb, h);
    layout_.target_proj = add("tgt_input_proj", emb, h);
  }
  for (std::size_t l = 0; l < config_.layers; ++l) {
    const std::string base = "enc.l" + std::to_string(l);
    for (const char* dir : {".fwd", ".bwd"}) {
      LstmIndex w{add(base + dir + ".wx", h, 4 * d), add(base + dir + ".wh", d, 4 * d),
                  add(base + dir + ".b", 1, 4 * d)};
      (std::string(dir) == ".fwd" ? layout_.enc_fwd : layout_.enc_bwd).push_back(w);
    }
    if (config_.bidir == BidirMode::kProject) {
      layout_.enc_proj_w.push_back(add(base + ".proj.w", 2 * d, h));
      layout_.enc_proj_b.push_back(add(base + ".proj.b", 1, h));
    }
  }
  if (config_.attention == AttentionKind::kMultiHead) {
    for (std::size_t k = 0; k < config_.layers; ++k) {
      const std::string base = "enc.sa" + std::to_string(k);
      layout_.self_attn.push_back({add(base + ".wq", h, h), add(base + ".wk", h, h), add(base + ".wv", h, h),
                                   add(base + ".wo", h, h), add(base + ".ln.gain", 1, h),
                                   add(base + ".ln.bias", 1, h)});
    }
  }
  for (std::size_t l = 0; l < config_.layers; ++l) {
    const std::string base = "dec.l" + std::to_string(l);
    const Eigen::Index in = l == 0 ? 2 * h : h;
    layout_.dec.push_back({add(base + ".wx", in, 4 * h), add(base + ".wh", h, 4 * h), add(base + ".b", 1, 4 * h)});
  }
  if (config_.attention == AttentionKind::kBahdanau) {
    layout_.a0 = add("attn.w_query", h, h);
    layout_.a1 = add("attn.w_key", h, h);
    layout_.a2 = add("attn.v", h, 1);
  } else {
    layout_.a0 = add("attn.wq", h, h);
    layout_.a1 = add("attn.wk", h, h);
    layout_.a2 = add("attn.wv", h, h);
    layout_.a3 = add("attn.wo", h, h);
  }
  layout_.combine_w = add("dec.combine.w", 2 * h, h);
  layout_.combine_b = add("dec.combine.b", 1, h);
  layout_.out_w = add("out.w", h, idx(config_.target_vocab));
  layout_.out_b = add("out.b", 1, idx(config_.target_vocab));
}

const Matrix& Seq2Seq::tensor(std::string_view name) const {
  const auto it = index_.find(std::string(name));
  if (it == index_.end()) throw std::out_of_range("no tensor named '" + std::string(name) + "'");
  return tensors_[it->second].value;
}

Matrix& Seq2Seq::tensor(std::string_view name) {
  return const_cast<Matrix&>(std::as_const(*this).tensor(name));
}

std::vector<Matrix> Seq2Seq::zero_gradients() const {
  std::vector<Matrix> grads;
  grads.reserve(tensors_.size());
  for (const auto& t : tensors_) grads.push_back(Matrix::Zero(t.value.rows(), t.value.cols()));
  return grads;
}

Seq2Seq::Bound Seq2Seq::bind(Graph& g, std::vector<Matrix>* grads, bool freeze_embeddings) const {
  if (grads && grads->size() != tensors_.size()) throw std::invalid_argument("gradient list does not match tensors");
  Bound b;
  b.vars.reserve(tensors_.size());
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    Matrix* sink = grads && !(freeze_embeddings && is_embedding(i)) ? &(*grads)[i] : nullptr;
    b.vars.push_back(g.param(tensors_[i].value, sink));
  }
  return b;
}

Var Seq2Seq::apply_dropout(Graph& g, Var x, const DropoutContext& dropout) const {
  if (!dropout.active()) return x;
  const Matrix& v = g.value(x);
  return g.mul_const(x, dropout_mask(v.rows(), v.cols(), dropout.rate, *dropout.rng));
}

std::pair<Var, Var> Seq2Seq::lstm_cell(Graph& g, const Bound& p, const LstmIndex& w, Var input_proj, Var h,
                                       Var c) const {
  const Eigen::Index d = g.value(h).cols();
  Var gates = g.add(input_proj, g.matmul(h, p.vars[w.wh]));
  Var i = g.sigmoid(g.slice_cols(gates, 0, d));
  Var f = g.sigmoid(g.slice_cols(gates, d, d));
  Var cand = g.tanh(g.slice_cols(gates, 2 * d, d));
  Var o = g.sigmoid(g.slice_cols(gates, 3 * d, d));
  Var c_new = g.add(g.mul(f, c), g.mul(i, cand));
  Var h_new = g.mul(o, g.tanh(c_new));
  return {h_new, c_new};
}

Seq2Seq::Memory Seq2Seq::encode(Graph& g, const Bound& p, const std::vector<std::vector<int>>& sources,
                                const DropoutContext& dropout) const {
  if (sources.empty()) throw std::invalid_argument("encode: empty batch");
  const auto batch = idx(sources.size());
  Eigen::Index steps = 0;
  for (std::size_t b = 0; b < sources.size(); ++b) {
    const auto& s = sources[b];
    if (std::none_of(s.begin(), s.end(), [](int id) { return id != kPad; })) {
      throw std::invalid_argument("encode: source " + std::to_string(b) + " has no tokens");
    }
    steps = std::max(steps, idx(s.size()));
  }

  std::vector<int> ids(static_cast<std::size_t>(steps * batch), kPad);
  Matrix allowed = Matrix::Zero(batch, steps);
  for (Eigen::Index b = 0; b < batch; ++b) {
    const auto& s = sources[static_cast<std::size_t>(b)];
    for (Eigen::Index t = 0; t < idx(s.size()); ++t) {
      ids[static_cast<std::size_t>(t * batch + b)] = s[static_cast<std::size_t>(t)];
      allowed(b, t) = s[static_cast<std::size_t>(t)] != kPad ? 1.0 : 0.0;
    }
  }

  Var x = g.gather_rows(p.vars[layout_.source_embedding], std::move(ids), kPad);
  if (layout_.source_proj) x = g.matmul(x, p.vars[*layout_.source_proj]);

  const Eigen::Index d = idx(config_.direction_width());
  const Var zero = g.constant(Matrix::Zero(batch, d));
  for (std::size_t l = 0; l < config_.layers; ++l) {
    std::vector<Var> fwd(static_cast<std::size_t>(steps));
    std::vector<Var> bwd(static_cast<std::size_t>(steps));
    for (const bool forward : {true, false}) {
      const LstmIndex& w = forward ? layout_.enc_fwd[l] : layout_.enc_bwd[l];
      Var xw = g.add_row(g.matmul(x, p.vars[w.wx]), p.vars[w.b]);
      Var h = zero;
      Var c = zero;
      for (Eigen::Index k = 0; k < steps; ++k) {
        const Eigen::Index t = forward ? k : steps - 1 - k;
        auto [h_new, c_new] = lstm_cell(g, p, w, g.slice_rows(xw, t * batch, batch), h, c);
        const Eigen::VectorXd keep = allowed.col(t);
        if (all_ones(keep)) {
          h = h_new;
          c = c_new;
        } else {
          // Padded positions carry the previous state through unchanged.
          h = g.blend(h_new, h, keep);
          c = g.blend(c_new, c, keep);
        }
        (forward ? fwd : bwd)[static_cast<std::size_t>(t)] = h;
      }
    }
    const Var both[] = {g.concat_rows(fwd), g.concat_rows(bwd)};
    Var y = g.concat_cols(both);
    if (config_.bidir == BidirMode::kProject) {
      y = g.add_row(g.matmul(y, p.vars[layout_.enc_proj_w[l]]), p.vars[layout_.enc_proj_b[l]]);
    }
    x = apply_dropout(g, y, dropout);
  }

  if (!layout_.self_attn.empty()) {
    Matrix self_allowed(steps * batch, steps);
    for (Eigen::Index i = 0; i < steps; ++i) self_allowed.middleRows(i * batch, batch) = allowed;
    for (const auto& sa : layout_.self_attn) {
      MultiHeadVars w{p.vars[sa.wq], p.vars[sa.wk], p.vars[sa.wv], p.vars[sa.wo]};
      Var a = multi_head_attention(g, w, x, x, x, self_allowed, batch, config_.heads);
      a = apply_dropout(g, a, dropout);
      x = g.layer_norm(g.add(x, a), p.vars[sa.ln_gain], p.vars[sa.ln_bias]);
    }
  }
  return attach(g, p, x, std::move(allowed));
}

Seq2Seq::Memory Seq2Seq::attach(Graph& g, const Bound& p, Var states, Matrix allowed) const {
  Memory m;
  m.states = states;
  m.batch = allowed.rows();
  m.steps = allowed.cols();
  if (g.value(states).rows() != m.batch * m.steps || g.value(states).cols() != idx(config_.hidden)) {
    throw std::invalid_argument("encoder states do not match the mask shape");
  }
  m.allowed = std::move(allowed);
  m.keys = g.matmul(states, p.vars[layout_.a1]);
  if (config_.attention == AttentionKind::kMultiHead) m.values = g.matmul(states, p.vars[layout_.a2]);
  return m;
}

Seq2Seq::State Seq2Seq::initial_state(Graph& g, Eigen::Index batch) const {
  State s;
  const Var zero = g.constant(Matrix::Zero(batch, idx(config_.hidden)));
  s.h.assign(config_.layers, zero);
  s.c.assign(config_.layers, zero);
  s.feed = zero;
  return s;
}

Seq2Seq::Step Seq2Seq::step(Graph& g, const Bound& p, const Memory& memory, const std::vector<int>& previous,
                            const State& state, const DropoutContext& dropout) const {
  if (idx(previous.size()) != memory.batch) throw std::invalid_argument("decoder input does not match batch");
  for (const int id : previous) {
    if (id < 0 || static_cast<std::size_t>(id) >= config_.target_vocab) {
      throw std::out_of_range("target id " + std::to_string(id) + " outside vocabulary of " +
                              std::to_string(config_.target_vocab));
    }
  }
  Var e = g.gather_rows(p.vars[layout_.target_embedding], previous, kPad);
  if (layout_.target_proj) e = g.matmul(e, p.vars[*layout_.target_proj]);
  const Var parts[] = {e, state.feed};
  Var input = g.concat_cols(parts);

  Step out;
  out.state.h.resize(config_.layers);
  out.state.c.resize(config_.layers);
  for (std::size_t l = 0; l < config_.layers; ++l) {
    const LstmIndex& w = layout_.dec[l];
    Var xw = g.add_row(g.matmul(input, p.vars[w.wx]), p.vars[w.b]);
    auto [h, c] = lstm_cell(g, p, w, xw, state.h[l], state.c[l]);
    out.state.h[l] = h;
    out.state.c[l] = c;
    input = apply_dropout(g, h, dropout);
  }
  const Var top = input;

  Var context;
  if (config_.attention == AttentionKind::kBahdanau) {
    BahdanauVars w{p.vars[layout_.a0], p.vars[layout_.a1], p.vars[layout_.a2]};
    Var weights;
    context = bahdanau_attention(g, w, top, memory.keys, memory.states, memory.allowed, memory.batch, &weights);
    out.attention = g.value(weights);
  } else {
    context = multi_head_projected(g, p.vars[layout_.a0], p.vars[layout_.a3], top, memory.keys, memory.values,
                                   memory.allowed, memory.batch, config_.heads, &out.attention);
  }
  const Var joined[] = {top, context};
  Var feed = g.tanh(g.add_row(g.matmul(g.concat_cols(joined), p.vars[layout_.combine_w]), p.vars[layout_.combine_b]));
  feed = apply_dropout(g, feed, dropout);
  out.state.feed = feed;
  out.feed = feed;
  return out;
}

Var Seq2Seq::logits(Graph& g, const Bound& p, Var feed) const {
  return g.add_row(g.matmul(feed, p.vars[layout_.out_w]), p.vars[layout_.out_b]);
}

Var Seq2Seq::loss(Graph& g, const Bound& p, const std::vector<Example>& batch, const DropoutContext& dropout,
                  std::vector<double>* example_nll) const {
  if (batch.empty()) throw std::invalid_argument("loss: empty batch");
  std::vector<std::vector<int>> sources;
  sources.reserve(batch.size());
  std::size_t longest = 0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& t = batch[b].target;
    if (std::none_of(t.begin(), t.end(), [](int id) { return id != kPad; })) {
      throw std::invalid_argument("loss: target " + std::to_string(b) + " has no tokens");
    }
    sources.push_back(batch[b].source);
    longest = std::max(longest, t.size());
  }
  const auto n = idx(batch.size());
  const std::size_t steps = longest + 1;

  Memory memory = encode(g, p, sources, dropout);
  State state = initial_state(g, n);
  std::vector<int> previous(batch.size(), kBos);
  std::vector<Var> feeds;
  feeds.reserve(steps);
  std::vector<int> gold(steps * batch.size(), kPad);
  std::vector<double> weight(gold.size(), 0.0);
  for (std::size_t t = 0; t < steps; ++t) {
    Step s = step(g, p, memory, previous, state, dropout);
    feeds.push_back(s.feed);
    state = std::move(s.state);
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const auto& target = batch[b].target;
      const int y = t < target.size() ? target[t] : (t == target.size() ? kEos : kPad);
      gold[t * batch.size() + b] = y;
      weight[t * batch.size() + b] = y == kPad ? 0.0 : 1.0;
      previous[b] = t < target.size() ? target[t] : kPad;
    }
  }
  std::vector<double> row_nll;
  Var all = logits(g, p, g.concat_rows(feeds));
  Var mean = g.cross_entropy(all, gold, weight, &row_nll);
  if (example_nll) {
    example_nll->assign(batch.size(), 0.0);
    for (std::size_t r = 0; r < row_nll.size(); ++r) {
      if (weight[r] != 0.0) (*example_nll)[r % batch.size()] += row_nll[r];
    }
  }
  return mean;
}

}  // namespace nmt::model
