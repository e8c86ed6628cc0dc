#include "nmt/model/attention.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace nmt::model {

Var scaled_dot_attention(Graph& g, Var q, Var k, Var v, const Matrix& allowed, Eigen::Index batch, Var* weights) {
  const Eigen::Index dk = g.value(q).cols();
  if (g.value(k).cols() != dk) throw std::invalid_argument("scaled_dot_attention: Q and K widths differ");
  if (g.value(k).rows() != g.value(v).rows()) throw std::invalid_argument("scaled_dot_attention: K and V rows differ");
  Var scores = g.scale(g.block_scores(q, k, batch), 1.0 / std::sqrt(static_cast<double>(dk)));
  Var w = g.masked_softmax(scores, allowed);
  if (weights) *weights = w;
  return g.block_context(w, v, batch);
}

Var multi_head_projected(Graph& g, Var wq, Var wo, Var q_in, Var k, Var v, const Matrix& allowed, Eigen::Index batch,
                         std::size_t heads, Matrix* mean_weights) {
  const Eigen::Index width = g.value(k).cols();
  if (heads == 0 || width % static_cast<Eigen::Index>(heads) != 0) {
    throw std::invalid_argument("multi_head_attention: " + std::to_string(heads) + " heads do not divide width " +
                                std::to_string(width));
  }
  const Eigen::Index dk = width / static_cast<Eigen::Index>(heads);
  Var q = g.matmul(q_in, wq);
  std::vector<Var> outputs;
  outputs.reserve(heads);
  if (mean_weights) mean_weights->setZero(allowed.rows(), allowed.cols());
  for (std::size_t h = 0; h < heads; ++h) {
    const Eigen::Index at = static_cast<Eigen::Index>(h) * dk;
    Var w;
    outputs.push_back(scaled_dot_attention(g, g.slice_cols(q, at, dk), g.slice_cols(k, at, dk),
                                           g.slice_cols(v, at, dk), allowed, batch, &w));
    if (mean_weights) *mean_weights += g.value(w);
  }
  if (mean_weights) *mean_weights /= static_cast<double>(heads);
  return g.matmul(heads == 1 ? outputs[0] : g.concat_cols(outputs), wo);
}

Var multi_head_attention(Graph& g, const MultiHeadVars& w, Var q_in, Var k_in, Var v_in, const Matrix& allowed,
                         Eigen::Index batch, std::size_t heads, Matrix* mean_weights) {
  return multi_head_projected(g, w.wq, w.wo, q_in, g.matmul(k_in, w.wk), g.matmul(v_in, w.wv), allowed, batch, heads,
                              mean_weights);
}

Var bahdanau_attention(Graph& g, const BahdanauVars& w, Var query, Var keys, Var states, const Matrix& allowed,
                       Eigen::Index batch, Var* weights) {
  const Eigen::Index steps = g.value(keys).rows() / batch;
  Var q = g.matmul(query, w.w_query);
  Var hidden = g.tanh(g.add(g.tile_rows(q, steps), keys));
  Var scores = g.unstack_time(g.matmul(hidden, w.v), batch);
  Var a = g.masked_softmax(scores, allowed);
  if (weights) *weights = a;
  return g.block_context(a, states, batch);
}

AttentionResult scaled_dot_attention(const Matrix& q, const Matrix& k, const Matrix& v,
                                     const std::optional<Matrix>& allowed) {
  Graph g(false);
  const Matrix mask = allowed ? *allowed : Matrix::Ones(q.rows(), k.rows());
  Var w;
  Var ctx = scaled_dot_attention(g, g.constant(q), g.constant(k), g.constant(v), mask, 1, &w);
  return {g.value(ctx), g.value(w)};
}

Matrix multi_head_attention(const MultiHeadWeights& w, const Matrix& q_in, const Matrix& k_in, const Matrix& v_in,
                            std::size_t heads, const std::optional<Matrix>& allowed) {
  Graph g(false);
  const Matrix mask = allowed ? *allowed : Matrix::Ones(q_in.rows(), k_in.rows());
  MultiHeadVars vars{g.param(w.wq, nullptr), g.param(w.wk, nullptr), g.param(w.wv, nullptr), g.param(w.wo, nullptr)};
  Var out = multi_head_attention(g, vars, g.constant(q_in), g.constant(k_in), g.constant(v_in), mask, 1, heads);
  return g.value(out);
}

AttentionResult bahdanau_attention(const BahdanauWeights& w, const RowVector& decoder_state,
                                   const Matrix& encoder_states) {
  if (w.w_query.rows() != decoder_state.cols() || w.w_key.rows() != encoder_states.cols() ||
      w.w_query.cols() != w.w_key.cols() || w.v.rows() != w.w_key.cols() || w.v.cols() != 1) {
    throw std::invalid_argument("bahdanau_attention: inconsistent weight shapes");
  }
  Graph g(false);
  BahdanauVars vars{g.param(w.w_query, nullptr), g.param(w.w_key, nullptr), g.param(w.v, nullptr)};
  Var states = g.constant(encoder_states);
  Var keys = g.matmul(states, vars.w_key);
  Var a;
  const Matrix mask = Matrix::Ones(1, encoder_states.rows());
  Var ctx = bahdanau_attention(g, vars, g.constant(Matrix(decoder_state)), keys, states, mask, 1, &a);
  return {g.value(ctx), g.value(a)};
}

}  // namespace nmt::model
