#pragma once

#include <optional>

#include "nmt/common/matrix.hpp"
#include "nmt/model/graph.hpp"

namespace nmt::model {

// Graph-level building blocks. All sequences are time-major: row
// j*batch + b holds position j of sequence b. `allowed` has one row per
// query row and one column per key position; zero entries are masked.

/// softmax(q k^T / sqrt(d_k)) v, per sequence in the batch.
Var scaled_dot_attention(Graph& g, Var q, Var k, Var v, const Matrix& allowed, Eigen::Index batch,
                         Var* weights = nullptr);

struct MultiHeadVars {
  Var wq, wk, wv, wo;
};

/// Projects queries, keys and values, splits the width into `heads`
/// contiguous column blocks, attends per block, concatenates, applies W_O.
/// `mean_weights` (optional) receives the head-averaged attention values.
Var multi_head_attention(Graph& g, const MultiHeadVars& w, Var q_in, Var k_in, Var v_in, const Matrix& allowed,
                         Eigen::Index batch, std::size_t heads, Matrix* mean_weights = nullptr);

// Same, with key/value projections already applied (k = k_in W_K, v = v_in W_V).
Var multi_head_projected(Graph& g, Var wq, Var wo, Var q_in, Var k, Var v, const Matrix& allowed, Eigen::Index batch,
                         std::size_t heads, Matrix* mean_weights = nullptr);

struct BahdanauVars {
  Var w_query;  // hidden x hidden
  Var w_key;    // hidden x hidden
  Var v;        // hidden x 1
};

/// score_j = v . tanh(W_query s + W_key h_j); weights = softmax(score);
/// context = sum_j weights_j h_j. `keys` is states * W_key, precomputed
/// once per source batch. The query has `batch` rows.
Var bahdanau_attention(Graph& g, const BahdanauVars& w, Var query, Var keys, Var states, const Matrix& allowed,
                       Eigen::Index batch, Var* weights = nullptr);

// Value-level wrappers for a single sequence.

struct AttentionResult {
  Matrix context;
  Matrix weights;
};

// Throws std::invalid_argument on inconsistent shapes.
AttentionResult scaled_dot_attention(const Matrix& q, const Matrix& k, const Matrix& v,
                                     const std::optional<Matrix>& allowed = std::nullopt);

struct MultiHeadWeights {
  Matrix wq, wk, wv, wo;
};

Matrix multi_head_attention(const MultiHeadWeights& w, const Matrix& q_in, const Matrix& k_in, const Matrix& v_in,
                            std::size_t heads, const std::optional<Matrix>& allowed = std::nullopt);

struct BahdanauWeights {
  Matrix w_query, w_key, v;
};

AttentionResult bahdanau_attention(const BahdanauWeights& w, const RowVector& decoder_state,
                                   const Matrix& encoder_states);

}  // namespace nmt::model
