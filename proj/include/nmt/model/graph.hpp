#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "nmt/common/matrix.hpp"

namespace nmt::model {

// Handle to a node of a Graph.
struct Var {
  std::uint32_t id = UINT32_MAX;
};

/// Tape of matrix operations with reverse-mode differentiation.
///
/// Nodes are appended in evaluation order, so the tape is already a
/// topological order and backward() walks it in reverse. A graph built with
/// record=false only evaluates values (inference). Parameters are borrowed,
/// not copied; their gradients are added into caller-owned matrices.
class Graph {
 public:
  explicit Graph(bool record = true) : record_(record) { nodes_.reserve(1024); }

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool recording() const { return record_; }

  Var constant(Matrix value);
  // `value` must outlive the graph. A null `grad` means no gradient.
  Var param(const Matrix& value, Matrix* grad);

  const Matrix& value(Var v) const;
  std::size_t size() const { return nodes_.size(); }

  // Backpropagates from a 1x1 node and flushes parameter gradients.
  void backward(Var scalar);

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  // a + row, with row (1 x n) broadcast over a's rows.
  Var add_row(Var a, Var row);
  Var mul(Var a, Var b);
  // Elementwise product with a fixed matrix (dropout masks).
  Var mul_const(Var a, Matrix c);
  Var scale(Var a, double s);
  Var sigmoid(Var a);
  Var tanh(Var a);

  Var concat_cols(std::span<const Var> parts);
  Var slice_cols(Var a, Eigen::Index start, Eigen::Index count);
  Var concat_rows(std::span<const Var> parts);
  Var slice_rows(Var a, Eigen::Index start, Eigen::Index count);

  // Embedding lookup. Rows equal to `frozen_row` receive no gradient.
  Var gather_rows(Var table, std::vector<int> ids, int frozen_row = -1);
  // Stacks `times` copies of a vertically.
  Var tile_rows(Var a, Eigen::Index times);
  // Row r: keep[r] * fresh + (1 - keep[r]) * old.
  Var blend(Var fresh, Var old, Eigen::VectorXd keep);

  // Row softmax over positions with allowed(r, c) != 0; others get weight 0.
  Var masked_softmax(Var scores, Matrix allowed);

  // Time-major batched attention primitives. Row i*batch + b of q holds
  // query i of sequence b; likewise row j*batch + b of k and v.
  //   block_scores:  out(i*batch+b, j) = q.row(i*batch+b) . k.row(j*batch+b)
  //   block_context: out.row(i*batch+b) = sum_j w(i*batch+b, j) v.row(j*batch+b)
  Var block_scores(Var q, Var k, Eigen::Index batch);
  Var block_context(Var w, Var v, Eigen::Index batch);
  // (steps*batch x 1) -> (batch x steps).
  Var unstack_time(Var x, Eigen::Index batch);

  Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-6);

  /// Weighted mean negative log-likelihood of `targets` under row-softmax of
  /// `logits`: sum_r w_r * nll_r / sum_r w_r. Per-row nll is written to
  /// `row_nll` when given.
  Var cross_entropy(Var logits, std::vector<int> targets, std::vector<double> weights,
                    std::vector<double>* row_nll = nullptr);

 private:
  struct Node {
    Matrix value;
    const Matrix* borrowed = nullptr;
    Matrix grad;
    Matrix* grad_sink = nullptr;
    std::function<void()> backprop;
    bool needs_grad = false;
  };

  Var push(Matrix value, bool needs_grad);
  bool needs(Var v) const { return nodes_[v.id].needs_grad; }
  // Lazily zero-initialized gradient buffer.
  Matrix& grad(Var v);
  const Matrix& grad_view(Var v) const { return nodes_[v.id].grad; }
  void on_backward(Var out, std::function<void()> fn);

  bool record_;
  std::vector<Node> nodes_;
};

}  // namespace nmt::model
