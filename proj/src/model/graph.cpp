#include "nmt/model/graph.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "nmt/common/error.hpp"

namespace nmt::model {
namespace {

void require(bool ok, const char* op, const std::string& what) {
  if (!ok) throw std::invalid_argument(std::string(op) + ": " + what);
}

std::string shape(const Matrix& m) { return std::to_string(m.rows()) + "x" + std::to_string(m.cols()); }

}  // namespace

Var Graph::push(Matrix value, bool needs_grad) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = record_ && needs_grad;
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

const Matrix& Graph::value(Var v) const {
  const Node& n = nodes_.at(v.id);
  return n.borrowed ? *n.borrowed : n.value;
}

Matrix& Graph::grad(Var v) {
  Node& n = nodes_[v.id];
  if (n.grad.size() == 0) {
    const Matrix& val = n.borrowed ? *n.borrowed : n.value;
    n.grad = Matrix::Zero(val.rows(), val.cols());
  }
  return n.grad;
}

void Graph::on_backward(Var out, std::function<void()> fn) {
  if (nodes_[out.id].needs_grad) nodes_[out.id].backprop = std::move(fn);
}

Var Graph::constant(Matrix value) { return push(std::move(value), false); }

Var Graph::param(const Matrix& value, Matrix* grad_sink) {
  Node n;
  n.borrowed = &value;
  n.grad_sink = grad_sink;
  n.needs_grad = record_ && grad_sink != nullptr;
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

void Graph::backward(Var scalar) {
  require(record_, "backward", "graph was built without recording");
  const Matrix& v = value(scalar);
  require(v.rows() == 1 && v.cols() == 1, "backward", "expects a 1x1 node, got " + shape(v));
  if (!nodes_[scalar.id].needs_grad) return;
  grad(scalar).setConstant(1.0);
  for (std::size_t i = scalar.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad.size() == 0) continue;
    if (n.backprop) n.backprop();
    if (n.grad_sink) *n.grad_sink += n.grad;
  }
}

Var Graph::matmul(Var a, Var b) {
  const Matrix& A = value(a);
  const Matrix& B = value(b);
  require(A.cols() == B.rows(), "matmul", shape(A) + " * " + shape(B));
  Matrix C;
  C.noalias() = A * B;
  Var out = push(std::move(C), needs(a) || needs(b));
  on_backward(out, [this, a, b, out] {
    const Matrix& g = grad_view(out);
    if (needs(a)) grad(a).noalias() += g * value(b).transpose();
    if (needs(b)) grad(b).noalias() += value(a).transpose() * g;
  });
  return out;
}

Var Graph::add(Var a, Var b) {
  const Matrix& A = value(a);
  const Matrix& B = value(b);
  require(A.rows() == B.rows() && A.cols() == B.cols(), "add", shape(A) + " + " + shape(B));
  Var out = push(A + B, needs(a) || needs(b));
  on_backward(out, [this, a, b, out] {
    if (needs(a)) grad(a) += grad_view(out);
    if (needs(b)) grad(b) += grad_view(out);
  });
  return out;
}

Var Graph::add_row(Var a, Var row) {
  const Matrix& A = value(a);
  const Matrix& R = value(row);
  require(R.rows() == 1 && R.cols() == A.cols(), "add_row", shape(A) + " + " + shape(R));
  Matrix C = A;
  C.rowwise() += R.row(0);
  Var out = push(std::move(C), needs(a) || needs(row));
  on_backward(out, [this, a, row, out] {
    if (needs(a)) grad(a) += grad_view(out);
    if (needs(row)) grad(row) += grad_view(out).colwise().sum();
  });
  return out;
}

Var Graph::mul(Var a, Var b) {
  const Matrix& A = value(a);
  const Matrix& B = value(b);
  require(A.rows() == B.rows() && A.cols() == B.cols(), "mul", shape(A) + " .* " + shape(B));
  Var out = push(A.cwiseProduct(B), needs(a) || needs(b));
  on_backward(out, [this, a, b, out] {
    if (needs(a)) grad(a) += grad_view(out).cwiseProduct(value(b));
    if (needs(b)) grad(b) += grad_view(out).cwiseProduct(value(a));
  });
  return out;
}

Var Graph::mul_const(Var a, Matrix c) {
  const Matrix& A = value(a);
  require(A.rows() == c.rows() && A.cols() == c.cols(), "mul_const", shape(A) + " .* " + shape(c));
  Var out = push(A.cwiseProduct(c), needs(a));
  on_backward(out, [this, a, out, c = std::move(c)] { grad(a) += grad_view(out).cwiseProduct(c); });
  return out;
}

Var Graph::scale(Var a, double s) {
  Var out = push(value(a) * s, needs(a));
  on_backward(out, [this, a, out, s] { grad(a) += grad_view(out) * s; });
  return out;
}

Var Graph::sigmoid(Var a) {
  Matrix y = value(a).unaryExpr([](double x) {
    // Split by sign so exp never overflows.
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  });
  Var out = push(std::move(y), needs(a));
  on_backward(out, [this, a, out] {
    const Matrix& y = value(out);
    grad(a).array() += grad_view(out).array() * y.array() * (1.0 - y.array());
  });
  return out;
}

Var Graph::tanh(Var a) {
  Var out = push(value(a).array().tanh().matrix(), needs(a));
  on_backward(out, [this, a, out] {
    const Matrix& y = value(out);
    grad(a).array() += grad_view(out).array() * (1.0 - y.array().square());
  });
  return out;
}

Var Graph::concat_cols(std::span<const Var> parts) {
  require(!parts.empty(), "concat_cols", "no inputs");
  const Eigen::Index rows = value(parts[0]).rows();
  Eigen::Index cols = 0;
  bool any = false;
  for (const Var p : parts) {
    require(value(p).rows() == rows, "concat_cols", "row mismatch " + shape(value(p)));
    cols += value(p).cols();
    any = any || needs(p);
  }
  Matrix C(rows, cols);
  Eigen::Index at = 0;
  for (const Var p : parts) {
    C.middleCols(at, value(p).cols()) = value(p);
    at += value(p).cols();
  }
  Var out = push(std::move(C), any);
  on_backward(out, [this, parts = std::vector<Var>(parts.begin(), parts.end()), out] {
    Eigen::Index at = 0;
    for (const Var p : parts) {
      const Eigen::Index n = value(p).cols();
      if (needs(p)) grad(p) += grad_view(out).middleCols(at, n);
      at += n;
    }
  });
  return out;
}

Var Graph::slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
  const Matrix& A = value(a);
  require(start >= 0 && count >= 0 && start + count <= A.cols(), "slice_cols", "range outside " + shape(A));
  Var out = push(A.middleCols(start, count), needs(a));
  on_backward(out, [this, a, out, start, count] { grad(a).middleCols(start, count) += grad_view(out); });
  return out;
}

Var Graph::concat_rows(std::span<const Var> parts) {
  require(!parts.empty(), "concat_rows", "no inputs");
  const Eigen::Index cols = value(parts[0]).cols();
  Eigen::Index rows = 0;
  bool any = false;
  for (const Var p : parts) {
    require(value(p).cols() == cols, "concat_rows", "column mismatch " + shape(value(p)));
    rows += value(p).rows();
    any = any || needs(p);
  }
  Matrix C(rows, cols);
  Eigen::Index at = 0;
  for (const Var p : parts) {
    C.middleRows(at, value(p).rows()) = value(p);
    at += value(p).rows();
  }
  Var out = push(std::move(C), any);
  on_backward(out, [this, parts = std::vector<Var>(parts.begin(), parts.end()), out] {
    Eigen::Index at = 0;
    for (const Var p : parts) {
      const Eigen::Index n = value(p).rows();
      if (needs(p)) grad(p) += grad_view(out).middleRows(at, n);
      at += n;
    }
  });
  return out;
}

Var Graph::slice_rows(Var a, Eigen::Index start, Eigen::Index count) {
  const Matrix& A = value(a);
  require(start >= 0 && count >= 0 && start + count <= A.rows(), "slice_rows", "range outside " + shape(A));
  Var out = push(A.middleRows(start, count), needs(a));
  on_backward(out, [this, a, out, start, count] { grad(a).middleRows(start, count) += grad_view(out); });
  return out;
}

Var Graph::gather_rows(Var table, std::vector<int> ids, int frozen_row) {
  const Matrix& T = value(table);
  Matrix C(static_cast<Eigen::Index>(ids.size()), T.cols());
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0 || ids[r] >= T.rows()) {
      throw std::out_of_range("token id " + std::to_string(ids[r]) + " outside embedding of " +
                              std::to_string(T.rows()) + " rows");
    }
    C.row(static_cast<Eigen::Index>(r)) = T.row(ids[r]);
  }
  Var out = push(std::move(C), needs(table));
  on_backward(out, [this, table, out, ids = std::move(ids), frozen_row] {
    Matrix& g = grad(table);
    const Matrix& go = grad_view(out);
    for (std::size_t r = 0; r < ids.size(); ++r) {
      if (ids[r] != frozen_row) g.row(ids[r]) += go.row(static_cast<Eigen::Index>(r));
    }
  });
  return out;
}

Var Graph::tile_rows(Var a, Eigen::Index times) {
  const Matrix& A = value(a);
  require(times >= 1, "tile_rows", "times must be positive");
  Var out = push(A.replicate(times, 1), needs(a));
  on_backward(out, [this, a, out, times] {
    const Eigen::Index n = value(a).rows();
    Matrix& g = grad(a);
    for (Eigen::Index k = 0; k < times; ++k) g += grad_view(out).middleRows(k * n, n);
  });
  return out;
}

Var Graph::blend(Var fresh, Var old, Eigen::VectorXd keep) {
  const Matrix& F = value(fresh);
  const Matrix& O = value(old);
  require(F.rows() == O.rows() && F.cols() == O.cols() && keep.size() == F.rows(), "blend",
          shape(F) + " vs " + shape(O));
  Matrix C(F.rows(), F.cols());
  for (Eigen::Index r = 0; r < F.rows(); ++r) C.row(r) = keep(r) * F.row(r) + (1.0 - keep(r)) * O.row(r);
  Var out = push(std::move(C), needs(fresh) || needs(old));
  on_backward(out, [this, fresh, old, out, keep = std::move(keep)] {
    const Matrix& g = grad_view(out);
    for (Eigen::Index r = 0; r < g.rows(); ++r) {
      if (needs(fresh) && keep(r) != 0.0) grad(fresh).row(r) += keep(r) * g.row(r);
      if (needs(old) && keep(r) != 1.0) grad(old).row(r) += (1.0 - keep(r)) * g.row(r);
    }
  });
  return out;
}

Var Graph::masked_softmax(Var scores, Matrix allowed) {
  const Matrix& S = value(scores);
  require(S.rows() == allowed.rows() && S.cols() == allowed.cols(), "masked_softmax",
          shape(S) + " vs mask " + shape(allowed));
  Matrix Y = Matrix::Zero(S.rows(), S.cols());
  for (Eigen::Index r = 0; r < S.rows(); ++r) {
    double max = -std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < S.cols(); ++c) {
      if (allowed(r, c) == 0.0) continue;
      if (!std::isfinite(S(r, c))) {
        throw NumericalError("masked_softmax: non-finite score in row " + std::to_string(r));
      }
      max = std::max(max, S(r, c));
    }
    if (max == -std::numeric_limits<double>::infinity()) {
      throw std::invalid_argument("masked_softmax: row " + std::to_string(r) + " has no unmasked position");
    }
    double total = 0.0;
    for (Eigen::Index c = 0; c < S.cols(); ++c) {
      if (allowed(r, c) != 0.0) {
        Y(r, c) = std::exp(S(r, c) - max);
        total += Y(r, c);
      }
    }
    Y.row(r) /= total;
  }
  Var out = push(std::move(Y), needs(scores));
  on_backward(out, [this, scores, out] {
    const Matrix& y = value(out);
    const Matrix& g = grad_view(out);
    Matrix& gs = grad(scores);
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      const double dot = y.row(r).dot(g.row(r));
      gs.row(r).array() += y.row(r).array() * (g.row(r).array() - dot);
    }
  });
  return out;
}

Var Graph::block_scores(Var q, Var k, Eigen::Index batch) {
  const Matrix& Q = value(q);
  const Matrix& K = value(k);
  require(batch > 0 && Q.rows() % batch == 0 && K.rows() % batch == 0 && Q.cols() == K.cols(), "block_scores",
          shape(Q) + " vs " + shape(K) + " batch " + std::to_string(batch));
  const Eigen::Index nq = Q.rows() / batch;
  const Eigen::Index nk = K.rows() / batch;
  Matrix S(Q.rows(), nk);
  for (Eigen::Index i = 0; i < nq; ++i) {
    for (Eigen::Index b = 0; b < batch; ++b) {
      const Eigen::Index r = i * batch + b;
      for (Eigen::Index j = 0; j < nk; ++j) S(r, j) = Q.row(r).dot(K.row(j * batch + b));
    }
  }
  Var out = push(std::move(S), needs(q) || needs(k));
  on_backward(out, [this, q, k, out, batch, nq, nk] {
    const Matrix& g = grad_view(out);
    const Matrix& Q = value(q);
    const Matrix& K = value(k);
    for (Eigen::Index i = 0; i < nq; ++i) {
      for (Eigen::Index b = 0; b < batch; ++b) {
        const Eigen::Index r = i * batch + b;
        for (Eigen::Index j = 0; j < nk; ++j) {
          const double gij = g(r, j);
          if (gij == 0.0) continue;
          if (needs(q)) grad(q).row(r) += gij * K.row(j * batch + b);
          if (needs(k)) grad(k).row(j * batch + b) += gij * Q.row(r);
        }
      }
    }
  });
  return out;
}

Var Graph::block_context(Var w, Var v, Eigen::Index batch) {
  const Matrix& W = value(w);
  const Matrix& V = value(v);
  require(batch > 0 && W.rows() % batch == 0 && V.rows() == W.cols() * batch, "block_context",
          shape(W) + " vs " + shape(V) + " batch " + std::to_string(batch));
  const Eigen::Index nq = W.rows() / batch;
  const Eigen::Index nk = W.cols();
  Matrix C = Matrix::Zero(W.rows(), V.cols());
  for (Eigen::Index i = 0; i < nq; ++i) {
    for (Eigen::Index b = 0; b < batch; ++b) {
      const Eigen::Index r = i * batch + b;
      for (Eigen::Index j = 0; j < nk; ++j) {
        if (W(r, j) != 0.0) C.row(r) += W(r, j) * V.row(j * batch + b);
      }
    }
  }
  Var out = push(std::move(C), needs(w) || needs(v));
  on_backward(out, [this, w, v, out, batch, nq, nk] {
    const Matrix& g = grad_view(out);
    const Matrix& W = value(w);
    const Matrix& V = value(v);
    for (Eigen::Index i = 0; i < nq; ++i) {
      for (Eigen::Index b = 0; b < batch; ++b) {
        const Eigen::Index r = i * batch + b;
        for (Eigen::Index j = 0; j < nk; ++j) {
          if (needs(w)) grad(w)(r, j) += g.row(r).dot(V.row(j * batch + b));
          if (needs(v) && W(r, j) != 0.0) grad(v).row(j * batch + b) += W(r, j) * g.row(r);
        }
      }
    }
  });
  return out;
}

Var Graph::unstack_time(Var x, Eigen::Index batch) {
  const Matrix& X = value(x);
  require(batch > 0 && X.cols() == 1 && X.rows() % batch == 0, "unstack_time", shape(X));
  const Eigen::Index steps = X.rows() / batch;
  Matrix C(batch, steps);
  for (Eigen::Index j = 0; j < steps; ++j) {
    for (Eigen::Index b = 0; b < batch; ++b) C(b, j) = X(j * batch + b, 0);
  }
  Var out = push(std::move(C), needs(x));
  on_backward(out, [this, x, out, batch, steps] {
    Matrix& g = grad(x);
    const Matrix& go = grad_view(out);
    for (Eigen::Index j = 0; j < steps; ++j) {
      for (Eigen::Index b = 0; b < batch; ++b) g(j * batch + b, 0) += go(b, j);
    }
  });
  return out;
}

Var Graph::layer_norm(Var x, Var gain, Var bias, double eps) {
  const Matrix& X = value(x);
  const Matrix& G = value(gain);
  const Matrix& B = value(bias);
  require(G.rows() == 1 && B.rows() == 1 && G.cols() == X.cols() && B.cols() == X.cols(), "layer_norm",
          shape(X) + " with gain " + shape(G));
  const auto n = static_cast<double>(X.cols());
  Matrix xhat(X.rows(), X.cols());
  Eigen::VectorXd inv_std(X.rows());
  for (Eigen::Index r = 0; r < X.rows(); ++r) {
    const double mean = X.row(r).mean();
    const double var = (X.row(r).array() - mean).square().sum() / n;
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (X.row(r).array() - mean) * inv_std(r);
  }
  Matrix Y = xhat.array().rowwise() * G.row(0).array();
  Y.rowwise() += B.row(0);
  Var out = push(std::move(Y), needs(x) || needs(gain) || needs(bias));
  on_backward(out, [this, x, gain, bias, out, xhat = std::move(xhat), inv_std = std::move(inv_std), n] {
    const Matrix& g = grad_view(out);
    if (needs(gain)) grad(gain) += g.cwiseProduct(xhat).colwise().sum();
    if (needs(bias)) grad(bias) += g.colwise().sum();
    if (needs(x)) {
      const Matrix& G = value(gain);
      Matrix& gx = grad(x);
      for (Eigen::Index r = 0; r < g.rows(); ++r) {
        const RowVector dxhat = g.row(r).cwiseProduct(G.row(0));
        const double mean_d = dxhat.sum() / n;
        const double mean_dx = dxhat.dot(xhat.row(r)) / n;
        gx.row(r).array() += inv_std(r) * (dxhat.array() - mean_d - xhat.row(r).array() * mean_dx);
      }
    }
  });
  return out;
}

Var Graph::cross_entropy(Var logits, std::vector<int> targets, std::vector<double> weights,
                         std::vector<double>* row_nll) {
  const Matrix& L = value(logits);
  require(static_cast<Eigen::Index>(targets.size()) == L.rows() && weights.size() == targets.size(),
          "cross_entropy", "targets/weights do not match " + shape(L));
  double total_weight = 0.0;
  for (const double w : weights) total_weight += w;
  require(total_weight > 0.0, "cross_entropy", "no unmasked target positions");

  Matrix probs(L.rows(), L.cols());
  double loss = 0.0;
  if (row_nll) row_nll->assign(targets.size(), 0.0);
  for (Eigen::Index r = 0; r < L.rows(); ++r) {
    const int t = targets[static_cast<std::size_t>(r)];
    if (t < 0 || t >= L.cols()) throw std::out_of_range("target id " + std::to_string(t) + " outside logits");
    const double max = L.row(r).maxCoeff();
    probs.row(r) = (L.row(r).array() - max).exp();
    const double z = probs.row(r).sum();
    probs.row(r) /= z;
    const double nll = -(L(r, t) - max - std::log(z));
    if (row_nll) (*row_nll)[static_cast<std::size_t>(r)] = nll;
    loss += weights[static_cast<std::size_t>(r)] * nll;
  }
  Matrix value(1, 1);
  value(0, 0) = loss / total_weight;
  Var out = push(std::move(value), needs(logits));
  on_backward(out, [this, logits, out, probs = std::move(probs), targets = std::move(targets),
                    weights = std::move(weights), total_weight] {
    const double g = grad_view(out)(0, 0);
    Matrix& gl = grad(logits);
    for (Eigen::Index r = 0; r < probs.rows(); ++r) {
      const double w = weights[static_cast<std::size_t>(r)];
      if (w == 0.0) continue;
      const double coeff = g * w / total_weight;
      gl.row(r) += coeff * probs.row(r);
      gl(r, targets[static_cast<std::size_t>(r)]) -= coeff;
    }
  });
  return out;
}

}  // namespace nmt::model
