#include "nmt/model/decode.hpp"

#include <algorithm>
#include <stdexcept>

#include "nmt/bpe/vocab.hpp"

namespace nmt::model {
namespace {

constexpr int kBos = bpe::Vocab::kBos;
constexpr int kEos = bpe::Vocab::kEos;

struct BatchState {
  std::vector<Matrix> h;
  std::vector<Matrix> c;
  Matrix feed;
};

struct BatchStep {
  Matrix logits;
  BatchState state;
  Matrix attention;
};

BatchState zero_state(const Seq2Seq& model, Eigen::Index batch) {
  const auto hidden = static_cast<Eigen::Index>(model.config().hidden);
  BatchState s;
  s.h.assign(model.config().layers, Matrix::Zero(batch, hidden));
  s.c.assign(model.config().layers, Matrix::Zero(batch, hidden));
  s.feed = Matrix::Zero(batch, hidden);
  return s;
}

// states: (steps*batch) x hidden, time-major; allowed: batch x steps.
BatchStep run_step(const Seq2Seq& model, const Matrix& states, const Matrix& allowed, const std::vector<int>& previous,
                   const BatchState& state) {
  Graph g(false);
  const auto p = model.bind(g, nullptr);
  const auto memory = model.attach(g, p, g.constant(states), allowed);
  Seq2Seq::State s;
  for (std::size_t l = 0; l < state.h.size(); ++l) {
    s.h.push_back(g.constant(state.h[l]));
    s.c.push_back(g.constant(state.c[l]));
  }
  s.feed = g.constant(state.feed);
  auto step = model.step(g, p, memory, previous, s, {});
  BatchStep out;
  out.logits = g.value(model.logits(g, p, step.feed));
  for (std::size_t l = 0; l < state.h.size(); ++l) {
    out.state.h.push_back(g.value(step.state.h[l]));
    out.state.c.push_back(g.value(step.state.c[l]));
  }
  out.state.feed = g.value(step.state.feed);
  out.attention = std::move(step.attention);
  return out;
}

Matrix log_softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) out.row(r) = log_softmax(logits.row(r));
  return out;
}

// Repeats the rows of a batch-1 time-major memory for `copies` hypotheses.
Matrix tile_memory(const Matrix& states, Eigen::Index copies) {
  Matrix out(states.rows() * copies, states.cols());
  for (Eigen::Index t = 0; t < states.rows(); ++t) {
    for (Eigen::Index b = 0; b < copies; ++b) out.row(t * copies + b) = states.row(t);
  }
  return out;
}

BatchState select_rows(const BatchState& s, const std::vector<Eigen::Index>& rows) {
  BatchState out;
  const auto pick = [&](const Matrix& m) {
    Matrix r(static_cast<Eigen::Index>(rows.size()), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) r.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
    return r;
  };
  for (std::size_t l = 0; l < s.h.size(); ++l) {
    out.h.push_back(pick(s.h[l]));
    out.c.push_back(pick(s.c[l]));
  }
  out.feed = pick(s.feed);
  return out;
}

Matrix stack(const std::vector<RowVector>& rows, Eigen::Index cols) {
  Matrix m(static_cast<Eigen::Index>(rows.size()), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = rows[i];
  return m;
}

int argmax_lowest(const auto& row) {
  Eigen::Index best = 0;
  for (Eigen::Index j = 1; j < row.size(); ++j) {
    if (row(j) > row(best)) best = j;
  }
  return static_cast<int>(best);
}

}  // namespace

RowVector log_softmax(const RowVector& logits) {
  const double m = logits.maxCoeff();
  const double lse = m + std::log((logits.array() - m).exp().sum());
  return (logits.array() - lse).matrix();
}

Matrix encode(const Seq2Seq& model, std::span<const int> source) {
  Graph g(false);
  const auto p = model.bind(g, nullptr);
  const auto memory = model.encode(g, p, {std::vector<int>(source.begin(), source.end())}, {});
  return g.value(memory.states);
}

DecoderState initial_decoder_state(const Seq2Seq& model) {
  const auto hidden = static_cast<Eigen::Index>(model.config().hidden);
  DecoderState s;
  s.h.assign(model.config().layers, RowVector::Zero(hidden));
  s.c.assign(model.config().layers, RowVector::Zero(hidden));
  s.feed = RowVector::Zero(hidden);
  return s;
}

StepResult decode_step(const Seq2Seq& model, int previous, const DecoderState& state, const Matrix& encoder_states) {
  BatchState s;
  for (std::size_t l = 0; l < state.h.size(); ++l) {
    s.h.push_back(state.h[l]);
    s.c.push_back(state.c[l]);
  }
  s.feed = state.feed;
  const Matrix allowed = Matrix::Ones(1, encoder_states.rows());
  auto out = run_step(model, encoder_states, allowed, {previous}, s);
  StepResult r;
  r.logits = out.logits.row(0);
  for (std::size_t l = 0; l < out.state.h.size(); ++l) {
    r.state.h.push_back(out.state.h[l].row(0));
    r.state.c.push_back(out.state.c[l].row(0));
  }
  r.state.feed = out.state.feed.row(0);
  r.attention = out.attention.row(0);
  return r;
}

Hypothesis greedy_decode(const Seq2Seq& model, std::span<const int> source, std::size_t max_len) {
  const Matrix states = encode(model, source);
  const Matrix allowed = Matrix::Ones(1, states.rows());
  BatchState state = zero_state(model, 1);
  Hypothesis hyp;
  std::vector<RowVector> attention;
  int previous = kBos;
  while (hyp.tokens.size() < max_len) {
    auto out = run_step(model, states, allowed, {previous}, state);
    const RowVector lp = log_softmax(out.logits.row(0));
    const int token = argmax_lowest(lp);
    hyp.tokens.push_back(token);
    hyp.log_prob += lp(token);
    attention.push_back(out.attention.row(0));
    state = std::move(out.state);
    previous = token;
    if (token == kEos) break;
  }
  hyp.attention = stack(attention, states.rows());
  return hyp;
}

std::vector<Hypothesis> greedy_decode_batch(const Seq2Seq& model, const std::vector<std::vector<int>>& sources,
                                            std::size_t max_len) {
  if (sources.empty()) return {};
  Matrix states;
  Matrix allowed;
  {
    Graph g(false);
    const auto p = model.bind(g, nullptr);
    const auto memory = model.encode(g, p, sources, {});
    states = g.value(memory.states);
    allowed = memory.allowed;
  }
  const auto batch = static_cast<Eigen::Index>(sources.size());
  std::vector<Hypothesis> hyps(sources.size());
  std::vector<std::vector<RowVector>> attention(sources.size());
  std::vector<int> previous(sources.size(), kBos);
  std::vector<bool> done(sources.size(), false);
  BatchState state = zero_state(model, batch);
  for (std::size_t t = 0; t < max_len; ++t) {
    if (std::all_of(done.begin(), done.end(), [](bool d) { return d; })) break;
    auto out = run_step(model, states, allowed, previous, state);
    const Matrix lp = log_softmax_rows(out.logits);
    for (std::size_t b = 0; b < sources.size(); ++b) {
      if (done[b]) continue;
      const auto row = static_cast<Eigen::Index>(b);
      const int token = argmax_lowest(lp.row(row));
      hyps[b].tokens.push_back(token);
      hyps[b].log_prob += lp(row, token);
      attention[b].push_back(out.attention.row(row));
      previous[b] = token;
      if (token == kEos) done[b] = true;
    }
    state = std::move(out.state);
  }
  for (std::size_t b = 0; b < sources.size(); ++b) {
    const auto row = static_cast<Eigen::Index>(b);
    // Drop the padded columns: attention there is exactly zero.
    const auto m = static_cast<Eigen::Index>(allowed.row(row).sum());
    Matrix full = stack(attention[b], allowed.cols());
    hyps[b].attention = full.leftCols(m);
  }
  return hyps;
}

std::vector<Hypothesis> beam_decode(const Seq2Seq& model, std::span<const int> source, std::size_t beam,
                                    std::size_t max_len) {
  if (beam == 0) throw std::invalid_argument("beam must be at least 1");
  const Matrix states = encode(model, source);
  const Eigen::Index m = states.rows();

  struct Live {
    std::vector<int> tokens;
    double log_prob = 0.0;
    std::vector<RowVector> attention;
  };
  struct Candidate {
    double score;
    std::size_t hyp;
    int token;
  };

  std::vector<Live> live(1);
  BatchState state = zero_state(model, 1);
  std::vector<Hypothesis> finished;
  const auto finish = [&](Live&& h) {
    Hypothesis out;
    out.tokens = std::move(h.tokens);
    out.log_prob = h.log_prob;
    out.attention = stack(h.attention, m);
    finished.push_back(std::move(out));
  };

  for (std::size_t t = 0; t < max_len && !live.empty(); ++t) {
    const auto k = static_cast<Eigen::Index>(live.size());
    std::vector<int> previous;
    for (const auto& h : live) previous.push_back(h.tokens.empty() ? kBos : h.tokens.back());
    auto out = run_step(model, tile_memory(states, k), Matrix::Ones(k, m), previous, state);
    const Matrix lp = log_softmax_rows(out.logits);

    std::vector<Candidate> candidates;
    candidates.reserve(static_cast<std::size_t>(lp.size()));
    for (Eigen::Index i = 0; i < k; ++i) {
      for (Eigen::Index j = 0; j < lp.cols(); ++j) {
        candidates.push_back({live[static_cast<std::size_t>(i)].log_prob + lp(i, j), static_cast<std::size_t>(i),
                              static_cast<int>(j)});
      }
    }
    const std::size_t budget = std::min(beam - finished.size(), candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(budget), candidates.end(),
                      [](const Candidate& a, const Candidate& b) {
                        if (a.score != b.score) return a.score > b.score;
                        if (a.hyp != b.hyp) return a.hyp < b.hyp;
                        return a.token < b.token;
                      });

    std::vector<Live> next;
    std::vector<Eigen::Index> rows;
    for (std::size_t c = 0; c < budget; ++c) {
      const auto& cand = candidates[c];
      const auto row = static_cast<Eigen::Index>(cand.hyp);
      Live h = live[cand.hyp];
      h.tokens.push_back(cand.token);
      h.log_prob = cand.score;
      h.attention.push_back(out.attention.row(row));
      if (cand.token == kEos) {
        finish(std::move(h));
      } else {
        next.push_back(std::move(h));
        rows.push_back(row);
      }
    }
    live = std::move(next);
    if (!live.empty()) state = select_rows(out.state, rows);
  }
  for (auto& h : live) finish(std::move(h));

  std::stable_sort(finished.begin(), finished.end(),
                   [](const Hypothesis& a, const Hypothesis& b) { return a.normalized() > b.normalized(); });
  return finished;
}

}  // namespace nmt::model
