#pragma once

#include <span>
#include <vector>

#include "nmt/common/matrix.hpp"
#include "nmt/model/seq2seq.hpp"

namespace nmt::model {

// Encoder states of one source sentence, M x hidden.
Matrix encode(const Seq2Seq& model, std::span<const int> source);

struct DecoderState {
  std::vector<RowVector> h;
  std::vector<RowVector> c;
  RowVector feed;
};

DecoderState initial_decoder_state(const Seq2Seq& model);

struct StepResult {
  RowVector logits;  // |target vocab|
  DecoderState state;
  RowVector attention;  // M, sums to 1
};

// One inference step. Throws std::out_of_range for an invalid token id.
StepResult decode_step(const Seq2Seq& model, int previous, const DecoderState& state, const Matrix& encoder_states);

// Log-softmax over a row of logits.
RowVector log_softmax(const RowVector& logits);

struct Hypothesis {
  std::vector<int> tokens;  // ends in EOS unless max_len was reached first
  double log_prob = 0.0;    // sum of the chosen tokens' log-probabilities
  Matrix attention;         // tokens.size() x M

  double normalized() const { return tokens.empty() ? log_prob : log_prob / static_cast<double>(tokens.size()); }
};

// Ties go to the lowest token id.
Hypothesis greedy_decode(const Seq2Seq& model, std::span<const int> source, std::size_t max_len);

// Greedy decoding of many sources at once, for evaluation.
std::vector<Hypothesis> greedy_decode_batch(const Seq2Seq& model, const std::vector<std::vector<int>>& sources,
                                            std::size_t max_len);

/// Beam search. Each step keeps the `beam` best expansions by cumulative
/// log-prob (ties: lower hypothesis index, then lower token id); a
/// hypothesis that emits EOS is set aside and the live beam shrinks by one.
/// Hypotheses still live at max_len are kept as they are. The result is
/// sorted by log_prob / length, best first. Throws std::invalid_argument
/// when beam is 0.
std::vector<Hypothesis> beam_decode(const Seq2Seq& model, std::span<const int> source, std::size_t beam,
                                    std::size_t max_len);

}  // namespace nmt::model
