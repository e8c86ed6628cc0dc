#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "nmt/common/error.hpp"
#include "nmt/model/config.hpp"
#include "nmt/model/seq2seq.hpp"

namespace nmt::model {

struct LossAndGrads {
  double loss = 0.0;
  std::vector<Matrix> grads;  // one per model tensor, same order and shapes
};

/// Mean token cross-entropy of a batch and its exact gradients.
/// Throws std::invalid_argument for an empty batch or a PAD-only target and
/// NumericalError (naming the batch index) when the loss is not finite.
LossAndGrads loss_and_grads(const Seq2Seq& model, const std::vector<Example>& batch,
                            const DropoutContext& dropout = {}, bool freeze_embeddings = false);

struct AdamOptions {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  std::size_t step = 0;
};

// Bias-corrected Adam. An empty state is sized on the first call; shape
// mismatches throw std::invalid_argument.
void adam_step(std::vector<Matrix*> params, const std::vector<Matrix>& grads, AdamState& state,
               const AdamOptions& options);

// Scales gradients so their global L2 norm is at most max_norm; returns
// the norm before clipping.
double clip_gradients(std::vector<Matrix>& grads, double max_norm);

class TrainingDiverged : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

struct TrainResult {
  std::vector<double> losses;  // one per step
  std::size_t checkpoints_written = 0;
};

// Called every `log_every` steps with (step, loss).
using TrainLogger = std::function<void(std::size_t, double)>;

/// Minibatch Adam training with seeded shuffling and dropout.
///
/// Checkpoints (with `checkpoint_text` blocks) go to config.checkpoint_path
/// every config.checkpoint_every steps and at the end. A non-finite loss
/// restores the parameters of the last checkpoint and throws
/// TrainingDiverged.
TrainResult train(Seq2Seq& model, const std::vector<Example>& data, const TrainConfig& config,
                  const std::map<std::string, std::string>& checkpoint_text = {}, const TrainLogger& log = {});

}  // namespace nmt::model
