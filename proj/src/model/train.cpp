#include "nmt/model/train.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "nmt/model/checkpoint.hpp"

namespace nmt::model {
namespace {

bool finite(const Matrix& m) { return m.allFinite(); }

}  // namespace

LossAndGrads loss_and_grads(const Seq2Seq& model, const std::vector<Example>& batch, const DropoutContext& dropout,
                            bool freeze_embeddings) {
  LossAndGrads out;
  out.grads = model.zero_gradients();
  Graph g(true);
  const auto bound = model.bind(g, &out.grads, freeze_embeddings);
  std::vector<double> example_nll;
  const Var loss = model.loss(g, bound, batch, dropout, &example_nll);
  out.loss = g.value(loss)(0, 0);
  if (!std::isfinite(out.loss)) {
    std::size_t bad = 0;
    while (bad < example_nll.size() && std::isfinite(example_nll[bad])) ++bad;
    throw NumericalError("non-finite loss (batch index " + std::to_string(bad) + ")");
  }
  g.backward(loss);
  for (std::size_t i = 0; i < out.grads.size(); ++i) {
    if (!finite(out.grads[i])) throw NumericalError("non-finite gradient for " + model.tensors()[i].name);
  }
  return out;
}

void adam_step(std::vector<Matrix*> params, const std::vector<Matrix>& grads, AdamState& state,
               const AdamOptions& options) {
  if (params.size() != grads.size()) throw std::invalid_argument("adam_step: parameter and gradient counts differ");
  if (state.m.empty() && state.v.empty()) {
    for (const Matrix* p : params) {
      state.m.push_back(Matrix::Zero(p->rows(), p->cols()));
      state.v.push_back(Matrix::Zero(p->rows(), p->cols()));
    }
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw std::invalid_argument("adam_step: optimizer state does not match parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Matrix& p = *params[i];
    if (grads[i].rows() != p.rows() || grads[i].cols() != p.cols() || state.m[i].rows() != p.rows() ||
        state.m[i].cols() != p.cols() || state.v[i].rows() != p.rows() || state.v[i].cols() != p.cols()) {
      throw std::invalid_argument("adam_step: shape mismatch for parameter " + std::to_string(i));
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correct1 = 1.0 - std::pow(options.beta1, t);
  const double correct2 = 1.0 - std::pow(options.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto g = grads[i].array();
    state.m[i].array() = options.beta1 * state.m[i].array() + (1.0 - options.beta1) * g;
    state.v[i].array() = options.beta2 * state.v[i].array() + (1.0 - options.beta2) * g.square();
    params[i]->array() -= options.learning_rate * (state.m[i].array() / correct1) /
                          ((state.v[i].array() / correct2).sqrt() + options.epsilon);
  }
}

double clip_gradients(std::vector<Matrix>& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads) sq += g.squaredNorm();
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (auto& g : grads) g *= s;
  }
  return norm;
}

TrainResult train(Seq2Seq& model, const std::vector<Example>& data, const TrainConfig& config,
                  const std::map<std::string, std::string>& checkpoint_text, const TrainLogger& log) {
  if (data.empty()) throw std::invalid_argument("train: no training examples");
  if (config.batch == 0) throw std::invalid_argument("train: batch must be positive");
  if (!(config.learning_rate > 0.0)) throw std::invalid_argument("train: learning rate must be positive");

  Rng order_rng(config.seed);
  Rng dropout_rng(config.seed ^ 0x9E3779B97F4A7C15ull);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  order_rng.shuffle(std::span<std::size_t>(order));
  std::size_t cursor = 0;

  std::vector<Matrix*> params;
  for (auto& t : model.tensors()) params.push_back(&t.value);
  AdamState adam;
  const AdamOptions adam_options{config.learning_rate, config.beta1, config.beta2, config.epsilon};
  const DropoutContext dropout{model.config().dropout, &dropout_rng};

  TrainResult result;
  std::vector<Tensor> last_good = model.tensors();
  std::size_t last_good_step = 0;
  const auto write_checkpoint = [&](std::size_t step) {
    last_good = model.tensors();
    last_good_step = step;
    if (config.checkpoint_path.empty()) return;
    save_checkpoint(config.checkpoint_path, model, checkpoint_text);
    ++result.checkpoints_written;
  };

  std::vector<Example> batch;
  batch.reserve(config.batch);
  for (std::size_t step = 1; step <= config.max_steps; ++step) {
    batch.clear();
    while (batch.size() < config.batch) {
      if (cursor == order.size()) {
        order_rng.shuffle(std::span<std::size_t>(order));
        cursor = 0;
      }
      batch.push_back(data[order[cursor++]]);
    }
    LossAndGrads lg;
    try {
      lg = loss_and_grads(model, batch, dropout, config.freeze_embeddings);
    } catch (const NumericalError& e) {
      model.tensors() = last_good;
      throw TrainingDiverged("step " + std::to_string(step) + ": " + e.what() + "; parameters restored from step " +
                             std::to_string(last_good_step));
    }
    clip_gradients(lg.grads, config.clip_norm);
    adam_step(params, lg.grads, adam, adam_options);
    result.losses.push_back(lg.loss);
    if (log && config.log_every > 0 && step % config.log_every == 0) log(step, lg.loss);
    if (config.checkpoint_every > 0 && step % config.checkpoint_every == 0) write_checkpoint(step);
  }
  if (config.checkpoint_every == 0 || config.max_steps % config.checkpoint_every != 0) {
    write_checkpoint(config.max_steps);
  }
  return result;
}

}  // namespace nmt::model
