#include "gridcast/optim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace gridcast::ad {

void adam_step(ParameterSet& params, const std::vector<Tensor>& grads, AdamState& state,
               double learning_rate) {
  if (grads.size() != params.size())
    throw std::invalid_argument("adam: gradient count does not match parameter count");
  if (state.m.empty()) {
    for (const auto& p : params.values()) {
      state.m.emplace_back(p.shape(), 0.0);
      state.v.emplace_back(p.shape(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw std::invalid_argument("adam: state does not match parameters");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].shape() != params.value(i).shape() || state.m[i].shape() != params.value(i).shape())
      throw std::invalid_argument("adam: shape mismatch for parameter '" + params.name(i) + "'");
    if (!grads[i].all_finite())
      throw std::domain_error("adam: non-finite gradient for parameter '" + params.name(i) + "'");
  }

  ++state.step;
  const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params.value(i);
    Tensor& m = state.m[i];
    Tensor& v = state.v[i];
    const Tensor& g = grads[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = kAdamBeta1 * m[j] + (1.0 - kAdamBeta1) * g[j];
      v[j] = kAdamBeta2 * v[j] + (1.0 - kAdamBeta2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      p[j] -= learning_rate * mhat / (std::sqrt(vhat) + kAdamEpsilon);
    }
  }
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("train: learning_rate must be > 0");
  if (patience < 1) throw std::invalid_argument("train: patience must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (max_epochs < 1) throw std::invalid_argument("train: max_epochs must be >= 1");
  if (!(min_delta >= 0.0)) throw std::invalid_argument("train: min_delta must be >= 0");
}

TrainingStats fit(FitProblem& problem, const TrainConfig& cfg) {
  cfg.validate();
  if (!problem.params || !problem.batch_loss || !problem.validation_loss)
    throw std::invalid_argument("fit: incomplete problem definition");
  if (problem.train_size == 0) throw std::invalid_argument("fit: empty training set");

  const auto t0 = std::chrono::steady_clock::now();
  ParameterSet& params = *problem.params;
  std::mt19937_64 rng(cfg.seed);
  AdamState adam;
  TrainingStats stats;
  stats.best_validation_loss = std::numeric_limits<double>::infinity();
  std::vector<Tensor> best = params.values();
  std::size_t stale = 0;
  double reference = std::numeric_limits<double>::infinity();

  std::vector<std::size_t> order(problem.train_size);
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      const std::size_t e = std::min(order.size(), b + cfg.batch_size);
      std::span<const std::size_t> batch(order.data() + b, e - b);
      double batch_loss = 0.0;
      try {
        Graph g(params);
        Var loss = problem.batch_loss(g, batch, rng);
        batch_loss = g.value(loss).item();
        if (!std::isfinite(batch_loss)) throw std::domain_error("non-finite training loss");
        adam_step(params, g.backward(loss), adam, cfg.learning_rate);
      } catch (const std::domain_error& err) {
        params.values() = best;
        throw DivergenceError(epoch - 1, "training diverged in epoch " + std::to_string(epoch) + ": " + err.what());
      }
      loss_sum += batch_loss * static_cast<double>(e - b);
    }
    const double train_loss = loss_sum / static_cast<double>(order.size());
    double val_loss = 0.0;
    try {
      val_loss = problem.validation_loss();
    } catch (const std::domain_error&) {
      val_loss = std::numeric_limits<double>::quiet_NaN();
    }
    if (!std::isfinite(val_loss)) {
      params.values() = best;
      throw DivergenceError(epoch - 1, "validation loss became non-finite in epoch " + std::to_string(epoch));
    }
    stats.loss_curve.emplace_back(train_loss, val_loss);
    stats.epochs_run = epoch;

    // Restore target: best loss ever seen. Stopping: improvement beyond min_delta.
    if (val_loss < stats.best_validation_loss) {
      stats.best_validation_loss = val_loss;
      stats.best_epoch = epoch;
      best = params.values();
    }
    if (val_loss < reference - cfg.min_delta) {
      reference = val_loss;
      stale = 0;
    } else if (++stale >= cfg.patience) {
      break;
    }
  }
  params.values() = best;
  stats.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return stats;
}

}  // namespace gridcast::ad
