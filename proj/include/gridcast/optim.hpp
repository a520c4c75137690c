#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "gridcast/graph.hpp"

namespace gridcast::ad {

struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::int64_t step = 0;
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEpsilon = 1e-8;

/// One bias-corrected Adam update. State is lazily sized on first use.
/// Throws std::domain_error on non-finite gradients (parameters untouched).
void adam_step(ParameterSet& params, const std::vector<Tensor>& grads, AdamState& state,
               double learning_rate);

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 256;
  std::size_t max_epochs = 300;
  std::size_t patience = 10;
  double min_delta = 1e-4;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainingStats {
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;  ///< 1-based
  double wall_seconds = 0.0;
  double best_validation_loss = 0.0;
  std::vector<std::pair<double, double>> loss_curve;  ///< (train, validation) per epoch
};

/// Training diverged; `last_finite_epoch` is the last epoch whose losses were finite (0 if none).
class DivergenceError : public std::runtime_error {
public:
  DivergenceError(std::size_t last_finite_epoch, const std::string& what)
      : std::runtime_error(what), last_finite_epoch_(last_finite_epoch) {}
  std::size_t last_finite_epoch() const noexcept { return last_finite_epoch_; }

private:
  std::size_t last_finite_epoch_;
};

/// What fit() needs from a model: its parameters, a batch loss builder and a
/// validation loss evaluator.
struct FitProblem {
  ParameterSet* params = nullptr;
  std::size_t train_size = 0;
  /// Builds the training loss for the given sample indices. `rng` drives
  /// stochastic layers (dropout).
  std::function<Var(Graph&, std::span<const std::size_t>, std::mt19937_64& rng)> batch_loss;
  std::function<double()> validation_loss;
};

/// Mini-batch Adam with early stopping on validation loss; restores the
/// best-validation parameters before returning.
TrainingStats fit(FitProblem& problem, const TrainConfig& cfg);

}  // namespace gridcast::ad
