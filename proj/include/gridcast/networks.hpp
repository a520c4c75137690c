#pragma once

// The three neural forecaster architectures. Each owns its ParameterSet and
// builds a [B, horizon] prediction node from a Batch.

#include <cstdint>
#include <random>
#include <vector>

#include "gridcast/graph.hpp"
#include "gridcast/window_data.hpp"

namespace gridcast::models {

enum class Mode { Train, Infer };

class NeuralNet {
public:
  virtual ~NeuralNet() = default;

  virtual ad::ParameterSet& params() noexcept = 0;
  virtual const ad::ParameterSet& params() const noexcept = 0;
  virtual std::size_t lookback() const noexcept = 0;
  virtual std::size_t horizon() const noexcept = 0;
  virtual bool uses_covariates() const noexcept = 0;

  /// `rng` may be null in Infer mode.
  virtual ad::Var forward(ad::Graph& g, const Batch& batch, Mode mode, std::mt19937_64* rng) const = 0;
};

// ---------------------------------------------------------------------------

struct NBeatsConfig {
  std::size_t stacks = 20;
  std::size_t blocks_per_stack = 1;
  std::size_t layers_per_block = 4;
  std::size_t layer_width = 64;
  std::size_t expansion_coefficient_dim = 5;
  std::size_t lookback = 384;
  std::size_t horizon = kHorizon;

  void validate() const;
};

/// Generic N-BEATS: fully connected blocks linked by backcast subtraction,
/// forecast = sum of block forecasts.
class NBeats final : public NeuralNet {
public:
  NBeats(const NBeatsConfig& cfg, std::uint64_t seed);

  struct Trace {
    std::vector<ad::Var> backcasts;
    std::vector<ad::Var> forecasts;
    ad::Var residual;
    ad::Var output;
  };

  const NBeatsConfig& config() const noexcept { return cfg_; }
  ad::ParameterSet& params() noexcept override { return params_; }
  const ad::ParameterSet& params() const noexcept override { return params_; }
  std::size_t lookback() const noexcept override { return cfg_.lookback; }
  std::size_t horizon() const noexcept override { return cfg_.horizon; }
  bool uses_covariates() const noexcept override { return false; }

  ad::Var forward(ad::Graph& g, const Batch& batch, Mode mode, std::mt19937_64* rng) const override;
  /// Forward pass over a [B, l] input node, exposing every block's outputs.
  Trace trace(ad::Graph& g, ad::Var input) const;
  std::size_t block_count() const noexcept { return cfg_.stacks * cfg_.blocks_per_stack; }

private:
  NBeatsConfig cfg_;
  ad::ParameterSet params_;
};

// ---------------------------------------------------------------------------

struct LstmEdConfig {
  std::size_t recurrent_layers = 1;
  std::size_t hidden_dim = 20;
  double dropout = 0.0;
  double learning_rate = 0.0008;
  std::size_t lookback = 384;
  std::size_t horizon = kHorizon;
  std::size_t covariate_width = CovariateMatrix::kWidth;

  void validate() const;
};

/// Encoder-decoder LSTM. The encoder reads (load, covariates) per lookback
/// step; the decoder starts from the encoder's final states and, per horizon
/// step, reads the previous value and that step's covariates.
/// Training feeds the true previous value; inference feeds its own prediction.
class LstmEncoderDecoder final : public NeuralNet {
public:
  LstmEncoderDecoder(const LstmEdConfig& cfg, std::uint64_t seed);

  const LstmEdConfig& config() const noexcept { return cfg_; }
  ad::ParameterSet& params() noexcept override { return params_; }
  const ad::ParameterSet& params() const noexcept override { return params_; }
  std::size_t lookback() const noexcept override { return cfg_.lookback; }
  std::size_t horizon() const noexcept override { return cfg_.horizon; }
  bool uses_covariates() const noexcept override { return true; }

  ad::Var forward(ad::Graph& g, const Batch& batch, Mode mode, std::mt19937_64* rng) const override;

private:
  LstmEdConfig cfg_;
  ad::ParameterSet params_;
};

// ---------------------------------------------------------------------------

/// Layers needed so a causal dilated stack covers `lookback` steps:
/// ceil(log_b((l - 1)(b - 1)/(k - 1) + 1)).
std::size_t tcn_num_layers(std::size_t lookback, std::size_t dilation_base, std::size_t kernel_size);
/// 1 + (k - 1)(b^n - 1)/(b - 1)
std::size_t tcn_receptive_field(std::size_t layers, std::size_t kernel_size, std::size_t dilation_base);

struct TcnConfig {
  std::size_t kernel_size = 3;
  std::size_t num_filters = 3;
  std::size_t dilation_base = 2;
  std::size_t num_layers = 0;  ///< 0 = derive from the lookback for full coverage
  std::size_t lookback = 384;
  std::size_t horizon = kHorizon;
  std::size_t covariate_width = CovariateMatrix::kWidth;

  void validate() const;
  std::size_t resolved_layers() const;
};

/// Residual stack of causal dilated convolutions over (load, covariates)
/// channels; a dense head maps the last `horizon` positions to the forecast.
class Tcn final : public NeuralNet {
public:
  Tcn(const TcnConfig& cfg, std::uint64_t seed);

  struct Trace {
    std::vector<ad::Var> layers;  ///< [B, filters, l] after each residual layer
    ad::Var output;
  };

  const TcnConfig& config() const noexcept { return cfg_; }
  std::size_t layers() const noexcept { return layers_; }
  ad::ParameterSet& params() noexcept override { return params_; }
  const ad::ParameterSet& params() const noexcept override { return params_; }
  std::size_t lookback() const noexcept override { return cfg_.lookback; }
  std::size_t horizon() const noexcept override { return cfg_.horizon; }
  bool uses_covariates() const noexcept override { return true; }

  ad::Var forward(ad::Graph& g, const Batch& batch, Mode mode, std::mt19937_64* rng) const override;
  /// Forward pass over a [B, channels, l] input node.
  Trace trace(ad::Graph& g, ad::Var input) const;
  /// Stacks load and covariates into the [B, 1 + 10, l] channel layout.
  static ad::Tensor channels(const Batch& batch);

private:
  TcnConfig cfg_;
  std::size_t layers_;
  ad::ParameterSet params_;
};

}  // namespace gridcast::models
