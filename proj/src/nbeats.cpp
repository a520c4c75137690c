#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>

#include "gridcast/networks.hpp"

namespace gridcast::models {

namespace {

ad::Tensor uniform(ad::Shape shape, double bound, std::mt19937_64& rng) {
  ad::Tensor t(std::move(shape));
  std::uniform_real_distribution<double> u(-bound, bound);
  for (auto& v : t.data()) v = u(rng);
  return t;
}

}  // namespace

void NBeatsConfig::validate() const {
  if (stacks < 1 || blocks_per_stack < 1 || layers_per_block < 1 || layer_width < 1 ||
      expansion_coefficient_dim < 1 || lookback < 1 || horizon < 1)
    throw std::invalid_argument("nbeats: all sizes must be positive");
}

NBeats::NBeats(const NBeatsConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  std::mt19937_64 rng(seed);
  const std::size_t w = cfg_.layer_width, e = cfg_.expansion_coefficient_dim;
  for (std::size_t b = 0; b < block_count(); ++b) {
    const std::string p = "block" + std::to_string(b) + ".";
    for (std::size_t l = 0; l < cfg_.layers_per_block; ++l) {
      const std::size_t in = l == 0 ? cfg_.lookback : w;
      params_.add(p + "fc" + std::to_string(l) + ".w", uniform({in, w}, std::sqrt(6.0 / in), rng));
      params_.add(p + "fc" + std::to_string(l) + ".b", ad::Tensor({w}, 0.0));
    }
    params_.add(p + "theta_b", uniform({w, e}, std::sqrt(3.0 / w), rng));
    params_.add(p + "theta_f", uniform({w, e}, std::sqrt(3.0 / w), rng));
    params_.add(p + "backcast.w", uniform({e, cfg_.lookback}, std::sqrt(3.0 / e), rng));
    params_.add(p + "backcast.b", ad::Tensor({cfg_.lookback}, 0.0));
    params_.add(p + "forecast.w", uniform({e, cfg_.horizon}, std::sqrt(3.0 / e), rng));
    params_.add(p + "forecast.b", ad::Tensor({cfg_.horizon}, 0.0));
  }
}

NBeats::Trace NBeats::trace(ad::Graph& g, ad::Var input) const {
  const ad::Shape shape = g.shape(input);
  if (shape.size() != 2 || shape[1] != cfg_.lookback)
    throw std::invalid_argument("nbeats: expected input [B, " + std::to_string(cfg_.lookback) + "], got " +
                                ad::to_string(shape));
  Trace tr;
  ad::Var residual = input;
  std::optional<ad::Var> total;
  // Parameters are registered in a fixed per-block order; walk them by index.
  std::size_t idx = 0;
  for (std::size_t b = 0; b < block_count(); ++b) {
    ad::Var h = residual;
    for (std::size_t l = 0; l < cfg_.layers_per_block; ++l) {
      ad::Var w = g.param(idx++);
      ad::Var bias = g.param(idx++);
      h = g.relu(g.affine(h, w, bias));
    }
    ad::Var theta_b = g.matmul(h, g.param(idx++));
    ad::Var theta_f = g.matmul(h, g.param(idx++));
    ad::Var bw = g.param(idx++);
    ad::Var bb = g.param(idx++);
    ad::Var backcast = g.affine(theta_b, bw, bb);
    ad::Var fw = g.param(idx++);
    ad::Var fb = g.param(idx++);
    ad::Var forecast = g.affine(theta_f, fw, fb);
    residual = g.sub(residual, backcast);
    total = total ? g.add(*total, forecast) : forecast;
    tr.backcasts.push_back(backcast);
    tr.forecasts.push_back(forecast);
  }
  tr.residual = residual;
  tr.output = *total;
  return tr;
}

ad::Var NBeats::forward(ad::Graph& g, const Batch& batch, Mode, std::mt19937_64*) const {
  if (batch.lookback != cfg_.lookback || batch.horizon != cfg_.horizon)
    throw std::invalid_argument("nbeats: batch lookback/horizon do not match the model");
  return trace(g, g.input(batch.load)).output;
}

}  // namespace gridcast::models
