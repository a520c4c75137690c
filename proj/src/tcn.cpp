#include <cmath>
#include <stdexcept>
#include <string>

#include "gridcast/networks.hpp"

namespace gridcast::models {

std::size_t tcn_num_layers(std::size_t lookback, std::size_t dilation_base, std::size_t kernel_size) {
  if (kernel_size < 2 || dilation_base < 2 || lookback < 1)
    throw std::invalid_argument("tcn_num_layers: requires l >= 1, k >= 2 and b >= 2");
  // Smallest n with b^n >= (l-1)(b-1)/(k-1) + 1, i.e. the ceiling of the
  // coverage logarithm, evaluated in integers so exact powers stay exact.
  const std::size_t need = (lookback - 1) * (dilation_base - 1);
  std::size_t n = 0;
  std::size_t power = 1;
  while ((kernel_size - 1) * (power - 1) < need) {
    power *= dilation_base;
    ++n;
  }
  return n;
}

std::size_t tcn_receptive_field(std::size_t layers, std::size_t kernel_size, std::size_t dilation_base) {
  if (kernel_size < 1 || dilation_base < 2) throw std::invalid_argument("tcn_receptive_field: requires k >= 1, b >= 2");
  std::size_t power = 1;
  for (std::size_t i = 0; i < layers; ++i) power *= dilation_base;
  return 1 + (kernel_size - 1) * (power - 1) / (dilation_base - 1);
}

void TcnConfig::validate() const {
  if (kernel_size < 2) throw std::invalid_argument("tcn: kernel_size must be >= 2");
  if (dilation_base < 2) throw std::invalid_argument("tcn: dilation_base must be >= 2");
  if (num_filters < 1) throw std::invalid_argument("tcn: num_filters must be >= 1");
  if (horizon < 1 || lookback < horizon)
    throw std::invalid_argument("tcn: lookback must be at least the horizon (the head reads the last positions)");
}

std::size_t TcnConfig::resolved_layers() const {
  return num_layers > 0 ? num_layers : tcn_num_layers(lookback, dilation_base, kernel_size);
}

namespace {

ad::Tensor uniform(ad::Shape shape, double bound, std::mt19937_64& rng) {
  ad::Tensor t(std::move(shape));
  std::uniform_real_distribution<double> u(-bound, bound);
  for (auto& v : t.data()) v = u(rng);
  return t;
}

}  // namespace

Tcn::Tcn(const TcnConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  layers_ = cfg_.resolved_layers();
  std::mt19937_64 rng(seed);
  const std::size_t f = cfg_.num_filters, k = cfg_.kernel_size;
  std::size_t channels = 1 + cfg_.covariate_width;
  for (std::size_t i = 0; i < layers_; ++i) {
    const std::string p = "layer" + std::to_string(i) + ".";
    const double fan_in = static_cast<double>(channels * k);
    params_.add(p + "conv.w", uniform({f, channels, k}, 1.0 / std::sqrt(fan_in), rng));
    params_.add(p + "conv.b", ad::Tensor({f}, 0.0));
    if (channels != f) {
      params_.add(p + "proj.w", uniform({f, channels, 1}, 1.0 / std::sqrt(static_cast<double>(channels)), rng));
      params_.add(p + "proj.b", ad::Tensor({f}, 0.0));
    }
    channels = f;
  }
  const std::size_t head_in = f * cfg_.horizon;
  params_.add("head.w", uniform({head_in, cfg_.horizon}, 1.0 / std::sqrt(static_cast<double>(head_in)), rng));
  params_.add("head.b", ad::Tensor({cfg_.horizon}, 0.0));
}

ad::Tensor Tcn::channels(const Batch& batch) {
  const std::size_t B = batch.size, L = batch.lookback, C = CovariateMatrix::kWidth;
  if (batch.past_cov.shape() != ad::Shape{B, L, C}) throw std::invalid_argument("tcn: batch lacks covariates");
  ad::Tensor x({B, 1 + C, L});
  for (std::size_t r = 0; r < B; ++r) {
    double* base = x.data().data() + r * (1 + C) * L;
    for (std::size_t t = 0; t < L; ++t) base[t] = batch.load[r * L + t];
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t t = 0; t < L; ++t) base[(1 + c) * L + t] = batch.past_cov[(r * L + t) * C + c];
  }
  return x;
}

Tcn::Trace Tcn::trace(ad::Graph& g, ad::Var input) const {
  const ad::Shape shape = g.shape(input);
  const std::size_t L = cfg_.lookback, H = cfg_.horizon;
  if (shape.size() != 3 || shape[1] != 1 + cfg_.covariate_width || shape[2] != L)
    throw std::invalid_argument("tcn: expected input [B, " + std::to_string(1 + cfg_.covariate_width) + ", " +
                                std::to_string(L) + "], got " + ad::to_string(shape));
  Trace tr;
  ad::Var x = input;
  std::size_t dilation = 1;
  for (std::size_t i = 0; i < layers_; ++i) {
    const std::string p = "layer" + std::to_string(i) + ".";
    ad::Var conv = g.relu(g.causal_conv1d(x, g.param(p + "conv.w"), g.param(p + "conv.b"), dilation));
    ad::Var skip = x;
    if (params_.find(p + "proj.w")) skip = g.causal_conv1d(x, g.param(p + "proj.w"), g.param(p + "proj.b"), 1);
    x = g.add(conv, skip);
    tr.layers.push_back(x);
    dilation *= cfg_.dilation_base;
  }
  const std::size_t B = shape[0], f = cfg_.num_filters;
  ad::Var tail = g.slice(x, 2, L - H, L);
  ad::Var flat = g.reshape(tail, {B, f * H});
  tr.output = g.affine(flat, g.param("head.w"), g.param("head.b"));
  return tr;
}

ad::Var Tcn::forward(ad::Graph& g, const Batch& batch, Mode, std::mt19937_64*) const {
  if (batch.lookback != cfg_.lookback || batch.horizon != cfg_.horizon)
    throw std::invalid_argument("tcn: batch lookback/horizon do not match the model");
  return trace(g, g.input(channels(batch))).output;
}

}  // namespace gridcast::models
