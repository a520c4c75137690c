#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>

#include "gridcast/networks.hpp"

namespace gridcast::models {

void LstmEdConfig::validate() const {
  if (recurrent_layers < 1) throw std::invalid_argument("lstm: recurrent_layers must be >= 1");
  if (hidden_dim < 1) throw std::invalid_argument("lstm: hidden_dim must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("lstm: dropout must lie in [0,1)");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("lstm: learning_rate must be > 0");
  if (lookback < 1 || horizon < 1) throw std::invalid_argument("lstm: lookback and horizon must be >= 1");
}

namespace {

void add_cell(ad::ParameterSet& ps, const std::string& name, std::size_t in, std::size_t hid, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hid));
  std::uniform_real_distribution<double> u(-bound, bound);
  ad::Tensor w({in + hid, 4 * hid});
  for (auto& v : w.data()) v = u(rng);
  ad::Tensor b({4 * hid}, 0.0);
  for (std::size_t j = hid; j < 2 * hid; ++j) b[j] = 1.0;  // forget gate
  ps.add(name + ".w", std::move(w));
  ps.add(name + ".b", std::move(b));
}

}  // namespace

LstmEncoderDecoder::LstmEncoderDecoder(const LstmEdConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  std::mt19937_64 rng(seed);
  const std::size_t in = 1 + cfg_.covariate_width, hid = cfg_.hidden_dim;
  for (std::size_t l = 0; l < cfg_.recurrent_layers; ++l)
    add_cell(params_, "encoder" + std::to_string(l), l == 0 ? in : hid, hid, rng);
  for (std::size_t l = 0; l < cfg_.recurrent_layers; ++l)
    add_cell(params_, "decoder" + std::to_string(l), l == 0 ? in : hid, hid, rng);
  const double bound = std::sqrt(3.0 / static_cast<double>(hid));
  std::uniform_real_distribution<double> u(-bound, bound);
  ad::Tensor hw({hid, 1});
  for (auto& v : hw.data()) v = u(rng);
  params_.add("head.w", std::move(hw));
  params_.add("head.b", ad::Tensor({1}, 0.0));
}

ad::Var LstmEncoderDecoder::forward(ad::Graph& g, const Batch& batch, Mode mode, std::mt19937_64* rng) const {
  const std::size_t B = batch.size, L = cfg_.lookback, H = cfg_.horizon, C = cfg_.covariate_width;
  const std::size_t hid = cfg_.hidden_dim, layers = cfg_.recurrent_layers;
  if (batch.lookback != L || batch.horizon != H || batch.past_cov.empty() ||
      batch.past_cov.shape() != ad::Shape{B, L, C} || batch.future_cov.shape() != ad::Shape{B, H, C})
    throw std::invalid_argument("lstm: batch shapes do not match the model configuration");
  if (mode == Mode::Train && batch.target.empty()) throw std::invalid_argument("lstm: training needs targets");
  const bool drop = mode == Mode::Train && cfg_.dropout > 0.0;
  if (drop && !rng) throw std::invalid_argument("lstm: dropout needs a random generator");

  std::vector<ad::Var> enc_w, enc_b, dec_w, dec_b;
  for (std::size_t l = 0; l < layers; ++l) {
    enc_w.push_back(g.param("encoder" + std::to_string(l) + ".w"));
    enc_b.push_back(g.param("encoder" + std::to_string(l) + ".b"));
    dec_w.push_back(g.param("decoder" + std::to_string(l) + ".w"));
    dec_b.push_back(g.param("decoder" + std::to_string(l) + ".b"));
  }
  ad::Var head_w = g.param("head.w"), head_b = g.param("head.b");

  auto step_input = [&](const ad::Tensor& cov, std::size_t len, std::size_t t, const double* first) {
    ad::Tensor x({B, 1 + C});
    for (std::size_t r = 0; r < B; ++r) {
      x[r * (1 + C)] = first ? first[r] : 0.0;
      std::copy_n(cov.data().data() + (r * len + t) * C, C, x.data().data() + r * (1 + C) + 1);
    }
    return x;
  };
  auto run_stack = [&](ad::Var x, std::vector<ad::Var>& states, const std::vector<ad::Var>& ws,
                       const std::vector<ad::Var>& bs) {
    ad::Var in = x;
    for (std::size_t l = 0; l < layers; ++l) {
      if (l > 0 && drop) in = g.dropout(in, cfg_.dropout, *rng);
      states[l] = g.lstm_cell(in, states[l], ws[l], bs[l]);
      in = g.slice(states[l], 1, 0, hid);
    }
    return in;  // top hidden state
  };

  std::vector<ad::Var> states(layers, g.input(ad::Tensor({B, 2 * hid}, 0.0)));
  std::vector<double> column(B);
  for (std::size_t t = 0; t < L; ++t) {
    for (std::size_t r = 0; r < B; ++r) column[r] = batch.load[r * L + t];
    run_stack(g.input(step_input(batch.past_cov, L, t, column.data())), states, enc_w, enc_b);
  }

  std::vector<ad::Var> outputs;
  outputs.reserve(H);
  std::optional<ad::Var> prev_pred;
  for (std::size_t t = 0; t < H; ++t) {
    ad::Var x;
    if (mode == Mode::Train || t == 0) {
      for (std::size_t r = 0; r < B; ++r)
        column[r] = t == 0 ? batch.load[r * L + L - 1] : batch.target[r * H + t - 1];
      x = g.input(step_input(batch.future_cov, H, t, column.data()));
    } else {
      ad::Tensor cov({B, C});
      for (std::size_t r = 0; r < B; ++r)
        std::copy_n(batch.future_cov.data().data() + (r * H + t) * C, C, cov.data().data() + r * C);
      x = g.concat({*prev_pred, g.input(std::move(cov))}, 1);
    }
    ad::Var top = run_stack(x, states, dec_w, dec_b);
    ad::Var y = g.affine(top, head_w, head_b);
    outputs.push_back(y);
    prev_pred = y;
  }
  return g.concat(outputs, 1);
}

}  // namespace gridcast::models
