#include "gridcast/window_data.hpp"

#include <stdexcept>

namespace gridcast::models {

FeatureScaler FeatureScaler::fit(std::span<const double> load, const CovariateMatrix& cov) {
  FeatureScaler s;
  s.load = ZScore::fit(load);
  const std::size_t rows = cov.rows();
  std::vector<double> column(rows);
  for (std::size_t j = 0; j < CovariateMatrix::kWidth; ++j) {
    for (std::size_t i = 0; i < rows; ++i) column[i] = cov(i, j);
    s.covariates[j] = ZScore::fit(column);
  }
  return s;
}

WindowSource WindowSource::make(std::span<const double> load_mw, const CovariateMatrix& cov,
                                const FeatureScaler& scaler) {
  WindowSource w;
  w.load.resize(load_mw.size());
  for (std::size_t i = 0; i < load_mw.size(); ++i) w.load[i] = scaler.load.apply(load_mw[i]);
  w.cov.resize(cov.data().size());
  constexpr std::size_t width = CovariateMatrix::kWidth;
  for (std::size_t i = 0; i < cov.rows(); ++i)
    for (std::size_t j = 0; j < width; ++j) w.cov[i * width + j] = scaler.covariates[j].apply(cov(i, j));
  return w;
}

Batch make_batch(const WindowSource& src, std::span<const std::size_t> starts, std::size_t lookback,
                 std::size_t horizon, bool with_covariates, bool with_target) {
  constexpr std::size_t width = CovariateMatrix::kWidth;
  Batch b;
  b.size = starts.size();
  b.lookback = lookback;
  b.horizon = horizon;
  if (b.size == 0) throw std::invalid_argument("make_batch: empty batch");
  b.load = ad::Tensor({b.size, lookback});
  if (with_covariates) {
    b.past_cov = ad::Tensor({b.size, lookback, width});
    b.future_cov = ad::Tensor({b.size, horizon, width});
  }
  if (with_target) b.target = ad::Tensor({b.size, horizon});
  for (std::size_t r = 0; r < b.size; ++r) {
    const std::size_t s = starts[r];
    if (s < lookback || s > src.load.size()) throw std::out_of_range("make_batch: window outside the series");
    if (with_target && s + horizon > src.load.size()) throw std::out_of_range("make_batch: target outside the series");
    if (with_covariates && s + horizon > src.cov_rows()) throw std::out_of_range("make_batch: covariates too short");
    for (std::size_t t = 0; t < lookback; ++t) b.load[r * lookback + t] = src.load[s - lookback + t];
    if (with_target)
      for (std::size_t t = 0; t < horizon; ++t) b.target[r * horizon + t] = src.load[s + t];
    if (with_covariates) {
      std::copy_n(src.cov.data() + (s - lookback) * width, lookback * width,
                  b.past_cov.data().data() + r * lookback * width);
      std::copy_n(src.cov.data() + s * width, horizon * width, b.future_cov.data().data() + r * horizon * width);
    }
  }
  return b;
}

std::vector<std::size_t> window_starts(std::size_t first, std::size_t end, std::size_t lookback,
                                       std::size_t horizon, std::size_t stride) {
  if (stride == 0) throw std::invalid_argument("window_starts: stride must be >= 1");
  std::vector<std::size_t> out;
  for (std::size_t s = first; s + horizon <= end; s += stride)
    if (s >= lookback) out.push_back(s);
  return out;
}

}  // namespace gridcast::models
