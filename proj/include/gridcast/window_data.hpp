#pragma once

#include <array>
#include <span>
#include <vector>

#include "gridcast/covariates.hpp"
#include "gridcast/scaler.hpp"
#include "gridcast/tensor.hpp"

namespace gridcast::models {

inline constexpr std::size_t kHorizon = kStepsPerDay;

/// Training-set statistics for the load and each covariate column.
struct FeatureScaler {
  ZScore load;
  std::array<ZScore, CovariateMatrix::kWidth> covariates{};

  static FeatureScaler fit(std::span<const double> load, const CovariateMatrix& cov);
};

/// Standardized load and covariates over one contiguous stretch of time.
struct WindowSource {
  std::vector<double> load;  ///< may be shorter than cov rows (future rows have no load)
  std::vector<double> cov;   ///< rows x 10

  static WindowSource make(std::span<const double> load_mw, const CovariateMatrix& cov, const FeatureScaler& scaler);
  std::size_t cov_rows() const noexcept { return cov.size() / CovariateMatrix::kWidth; }
};

/// Model inputs for a batch of windows. Each window predicts steps
/// [start, start + horizon) from inputs [start - lookback, start).
struct Batch {
  std::size_t size = 0;
  std::size_t lookback = 0;
  std::size_t horizon = 0;
  ad::Tensor load;        ///< [B, l]
  ad::Tensor past_cov;    ///< [B, l, 10] (empty without covariates)
  ad::Tensor future_cov;  ///< [B, H, 10] (empty without covariates)
  ad::Tensor target;      ///< [B, H] (empty when targets are unknown)
};

Batch make_batch(const WindowSource& src, std::span<const std::size_t> starts, std::size_t lookback,
                 std::size_t horizon, bool with_covariates, bool with_target);

/// Window starts at every `stride`-th step from `first` such that the whole
/// lookback and horizon fit in [0, end).
std::vector<std::size_t> window_starts(std::size_t first, std::size_t end, std::size_t lookback,
                                       std::size_t horizon, std::size_t stride);

}  // namespace gridcast::models
