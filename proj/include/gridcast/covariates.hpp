#pragma once

#include <array>
#include <cstddef>
#include <set>
#include <span>
#include <vector>

#include "gridcast/series.hpp"

namespace gridcast {

/// Calendar features of one timestep, in column order:
/// year, month sin/cos, day-of-year sin/cos, day-of-week sin/cos,
/// week-of-year sin/cos, holiday flag.
struct CovariateVector {
  double year = 0.0;
  double month_sin = 0.0, month_cos = 1.0;
  double doy_sin = 0.0, doy_cos = 1.0;
  double dow_sin = 0.0, dow_cos = 1.0;
  double woy_sin = 0.0, woy_cos = 1.0;
  double holiday = 0.0;

  static constexpr std::size_t kWidth = 10;
  std::array<double, kWidth> as_array() const;
};

/// Row-major N x 10 matrix aligned with a series' timestamps.
class CovariateMatrix {
public:
  static constexpr std::size_t kWidth = CovariateVector::kWidth;

  CovariateMatrix() = default;
  CovariateMatrix(Timestamp start, std::vector<double> data);

  std::size_t rows() const noexcept { return data_.size() / kWidth; }
  Timestamp start() const noexcept { return start_; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * kWidth, kWidth}; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * kWidth + j]; }
  const std::vector<double>& data() const noexcept { return data_; }

private:
  Timestamp start_{};
  std::vector<double> data_;
};

CovariateVector encode_timestamp(Timestamp ts, const std::set<Date>& holidays);
CovariateMatrix build_matrix(const LoadSeries& series, const std::set<Date>& holidays);
/// Covariates for `steps` timesteps starting at `start`, independent of load values.
CovariateMatrix build_matrix(Timestamp start, std::size_t steps, const std::set<Date>& holidays);

}  // namespace gridcast
