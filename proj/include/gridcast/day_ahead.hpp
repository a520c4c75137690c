#pragma once

#include <span>
#include <vector>

#include "gridcast/covariates.hpp"

namespace gridcast {

/// Anything that can produce a 96-step forecast for the day following an
/// observed history.
class DayAheadModel {
public:
  virtual ~DayAheadModel() = default;

  /// Minimum number of observed steps needed before the first forecast.
  virtual std::size_t min_history() const = 0;

  /// `observed` runs from the series origin up to (excluding) the target
  /// day's 00:00. `covariates` shares that origin and covers at least
  /// observed.size() + 96 rows.
  virtual std::vector<double> forecast_day(std::span<const double> observed,
                                           const CovariateMatrix& covariates) const = 0;
};

}  // namespace gridcast
