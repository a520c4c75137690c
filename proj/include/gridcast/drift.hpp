#pragma once

// Distribution statistics of the load series and the rolling-error
// monitoring loop that recommends retraining after a sustained degradation.

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "gridcast/backtest.hpp"
#include "gridcast/series.hpp"

namespace gridcast::drift {

struct YearStats {
  int year = 0;
  std::size_t points = 0;
  std::vector<std::size_t> histogram;                ///< counts per bin
  std::array<std::optional<double>, 12> monthly_mean{};
  std::array<double, kStepsPerDay> daily_profile{};  ///< mean per 15-minute slot
};

struct DistributionStats {
  std::vector<double> bin_edges;  ///< bins + 1 edges spanning the global min/max
  std::vector<YearStats> years;
};

DistributionStats distribution_stats(const LoadSeries& series, std::span<const int> years, std::size_t bins = 50);

/// Writes histogram.csv, monthly.csv and profile.csv into `dir`.
void write_stats_csv(const DistributionStats& stats, const std::filesystem::path& dir);

struct RollingPoint {
  Date date;
  double mape = 0.0;
};

/// MAPE over the trailing `window_days` days, one value per day from the
/// first complete window onward.
std::vector<RollingPoint> rolling_mape(const backtest::BacktestReport& report, std::size_t window_days);

enum class Decision { Healthy, Watch, Retrain };
std::string_view to_string(Decision d);

struct DriftState {
  double baseline_mape = 0.0;
  std::size_t rolling_window_days = 30;
  double threshold_ratio = 1.5;
  std::size_t persistence_days = 7;
  std::size_t consecutive_breaches = 0;
  bool triggered = false;

  double threshold() const noexcept { return baseline_mape * threshold_ratio; }
  void validate() const;
};

struct DriftEvent {
  Date date;
  double rolling_mape = 0.0;
  double baseline_mape = 0.0;
  Decision decision = Decision::Healthy;
};

struct DriftResult {
  DriftState state;
  std::vector<DriftEvent> events;
  std::optional<Date> triggered_on;

  Decision decision() const noexcept;
};

/// A day breaches when its rolling MAPE exceeds baseline x ratio.
/// `persistence_days` consecutive breaches latch the retrain recommendation;
/// a non-breaching day before that resets the count.
DriftResult evaluate_drift(DriftState state, std::span<const RollingPoint> rolling);

nlohmann::json event_json(const DriftEvent& e);
void write_event_log(const std::filesystem::path& path, std::span<const DriftEvent> events);

}  // namespace gridcast::drift
