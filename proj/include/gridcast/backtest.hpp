#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gridcast/day_ahead.hpp"
#include "gridcast/optim.hpp"
#include "gridcast/series.hpp"

#include "json.hpp"

namespace gridcast::backtest {

/// Meteorological seasons: Dec-Feb, Mar-May, Jun-Aug, Sep-Nov.
enum class Season { Winter = 0, Spring = 1, Summer = 2, Autumn = 3 };
inline constexpr std::array<Season, 4> kSeasons{Season::Winter, Season::Spring, Season::Summer, Season::Autumn};

Season season_of(Date d);
std::string_view to_string(Season s);

struct MapeResult {
  double percent = 0.0;
  std::size_t included = 0;
  std::size_t excluded = 0;  ///< points with a zero actual
};

/// Mean absolute percentage error in percent. Zero actuals are skipped and
/// counted; throws when lengths differ or every point is skipped.
MapeResult mape(std::span<const double> actual, std::span<const double> forecast);

using SeasonalMape = std::array<std::optional<double>, 4>;

struct BacktestReport {
  std::size_t model_id = 0;
  std::string family;
  int flavor = 0;
  std::size_t lookback = 0;
  std::vector<Date> dates;        ///< one per forecast day
  std::vector<double> forecasts;  ///< 96 per day, megawatts
  std::vector<double> actuals;
  double overall_mape = 0.0;
  std::size_t excluded_points = 0;
  SeasonalMape seasonal{};
  ad::TrainingStats training;

  std::size_t days() const noexcept { return dates.size(); }
  std::span<const double> forecast(std::size_t day) const { return {forecasts.data() + day * kStepsPerDay, kStepsPerDay}; }
  std::span<const double> actual(std::size_t day) const { return {actuals.data() + day * kStepsPerDay, kStepsPerDay}; }
};

/// Rolling day-ahead evaluation. For every test day the model sees all
/// observations up to the previous midnight; the day's actuals are appended
/// before the next forecast. No refitting happens inside the loop.
/// `covariates` must start at history.start() and cover history and test.
BacktestReport backtest_day_ahead(const DayAheadModel& model, const LoadSeries& history, const LoadSeries& test,
                                  const CovariateMatrix& covariates);
BacktestReport backtest_day_ahead(const DayAheadModel& model, const LoadSeries& history, const LoadSeries& test,
                                  const std::set<Date>& holidays);

/// Per-season MAPE over the report's forecast points; seasons without points are empty.
SeasonalMape seasonal_breakdown(const BacktestReport& report);

/// Registry row: model_id, family, flavor, lookback, overall_mape, seasonal,
/// epochs, train_wall_seconds, excluded_points.
nlohmann::json report_json(const BacktestReport& report, bool record_wall_time = true);
/// Registry row plus dates, per-day forecasts and actuals.
nlohmann::json report_detail_json(const BacktestReport& report, bool record_wall_time = true);
BacktestReport report_from_detail_json(const nlohmann::json& j);
void append_registry(const std::filesystem::path& path, const nlohmann::json& row);
std::vector<nlohmann::json> read_registry(const std::filesystem::path& path);

}  // namespace gridcast::backtest
