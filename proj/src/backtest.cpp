#include "gridcast/backtest.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace gridcast::backtest {

using nlohmann::json;

Season season_of(Date d) {
  const unsigned m = static_cast<unsigned>(d.month());
  if (m == 12 || m <= 2) return Season::Winter;
  if (m <= 5) return Season::Spring;
  if (m <= 8) return Season::Summer;
  return Season::Autumn;
}

std::string_view to_string(Season s) {
  switch (s) {
    case Season::Winter: return "winter";
    case Season::Spring: return "spring";
    case Season::Summer: return "summer";
    case Season::Autumn: return "autumn";
  }
  return "?";
}

MapeResult mape(std::span<const double> actual, std::span<const double> forecast) {
  if (actual.size() != forecast.size()) throw std::invalid_argument("mape: length mismatch");
  if (actual.empty()) throw std::invalid_argument("mape: empty input");
  MapeResult r;
  double sum = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    if (actual[i] == 0.0) {
      ++r.excluded;
      continue;
    }
    sum += std::abs(actual[i] - forecast[i]) / std::abs(actual[i]);
    ++r.included;
  }
  if (r.included == 0) throw std::invalid_argument("mape: every actual value is zero");
  r.percent = sum / static_cast<double>(r.included) * 100.0;
  return r;
}

BacktestReport backtest_day_ahead(const DayAheadModel& model, const LoadSeries& history, const LoadSeries& test,
                                  const CovariateMatrix& covariates) {
  if (history.end() != test.start()) throw std::invalid_argument("backtest: test must directly follow history");
  if (minute_of_day(test.start()) != 0 || test.empty() || test.size() % kStepsPerDay != 0)
    throw std::invalid_argument("backtest: test set must consist of whole days starting at 00:00");
  if (history.size() < model.min_history())
    throw std::invalid_argument("backtest: history holds " + std::to_string(history.size()) + " steps, model needs " +
                                std::to_string(model.min_history()));
  if (covariates.start() != history.start() || covariates.rows() < history.size() + test.size())
    throw std::invalid_argument("backtest: covariates must start with history and cover the test set");

  BacktestReport report;
  std::vector<double> observed = history.values();
  observed.reserve(history.size() + test.size());
  const std::size_t days = test.size() / kStepsPerDay;
  for (std::size_t d = 0; d < days; ++d) {
    const auto fc = model.forecast_day(observed, covariates);
    if (fc.size() != kStepsPerDay)
      throw std::runtime_error("backtest: model returned " + std::to_string(fc.size()) + " values instead of 96");
    report.dates.push_back(date_of(test.time_at(d * kStepsPerDay)));
    report.forecasts.insert(report.forecasts.end(), fc.begin(), fc.end());
    const auto begin = test.values().begin() + static_cast<std::ptrdiff_t>(d * kStepsPerDay);
    report.actuals.insert(report.actuals.end(), begin, begin + static_cast<std::ptrdiff_t>(kStepsPerDay));
    observed.insert(observed.end(), begin, begin + static_cast<std::ptrdiff_t>(kStepsPerDay));
  }
  const auto overall = mape(report.actuals, report.forecasts);
  report.overall_mape = overall.percent;
  report.excluded_points = overall.excluded;
  report.seasonal = seasonal_breakdown(report);
  return report;
}

BacktestReport backtest_day_ahead(const DayAheadModel& model, const LoadSeries& history, const LoadSeries& test,
                                  const std::set<Date>& holidays) {
  return backtest_day_ahead(model, history, test, build_matrix(history.start(), history.size() + test.size(), holidays));
}

SeasonalMape seasonal_breakdown(const BacktestReport& report) {
  std::array<std::vector<double>, 4> act, fc;
  for (std::size_t d = 0; d < report.days(); ++d) {
    const auto s = static_cast<std::size_t>(season_of(report.dates[d]));
    const auto a = report.actual(d), f = report.forecast(d);
    act[s].insert(act[s].end(), a.begin(), a.end());
    fc[s].insert(fc[s].end(), f.begin(), f.end());
  }
  SeasonalMape out{};
  for (std::size_t s = 0; s < 4; ++s) {
    if (act[s].empty()) continue;
    bool any_nonzero = false;
    for (double v : act[s]) any_nonzero = any_nonzero || v != 0.0;
    if (any_nonzero) out[s] = mape(act[s], fc[s]).percent;
  }
  return out;
}

json report_json(const BacktestReport& report, bool record_wall_time) {
  json seasonal = json::object();
  for (auto s : kSeasons) {
    const auto& v = report.seasonal[static_cast<std::size_t>(s)];
    seasonal[std::string(to_string(s))] = v ? json(*v) : json(nullptr);
  }
  return json{{"model_id", report.model_id},
              {"family", report.family},
              {"flavor", report.flavor},
              {"lookback", report.lookback},
              {"overall_mape", report.overall_mape},
              {"seasonal", seasonal},
              {"epochs", report.training.epochs_run},
              {"train_wall_seconds", record_wall_time ? report.training.wall_seconds : 0.0},
              {"excluded_points", report.excluded_points}};
}

json report_detail_json(const BacktestReport& report, bool record_wall_time) {
  json j = report_json(report, record_wall_time);
  json dates = json::array();
  for (const auto& d : report.dates) dates.push_back(format_date(d));
  j["dates"] = std::move(dates);
  j["forecasts"] = report.forecasts;
  j["actuals"] = report.actuals;
  j["best_epoch"] = report.training.best_epoch;
  return j;
}

BacktestReport report_from_detail_json(const json& j) {
  BacktestReport r;
  r.model_id = j.at("model_id").get<std::size_t>();
  r.family = j.at("family").get<std::string>();
  r.flavor = j.at("flavor").get<int>();
  r.lookback = j.at("lookback").get<std::size_t>();
  for (const auto& d : j.at("dates")) {
    auto date = parse_date(d.get<std::string>());
    if (!date) throw std::invalid_argument("report: bad date " + d.get<std::string>());
    r.dates.push_back(*date);
  }
  r.forecasts = j.at("forecasts").get<std::vector<double>>();
  r.actuals = j.at("actuals").get<std::vector<double>>();
  if (r.forecasts.size() != r.dates.size() * kStepsPerDay || r.actuals.size() != r.forecasts.size())
    throw std::invalid_argument("report: forecasts/actuals do not match the day count");
  r.overall_mape = j.at("overall_mape").get<double>();
  r.excluded_points = j.at("excluded_points").get<std::size_t>();
  r.training.epochs_run = j.at("epochs").get<std::size_t>();
  r.training.wall_seconds = j.at("train_wall_seconds").get<double>();
  if (j.contains("best_epoch")) r.training.best_epoch = j.at("best_epoch").get<std::size_t>();
  r.seasonal = seasonal_breakdown(r);
  return r;
}

void append_registry(const std::filesystem::path& path, const json& row) {
  std::ofstream out(path, std::ios::app | std::ios::binary);
  if (!out) throw std::runtime_error("cannot append to " + path.string());
  out << row.dump() << '\n';
}

std::vector<json> read_registry(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<json> rows;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) rows.push_back(json::parse(line));
  return rows;
}

}  // namespace gridcast::backtest
