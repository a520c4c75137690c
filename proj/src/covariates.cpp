#include "gridcast/covariates.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace gridcast {

using namespace std::chrono;

std::array<double, CovariateVector::kWidth> CovariateVector::as_array() const {
  return {year, month_sin, month_cos, doy_sin, doy_cos, dow_sin, dow_cos, woy_sin, woy_cos, holiday};
}

CovariateMatrix::CovariateMatrix(Timestamp start, std::vector<double> data)
    : start_(start), data_(std::move(data)) {
  if (data_.size() % kWidth != 0) throw std::invalid_argument("covariate data is not N x 10");
}

CovariateVector encode_timestamp(Timestamp ts, const std::set<Date>& holidays) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  const auto day_point = floor<days>(ts);
  const Date date{day_point};
  const auto jan1 = sys_days{date.year() / January / 1};
  const int doy = static_cast<int>((day_point - jan1).count()) + 1;
  const int year_days = date.year().is_leap() ? 366 : 365;
  const int month = static_cast<int>(static_cast<unsigned>(date.month()));
  const int dow = static_cast<int>(weekday{day_point}.iso_encoding()) - 1;  // Monday = 0
  const int week = (doy - 1) / 7 + 1;

  const double a_month = two_pi * (month - 1) / 12.0;
  const double a_doy = two_pi * (doy - 1) / year_days;
  const double a_dow = two_pi * dow / 7.0;
  const double a_woy = two_pi * (week - 1) / 53.0;

  CovariateVector v;
  v.year = static_cast<double>(static_cast<int>(date.year()));
  v.month_sin = std::sin(a_month);
  v.month_cos = std::cos(a_month);
  v.doy_sin = std::sin(a_doy);
  v.doy_cos = std::cos(a_doy);
  v.dow_sin = std::sin(a_dow);
  v.dow_cos = std::cos(a_dow);
  v.woy_sin = std::sin(a_woy);
  v.woy_cos = std::cos(a_woy);
  v.holiday = holidays.contains(date) ? 1.0 : 0.0;
  return v;
}

CovariateMatrix build_matrix(Timestamp start, std::size_t steps, const std::set<Date>& holidays) {
  std::vector<double> data;
  data.reserve(steps * CovariateMatrix::kWidth);
  // All 96 steps of a day share one encoding.
  std::optional<sys_days> cached_day;
  std::array<double, CovariateMatrix::kWidth> row{};
  for (std::size_t i = 0; i < steps; ++i) {
    const Timestamp ts = start + kStep * static_cast<int>(i);
    const auto d = floor<days>(ts);
    if (!cached_day || *cached_day != d) {
      row = encode_timestamp(ts, holidays).as_array();
      cached_day = d;
    }
    data.insert(data.end(), row.begin(), row.end());
  }
  return CovariateMatrix{start, std::move(data)};
}

CovariateMatrix build_matrix(const LoadSeries& series, const std::set<Date>& holidays) {
  return build_matrix(series.start(), series.size(), holidays);
}

}  // namespace gridcast
