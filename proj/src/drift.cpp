#include "gridcast/drift.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace gridcast::drift {

using namespace std::chrono;

DistributionStats distribution_stats(const LoadSeries& series, std::span<const int> years, std::size_t bins) {
  if (bins < 1) throw std::invalid_argument("distribution_stats: need at least one bin");
  if (years.empty()) throw std::invalid_argument("distribution_stats: no years requested");

  std::vector<LoadSeries> parts;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (int y : years) {
    const auto from = start_of(Date{year{y}, January, day{1}});
    const auto to = start_of(Date{year{y + 1}, January, day{1}});
    LoadSeries part = series.slice(from, to);
    if (part.empty()) throw std::invalid_argument("distribution_stats: year " + std::to_string(y) + " has no data");
    for (double v : part.values()) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    parts.push_back(std::move(part));
  }

  DistributionStats out;
  const double width = hi > lo ? (hi - lo) / static_cast<double>(bins) : 1.0;
  for (std::size_t i = 0; i <= bins; ++i) out.bin_edges.push_back(lo + width * static_cast<double>(i));

  for (std::size_t p = 0; p < parts.size(); ++p) {
    const LoadSeries& part = parts[p];
    YearStats ys;
    ys.year = years[p];
    ys.points = part.size();
    ys.histogram.assign(bins, 0);
    std::array<double, 12> msum{};
    std::array<std::size_t, 12> mcount{};
    std::array<double, kStepsPerDay> psum{};
    std::array<std::size_t, kStepsPerDay> pcount{};
    for (std::size_t i = 0; i < part.size(); ++i) {
      const double v = part[i];
      auto bin = static_cast<std::size_t>((v - lo) / width);
      ys.histogram[std::min(bin, bins - 1)] += 1;
      const auto ts = part.time_at(i);
      const auto m = static_cast<unsigned>(date_of(ts).month()) - 1;
      msum[m] += v;
      ++mcount[m];
      const auto slot = static_cast<std::size_t>(minute_of_day(ts) / 15);
      psum[slot] += v;
      ++pcount[slot];
    }
    for (std::size_t m = 0; m < 12; ++m)
      if (mcount[m]) ys.monthly_mean[m] = msum[m] / static_cast<double>(mcount[m]);
    for (std::size_t s = 0; s < kStepsPerDay; ++s)
      ys.daily_profile[s] = pcount[s] ? psum[s] / static_cast<double>(pcount[s]) : 0.0;
    out.years.push_back(std::move(ys));
  }
  return out;
}

void write_stats_csv(const DistributionStats& stats, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + (dir / name).string());
    return f;
  };
  char buf[64];
  {
    auto f = open("histogram.csv");
    f << "year,bin_lo,bin_hi,count\n";
    for (const auto& y : stats.years)
      for (std::size_t b = 0; b < y.histogram.size(); ++b) {
        std::snprintf(buf, sizeof buf, "%.6f,%.6f", stats.bin_edges[b], stats.bin_edges[b + 1]);
        f << y.year << ',' << buf << ',' << y.histogram[b] << '\n';
      }
  }
  {
    auto f = open("monthly.csv");
    f << "year,month,mean_mw\n";
    for (const auto& y : stats.years)
      for (std::size_t m = 0; m < 12; ++m) {
        if (!y.monthly_mean[m]) continue;
        std::snprintf(buf, sizeof buf, "%.6f", *y.monthly_mean[m]);
        f << y.year << ',' << m + 1 << ',' << buf << '\n';
      }
  }
  {
    auto f = open("profile.csv");
    f << "year,slot,time,mean_mw\n";
    for (const auto& y : stats.years)
      for (std::size_t s = 0; s < kStepsPerDay; ++s) {
        std::snprintf(buf, sizeof buf, "%02zu:%02zu,%.6f", s / 4, (s % 4) * 15, y.daily_profile[s]);
        f << y.year << ',' << s << ',' << buf << '\n';
      }
  }
}

std::vector<RollingPoint> rolling_mape(const backtest::BacktestReport& report, std::size_t window_days) {
  if (window_days < 1 || window_days > report.days())
    throw std::invalid_argument("rolling_mape: window must lie in [1, " + std::to_string(report.days()) + "] days");
  // Per-day sums of absolute percentage errors, then a sliding window.
  std::vector<double> day_sum(report.days(), 0.0);
  std::vector<std::size_t> day_n(report.days(), 0);
  for (std::size_t d = 0; d < report.days(); ++d) {
    const auto a = report.actual(d), f = report.forecast(d);
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i] == 0.0) continue;
      day_sum[d] += std::abs(a[i] - f[i]) / std::abs(a[i]);
      ++day_n[d];
    }
  }
  std::vector<RollingPoint> out;
  for (std::size_t end = window_days; end <= report.days(); ++end) {
    double s = 0.0;
    std::size_t n = 0;
    for (std::size_t d = end - window_days; d < end; ++d) {
      s += day_sum[d];
      n += day_n[d];
    }
    if (n == 0) throw std::invalid_argument("rolling_mape: window without non-zero actuals");
    out.push_back({report.dates[end - 1], s / static_cast<double>(n) * 100.0});
  }
  return out;
}

std::string_view to_string(Decision d) {
  switch (d) {
    case Decision::Healthy: return "healthy";
    case Decision::Watch: return "watch";
    case Decision::Retrain: return "retrain";
  }
  return "?";
}

void DriftState::validate() const {
  if (!(threshold_ratio > 1.0)) throw std::invalid_argument("drift: threshold_ratio must be > 1");
  if (persistence_days < 1) throw std::invalid_argument("drift: persistence_days must be >= 1");
  if (rolling_window_days < 1) throw std::invalid_argument("drift: rolling_window_days must be >= 1");
  if (!(baseline_mape >= 0.0)) throw std::invalid_argument("drift: baseline_mape must be >= 0");
}

Decision DriftResult::decision() const noexcept {
  if (state.triggered) return Decision::Retrain;
  return state.consecutive_breaches > 0 ? Decision::Watch : Decision::Healthy;
}

DriftResult evaluate_drift(DriftState state, std::span<const RollingPoint> rolling) {
  state.validate();
  DriftResult res;
  for (const auto& p : rolling) {
    const bool breach = p.mape > state.threshold();
    if (breach) {
      state.consecutive_breaches = std::min(state.consecutive_breaches + 1, state.persistence_days);
    } else if (!state.triggered) {
      state.consecutive_breaches = 0;
    }
    if (!state.triggered && state.consecutive_breaches >= state.persistence_days) {
      state.triggered = true;
      res.triggered_on = p.date;
    }
    Decision d = Decision::Healthy;
    if (state.triggered)
      d = Decision::Retrain;
    else if (state.consecutive_breaches > 0)
      d = Decision::Watch;
    res.events.push_back({p.date, p.mape, state.baseline_mape, d});
  }
  res.state = state;
  return res;
}

nlohmann::json event_json(const DriftEvent& e) {
  return {{"date", format_date(e.date)},
          {"rolling_mape", e.rolling_mape},
          {"baseline_mape", e.baseline_mape},
          {"decision", to_string(e.decision)}};
}

void write_event_log(const std::filesystem::path& path, std::span<const DriftEvent> events) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& e : events) out << event_json(e).dump() << '\n';
}

}  // namespace gridcast::drift
