#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "gridcast/drift.hpp"
#include "oracles.hpp"

using namespace gridcast;
using namespace gridcast::drift;

namespace {

Date day_n(int n) { return Date{std::chrono::sys_days{std::chrono::year{2020} / 1 / 1} + std::chrono::days{n}}; }

std::vector<RollingPoint> curve(const std::vector<double>& values) {
  std::vector<RollingPoint> out;
  for (std::size_t i = 0; i < values.size(); ++i) out.push_back({day_n(static_cast<int>(i)), values[i]});
  return out;
}

/// Report whose day d has a constant relative error errors[d].
backtest::BacktestReport report_with_errors(const std::vector<double>& errors) {
  backtest::BacktestReport r;
  for (std::size_t d = 0; d < errors.size(); ++d) {
    r.dates.push_back(day_n(static_cast<int>(d)));
    for (std::size_t s = 0; s < kStepsPerDay; ++s) {
      r.actuals.push_back(100.0 + static_cast<double>(s));
      r.forecasts.push_back((100.0 + static_cast<double>(s)) * (1.0 + errors[d]));
    }
  }
  return r;
}

}  // namespace

TEST_CASE("distribution statistics invariants") {
  SyntheticSpec spec;
  spec.start = *parse_date("2018-01-01");
  spec.years = 2;
  const auto s = generate_synthetic(spec, 4);
  const std::vector<int> years{2018, 2019};
  const auto stats = distribution_stats(s, years, 50);
  REQUIRE(stats.bin_edges.size() == 51);
  REQUIRE(stats.years.size() == 2);
  for (const auto& y : stats.years) {
    std::size_t total = 0;
    for (auto c : y.histogram) total += c;
    CHECK(total == y.points);
    CHECK(y.points == 35040);
    CHECK(y.daily_profile.size() == 96);
  }
  // January 2018 mean by hand
  double sum = 0;
  for (std::size_t i = 0; i < 31 * 96; ++i) sum += s[i];
  CHECK(*stats.years[0].monthly_mean[0] == Catch::Approx(sum / (31 * 96)).epsilon(1e-12));
  // 00:00 slot of the profile by hand
  double slot = 0;
  for (std::size_t d = 0; d < 365; ++d) slot += s[d * 96];
  CHECK(stats.years[0].daily_profile[0] == Catch::Approx(slot / 365).epsilon(1e-12));

  const auto dir = std::filesystem::temp_directory_path() / "gridcast_drift_stats";
  std::filesystem::create_directories(dir);
  write_stats_csv(stats, dir);
  for (const char* f : {"histogram.csv", "monthly.csv", "profile.csv"}) CHECK(std::filesystem::exists(dir / f));
  CHECK_THROWS(distribution_stats(s, std::vector<int>{2017}, 50));
}

TEST_CASE("rolling mape uses full windows only") {
  std::vector<double> errors(10, 0.01);
  for (std::size_t d = 5; d < 10; ++d) errors[d] = 0.05;
  const auto report = report_with_errors(errors);
  const auto rolling = rolling_mape(report, 3);
  REQUIRE(rolling.size() == 8);
  CHECK(rolling.front().date == day_n(2));
  CHECK(rolling[0].mape == Catch::Approx(1.0));
  CHECK(rolling[4].mape == Catch::Approx((1.0 + 5.0 + 5.0) / 3.0));
  CHECK(rolling[7].mape == Catch::Approx(5.0));
}

TEST_CASE("drift state machine") {
  DriftState st;
  st.baseline_mape = 2.0;
  st.threshold_ratio = 1.5;
  st.persistence_days = 3;

  SECTION("sustained breach latches retrain") {
    const auto r = evaluate_drift(st, curve({2, 2, 3.5, 3.5, 3.5, 1.0, 1.0}));
    CHECK(r.decision() == Decision::Retrain);
    REQUIRE(r.triggered_on);
    CHECK(*r.triggered_on == day_n(4));
    CHECK(r.state.triggered);
    CHECK(r.state.consecutive_breaches <= st.persistence_days);
    CHECK(r.events[3].decision == Decision::Watch);
    CHECK(r.events.back().decision == Decision::Retrain);
  }
  SECTION("an interrupted streak resets") {
    const auto r = evaluate_drift(st, curve({3.5, 3.5, 2.9, 3.5, 3.5}));
    CHECK(r.decision() == Decision::Watch);
    CHECK_FALSE(r.triggered_on);
    CHECK(r.state.consecutive_breaches == 2);
  }
  SECTION("exactly at the threshold is not a breach") {
    CHECK(evaluate_drift(st, curve({3.0, 3.0, 3.0, 3.0})).decision() == Decision::Healthy);
  }
  SECTION("invalid configurations") {
    st.threshold_ratio = 1.0;
    CHECK_THROWS(evaluate_drift(st, curve({1})));
  }
}

TEST_CASE("event log is json lines") {
  DriftState st;
  st.baseline_mape = 1.0;
  st.persistence_days = 1;
  const auto r = evaluate_drift(st, curve({1.0, 2.0}));
  const auto path = std::filesystem::temp_directory_path() / "gridcast_events.jsonl";
  write_event_log(path, r.events);
  std::ifstream in(path);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j.contains("decision"));
    ++n;
  }
  CHECK(n == 2);
  CHECK(event_json(r.events[1])["decision"] == "retrain");
}
