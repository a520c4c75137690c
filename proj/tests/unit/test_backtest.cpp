#include <catch_amalgamated.hpp>

#include <filesystem>
#include <random>

#include "gridcast/backtest.hpp"
#include "oracles.hpp"

using namespace gridcast;
using namespace gridcast::backtest;

namespace {

struct Fixture {
  LoadSeries history, test;
  CovariateMatrix cov;
};

Fixture fixture(const char* test_start, int test_days, std::uint64_t seed = 3) {
  SyntheticSpec spec;
  const Date t0 = *parse_date(test_start);
  spec.start = Date{std::chrono::sys_days{t0} - std::chrono::days{20}};
  spec.end = Date{std::chrono::sys_days{t0} + std::chrono::days{test_days}};
  const auto s = generate_synthetic(spec, seed);
  Fixture f;
  f.history = s.slice(s.start(), start_of(t0));
  f.test = s.slice(start_of(t0), s.end());
  f.cov = build_matrix(s, {});
  return f;
}

}  // namespace

TEST_CASE("mape by hand") {
  const std::vector<double> y{100, 200}, f{110, 180};
  CHECK(mape(y, f).percent == Catch::Approx(10.0).epsilon(1e-15));
  CHECK(mape(y, y).percent == 0.0);
  const std::vector<double> z{0, 100}, g{5, 90};
  const auto r = mape(z, g);
  CHECK(r.percent == Catch::Approx(10.0));
  CHECK(r.excluded == 1);
  CHECK(r.included == 1);
  CHECK_THROWS(mape(std::vector<double>{0, 0}, std::vector<double>{1, 1}));
  CHECK_THROWS(mape(y, std::vector<double>{1}));
}

TEST_CASE("mape is scale invariant") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(1.0, 1000.0), scale(0.001, 1000.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> a(50), f(50);
    for (std::size_t i = 0; i < a.size(); ++i) {
      a[i] = u(rng);
      f[i] = u(rng);
    }
    const double c = scale(rng);
    std::vector<double> ca(a), cf(f);
    for (auto& v : ca) v *= c;
    for (auto& v : cf) v *= c;
    REQUIRE(mape(ca, cf).percent == Catch::Approx(mape(a, f).percent).epsilon(1e-12));
    REQUIRE(mape(a, f).percent == Catch::Approx(oracle::mape(a, f)).epsilon(1e-12));
  }
}

TEST_CASE("seasons are meteorological") {
  CHECK(season_of(*parse_date("2019-12-01")) == Season::Winter);
  CHECK(season_of(*parse_date("2020-02-29")) == Season::Winter);
  CHECK(season_of(*parse_date("2020-03-01")) == Season::Spring);
  CHECK(season_of(*parse_date("2020-06-01")) == Season::Summer);
  CHECK(season_of(*parse_date("2020-11-30")) == Season::Autumn);
}

TEST_CASE("harness matches the brute-force loop bit for bit") {
  const auto f = fixture("2020-02-15", 30);
  const oracle::PersistenceStub persistence;
  std::vector<double> full = f.history.values();
  full.insert(full.end(), f.test.values().begin(), f.test.values().end());
  const oracle::PerfectStub perfect(full);

  for (const DayAheadModel* model : {static_cast<const DayAheadModel*>(&persistence), static_cast<const DayAheadModel*>(&perfect)}) {
    const auto report = backtest_day_ahead(*model, f.history, f.test, f.cov);
    const auto loop = oracle::brute_force_backtest(*model, f.history.values(), f.test.values(), f.cov);
    CHECK(report.forecasts == loop.forecasts);
    CHECK(report.actuals == loop.actuals);
    CHECK(report.forecasts.size() == 2880);
    CHECK(report.days() == 30);
    CHECK(report.overall_mape == Catch::Approx(oracle::mape(loop.actuals, loop.forecasts)).epsilon(1e-12));
  }
  CHECK(backtest_day_ahead(perfect, f.history, f.test, f.cov).overall_mape == 0.0);
}

TEST_CASE("seasonal breakdown covers only present seasons") {
  const auto f = fixture("2020-02-20", 20);
  const oracle::PersistenceStub persistence;
  const auto report = backtest_day_ahead(persistence, f.history, f.test, f.cov);
  REQUIRE(report.seasonal[0].has_value());
  REQUIRE(report.seasonal[1].has_value());
  CHECK_FALSE(report.seasonal[2].has_value());
  CHECK_FALSE(report.seasonal[3].has_value());
  // Feb 20..29 are winter: 10 days.
  const std::span<const double> a(report.actuals.data(), 960), fc(report.forecasts.data(), 960);
  CHECK(*report.seasonal[0] == Catch::Approx(oracle::mape(a, fc)).epsilon(1e-14));
}

TEST_CASE("harness rejects misaligned inputs") {
  const auto f = fixture("2020-02-15", 3);
  const oracle::PersistenceStub p;
  const auto partial = f.test.slice(f.test.start(), f.test.start() + kStep * 50);
  CHECK_THROWS(backtest_day_ahead(p, f.history, partial, f.cov));
  CHECK_THROWS(backtest_day_ahead(p, f.history.slice(f.history.start(), f.history.end() - kStep * 96), f.test, f.cov));
}

TEST_CASE("report json and registry") {
  const auto f = fixture("2020-02-15", 3);
  const oracle::PersistenceStub p;
  auto report = backtest_day_ahead(p, f.history, f.test, f.cov);
  report.model_id = 7;
  report.family = "tcn";
  report.lookback = 384;
  report.training.epochs_run = 12;
  report.training.wall_seconds = 3.5;
  const auto j = report_json(report);
  for (const char* key : {"model_id", "family", "flavor", "lookback", "overall_mape", "seasonal", "epochs",
                          "train_wall_seconds", "excluded_points"})
    CHECK(j.contains(key));
  CHECK(j["seasonal"].size() == 4);
  CHECK(j["seasonal"]["summer"].is_null());
  CHECK(report_json(report, false)["train_wall_seconds"] == 0.0);

  const auto back = report_from_detail_json(report_detail_json(report));
  CHECK(back.forecasts == report.forecasts);
  CHECK(back.dates == report.dates);
  CHECK(back.overall_mape == report.overall_mape);

  const auto path = std::filesystem::temp_directory_path() / "gridcast_registry_test.jsonl";
  std::filesystem::remove(path);
  append_registry(path, j);
  append_registry(path, j);
  const auto rows = read_registry(path);
  REQUIRE(rows.size() == 2);
  CHECK(rows[1] == j);
}
