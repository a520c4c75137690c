#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "gridcast/psf.hpp"
#include "oracles.hpp"

using namespace gridcast;
using namespace gridcast::psf;

namespace {

using oracle::kDay;

Date day_n(int n) { return Date{std::chrono::sys_days{std::chrono::year{2020} / 1 / 1} + std::chrono::days{n}}; }

/// Rows filled from per-day generators; the scaler is the identity unless given.
DayMatrix make_days(const std::vector<std::vector<double>>& rows, ZScore scaler = {}) {
  std::vector<double> data;
  std::vector<Date> dates;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    data.insert(data.end(), rows[i].begin(), rows[i].end());
    dates.push_back(day_n(static_cast<int>(i)));
  }
  return DayMatrix(std::move(data), std::move(dates), scaler);
}

std::vector<double> constant_row(double v) { return std::vector<double>(kDay, v); }

std::vector<double> pattern_row(int kind, std::mt19937_64& rng, double jitter) {
  std::normal_distribution<double> n(0.0, jitter);
  std::vector<double> r(kDay);
  for (std::size_t s = 0; s < kDay; ++s) r[s] = std::sin(0.07 * static_cast<double>(s) * (kind + 1)) * 2.0 + kind + n(rng);
  return r;
}

}  // namespace

TEST_CASE("silhouette of two tight pairs") {
  const auto days = make_days({constant_row(0), constant_row(1), constant_row(10), constant_row(11)});
  Labeling lab;
  lab.k = 2;
  lab.labels = {0, 0, 1, 1};
  // (1 - 1/10.5 + 1 - 1/9.5) / 2
  CHECK(silhouette_score(days, lab) == Catch::Approx(0.8997).margin(1e-3));
  CHECK(silhouette_score(days, lab) == Catch::Approx((2.0 - 1.0 / 10.5 - 1.0 / 9.5) / 2.0).epsilon(1e-12));

  Labeling one;
  one.k = 1;
  one.labels = {0, 0, 0, 0};
  CHECK_THROWS(silhouette_score(days, one));
}

TEST_CASE("psf prediction on ABCABCAB equals the brute-force scan") {
  std::mt19937_64 rng(4);
  std::vector<std::vector<double>> rows;
  const std::vector<std::size_t> labels{0, 1, 2, 0, 1, 2, 0, 1};
  for (auto l : labels) rows.push_back(pattern_row(static_cast<int>(l), rng, 0.3));
  const auto days = make_days(rows, ZScore{5000.0, 250.0});
  Labeling lab;
  lab.k = 3;
  lab.labels = labels;
  for (std::size_t w = 1; w <= 7; ++w) {
    const auto got = psf_predict_day(lab, days, w);
    const auto want = oracle::brute_force_psf(labels, days, w);
    REQUIRE(got == want);
  }
  // Explicit check of the w = 2 case: successors of (A,B) at day 0 and day 3.
  const auto w2 = psf_predict_day(lab, days, 2);
  CHECK(w2[10] == Catch::Approx(((rows[2][10] + rows[5][10]) / 2.0) * 250.0 + 5000.0));
}

TEST_CASE("no match falls back to the mean of all days") {
  const auto days = make_days({constant_row(1), constant_row(2), constant_row(6)});
  Labeling lab;
  lab.k = 3;
  lab.labels = {0, 1, 2};
  CHECK(psf_predict_day(lab, days, 3)[0] == Catch::Approx(3.0));
}

TEST_CASE("periodic labels reproduce the next day of the period") {
  std::mt19937_64 rng(9);
  for (int period = 2; period <= 7; ++period) {
    std::vector<std::vector<double>> patterns;
    for (int p = 0; p < period; ++p) patterns.push_back(pattern_row(p, rng, 0.0));
    std::vector<std::vector<double>> rows;
    std::vector<std::size_t> labels;
    const int n = period * 6 + 3;
    for (int d = 0; d < n; ++d) {
      rows.push_back(patterns[static_cast<std::size_t>(d % period)]);
      labels.push_back(static_cast<std::size_t>(d % period));
    }
    const auto days = make_days(rows);
    Labeling lab;
    lab.k = static_cast<std::size_t>(period);
    lab.labels = labels;
    for (std::size_t w : {1, 2, 3, 5, 7}) {
      const auto next = psf_predict_day(lab, days, w);
      const auto& truth = patterns[static_cast<std::size_t>(n % period)];
      for (std::size_t s = 0; s < kDay; ++s) REQUIRE(next[s] == Catch::Approx(truth[s]).margin(1e-12));
    }
  }
}

TEST_CASE("k-means recovers separated clusters") {
  std::mt19937_64 rng(21);
  std::vector<std::vector<double>> rows;
  std::vector<int> truth;
  for (int i = 0; i < 60; ++i) {
    truth.push_back(i % 3);
    rows.push_back(pattern_row(i % 3 * 3, rng, 0.05));
  }
  const auto days = make_days(rows);
  const auto lab = kmeans_fit(days, 3, 7);
  for (int i = 0; i < 60; ++i)
    for (int j = 0; j < 60; ++j)
      REQUIRE((lab.labels[static_cast<std::size_t>(i)] == lab.labels[static_cast<std::size_t>(j)]) ==
              (truth[static_cast<std::size_t>(i)] == truth[static_cast<std::size_t>(j)]));
  for (std::size_t t = 1; t < lab.inertia_trace.size(); ++t)
    CHECK(lab.inertia_trace[t] <= lab.inertia_trace[t - 1] + 1e-9);

  const auto again = kmeans_fit(days, 3, 7);
  CHECK(again.labels == lab.labels);
  CHECK(again.centroids == lab.centroids);

  for (std::size_t i = 0; i < 60; ++i) CHECK(assign_label(lab, days.row(i)) == lab.labels[i]);

  const auto chosen = select_clustering(days, 2, 6, 7);
  CHECK(chosen.k == 3);
}

TEST_CASE("best score ties resolve to the earliest entry") {
  const std::vector<double> s{0.2, 0.5, 0.5, 0.1};
  CHECK(best_score_index(s) == 1);
}

TEST_CASE("averaging ensemble") {
  CHECK(ensemble_average({{1, 2}, {3, 6}}) == std::vector<double>{2, 4});
  CHECK_THROWS(ensemble_average({}));
}

TEST_CASE("svr stacking learns a weighted combination") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  const std::size_t N = 400, M = 3;
  std::vector<double> x(N * M), y(N);
  for (std::size_t i = 0; i < N; ++i) {
    const double truth = 5000 + 300 * n(rng);
    y[i] = truth;
    x[i * M + 0] = truth + 20 * n(rng);
    x[i * M + 1] = truth + 200 * n(rng);
    x[i * M + 2] = truth + 400 * n(rng);
  }
  const auto model = svr_meta_fit(x, M, y, SvrOptions{0.05, 1e-4, 3000, 0.1});
  CHECK(model.weights[0] > model.weights[1]);
  CHECK(model.weights[1] > model.weights[2]);
  double err_meta = 0, err_avg = 0;
  for (std::size_t i = 0; i < N; ++i) {
    std::span<const double> row(x.data() + i * M, M);
    err_meta += std::fabs(model.predict(row) - y[i]);
    err_avg += std::fabs((row[0] + row[1] + row[2]) / 3.0 - y[i]);
  }
  CHECK(err_meta < err_avg);
}

TEST_CASE("svr inside the epsilon tube keeps the averaging weights") {
  // Targets equal the member mean; every residual is 0 at w = 1/M.
  std::vector<double> x{1, 3, 2, 4, 5, 7}, y{2, 3, 6};
  const auto model = svr_meta_fit(x, 2, y);
  CHECK(model.weights == std::vector<double>{0.5, 0.5});
  CHECK(model.bias == 0.0);
}

TEST_CASE("psf model end to end on a weekly pattern") {
  SyntheticSpec spec;
  spec.start = *parse_date("2019-01-07");
  spec.end = *parse_date("2019-04-01");
  spec.noise_sigma = 0.005;
  const auto series = generate_synthetic(spec, 2);
  PsfConfig cfg;
  cfg.k_max = 6;
  cfg.seed = 5;
  const auto model = PsfModel::fit(series, cfg);
  CHECK(model.clustering().k >= 2);
  const auto members = model.member_forecasts(series.values());
  CHECK(members.size() == 5);
  const auto fc = model.predict(series.values());
  REQUIRE(fc.size() == kDay);
  // Closer to tomorrow's noise-free load than the mean of all days.
  const std::size_t n_days = series.size() / kDay;
  double err_psf = 0, err_mean = 0;
  for (std::size_t s = 0; s < kDay; ++s) {
    const double truth = synthetic_harmonic(spec, series.end() + kStep * static_cast<int>(s));
    double mean_day = 0;
    for (std::size_t d = 0; d < n_days; ++d) mean_day += series.values()[d * kDay + s];
    mean_day /= static_cast<double>(n_days);
    err_psf += std::fabs(fc[s] - truth) / truth;
    err_mean += std::fabs(mean_day - truth) / truth;
  }
  CHECK(err_psf < err_mean);
}
