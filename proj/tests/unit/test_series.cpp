#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "gridcast/series.hpp"

using namespace gridcast;
using namespace std::chrono;
using Catch::Matchers::ContainsSubstring;

namespace {

Timestamp ts(const char* s) { return *parse_timestamp(s); }
Date date(const char* s) { return *parse_date(s); }

RawSeries raw(std::initializer_list<std::pair<const char*, double>> rows) {
  RawSeries r;
  for (auto [t, v] : rows) r.entries.push_back({ts(t), v});
  return r;
}

}  // namespace

TEST_CASE("timestamps parse and format on the 15-minute grid") {
  CHECK(format_timestamp(ts("2020-02-29T23:45")) == "2020-02-29T23:45");
  CHECK(parse_timestamp("2020-02-29 23:45:00").has_value());
  CHECK_FALSE(parse_timestamp("2020-13-01T00:00"));
  CHECK_FALSE(parse_timestamp("2019-02-29T00:00"));
  CHECK(minute_of_day(ts("2020-01-01T06:30")) == 390);
  CHECK(format_date(date_of(ts("2020-01-01T06:30"))) == "2020-01-01");
}

TEST_CASE("csv ingestion sorts rows and reports bad lines") {
  const auto r = parse_csv("timestamp,load_mw\n2020-01-01T00:30,3\n2020-01-01T00:00,1\n2020-01-01T00:15,2\n");
  REQUIRE(r.entries.size() == 3);
  CHECK(r.entries[0].load_mw == 1);
  CHECK(r.entries[2].load_mw == 3);

  // duplicates keep file order
  const auto d = parse_csv("timestamp,load_mw\n2020-01-01T00:15,5\n2020-01-01T00:00,1\n2020-01-01T00:15,7\n");
  CHECK(d.entries[1].load_mw == 5);
  CHECK(d.entries[2].load_mw == 7);

  try {
    parse_csv("timestamp,load_mw\n2020-01-01T00:00,1\n2020-13-01T00:00,100\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  CHECK_THROWS_AS(parse_csv("timestamp,load_mw\n2020-01-01T00:07,1\n"), ParseError);
  CHECK_THROWS_AS(parse_csv("timestamp,load_mw\n2020-01-01T00:00,nan\n"), ParseError);
  CHECK_THROWS_AS(parse_csv("time,load\n"), ParseError);
}

TEST_CASE("wrangle keeps the first duplicate and interpolates gaps") {
  const auto a = wrangle(raw({{"2020-01-01T00:00", 100}, {"2020-01-01T00:00", 105}, {"2020-01-01T00:15", 110}}));
  CHECK(a.values() == std::vector<double>{100, 110});

  const auto b = wrangle(raw({{"2020-01-01T00:00", 100}, {"2020-01-01T00:30", 200}}));
  CHECK(b.values() == std::vector<double>{100, 150, 200});

  const auto c = wrangle(raw({{"2020-01-01T00:00", 0}, {"2020-01-01T01:00", 40}}));
  CHECK(c.values() == std::vector<double>{0, 10, 20, 30, 40});

  SECTION("over-long gaps are refused with their location") {
    RawSeries r = raw({{"2020-01-01T00:00", 1}, {"2020-01-02T00:15", 2}});
    CHECK_NOTHROW(wrangle(r, WrangleOptions{96}));
    r = raw({{"2020-01-01T00:00", 1}, {"2020-01-02T00:30", 2}});
    CHECK_THROWS_WITH(wrangle(r, WrangleOptions{96}), ContainsSubstring("2020-01-01T00:15"));
  }
}

TEST_CASE("wrangle is idempotent and yields a constant grid") {
  const auto once = wrangle(raw({{"2020-03-29T00:00", 5}, {"2020-03-29T00:15", 6}, {"2020-03-29T01:15", 10},
                                 {"2020-03-29T01:15", 99}, {"2020-03-29T01:30", 11}}));
  CHECK(wrangle(once) == once);
  CHECK(once.size() == 7);
  for (std::size_t i = 1; i < once.size(); ++i) CHECK(once.time_at(i) - once.time_at(i - 1) == minutes{15});
}

TEST_CASE("split_by_years cuts at January 1") {
  SyntheticSpec spec;
  spec.start = date("2009-01-01");
  spec.end = date("2012-01-01");
  spec.noise_sigma = 0.0;
  const auto s = generate_synthetic(spec, 1);
  const auto split = split_by_years(s, SplitSpec{2009, 2009, 2010, 2011});
  CHECK(split.train.start() == ts("2009-01-01T00:00"));
  CHECK(split.validation.start() == ts("2010-01-01T00:00"));
  CHECK(split.test.start() == ts("2011-01-01T00:00"));
  CHECK(split.test.end() == ts("2012-01-01T00:00"));
  CHECK(join(join(split.train, split.validation), split.test) == s);
  CHECK_THROWS_WITH(split_by_years(s, SplitSpec{2009, 2010, 2011, 2012}), ContainsSubstring("2012"));
}

TEST_CASE("synthetic generator") {
  SyntheticSpec spec;
  spec.start = date("2019-01-01");
  spec.years = 1;

  SECTION("one non-leap year has 365 x 96 values") { CHECK(generate_synthetic(spec, 3).size() == 35040); }

  SECTION("deterministic for a seed") {
    CHECK(generate_synthetic(spec, 3) == generate_synthetic(spec, 3));
    CHECK_FALSE(generate_synthetic(spec, 3) == generate_synthetic(spec, 4));
  }

  SECTION("noise-free series matches the closed form") {
    spec.noise_sigma = 0.0;
    const auto s = generate_synthetic(spec, 3);
    constexpr double two_pi = 6.283185307179586;
    for (std::size_t i = 0; i < s.size(); i += 37) {
      const Timestamp t = s.time_at(i);
      const double day_frac = minute_of_day(t) / 1440.0;
      const auto dp = floor<days>(t);
      const double dow = static_cast<double>(weekday{dp}.iso_encoding() - 1);
      const double epoch_days = static_cast<double>(dp.time_since_epoch().count()) + day_frac;
      const double expected =
          5000.0 * (1.0 + 0.20 * -std::cos(two_pi * day_frac) + 0.05 * std::cos(two_pi * (dow + day_frac - 2.5) / 7.0) +
                    0.10 * std::cos(two_pi * epoch_days / 365.25));
      REQUIRE(s[i] == Catch::Approx(expected).epsilon(1e-12));
    }
  }

  SECTION("a -20% shift scales the window mean") {
    spec.shifts.push_back({date("2019-03-01"), date("2019-05-31"), 0.8});
    const auto shifted = generate_synthetic(spec, 9);
    spec.shifts.clear();
    const auto plain = generate_synthetic(spec, 9);
    const auto lo = *shifted.index_of(ts("2019-03-01T00:00"));
    const auto hi = *shifted.index_of(ts("2019-06-01T00:00"));
    const double n = static_cast<double>(hi - lo);
    double ms = 0, mp = 0;
    for (auto i = lo; i < hi; ++i) {
      ms += shifted[i];
      mp += plain[i];
    }
    ms /= n;
    mp /= n;
    const double sigma = 0.02 * 5000.0;
    CHECK(std::fabs(ms - 0.8 * mp) <= 3.0 * sigma / std::sqrt(n));
    CHECK(shifted[0] == plain[0]);
  }

  SECTION("negative parameters are rejected") {
    spec.noise_sigma = -0.1;
    CHECK_THROWS_AS(generate_synthetic(spec, 1), std::invalid_argument);
  }
}

TEST_CASE("csv round trip and holidays") {
  const auto dir = std::filesystem::temp_directory_path() / "gridcast_series_test";
  std::filesystem::create_directories(dir);
  SyntheticSpec spec;
  spec.start = date("2020-01-01");
  spec.end = date("2020-01-03");
  const auto s = generate_synthetic(spec, 5);
  write_csv(dir / "s.csv", s);
  CHECK(wrangle(ingest_csv(dir / "s.csv")) == s);

  std::ofstream(dir / "h.csv") << "2020-12-25\n2020-01-01\n";
  const auto h = read_holidays(dir / "h.csv");
  CHECK(h.size() == 2);
  CHECK(h.contains(date("2020-12-25")));
}
