#pragma once

// Load series ingestion, cleaning, splitting and synthesis.
//
// Timestamps are naive local wall-clock times on a fixed 15-minute grid.
// Daylight-saving transitions show up as duplicated hours (autumn) or
// missing hours (spring); wrangle() resolves both.

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gridcast {

using Timestamp = std::chrono::sys_time<std::chrono::minutes>;
using Date = std::chrono::year_month_day;

inline constexpr std::chrono::minutes kStep{15};
inline constexpr std::size_t kStepsPerDay = 96;

/// Raised on malformed input files; carries the 1-based line number.
class ParseError : public std::runtime_error {
public:
  ParseError(std::size_t line, const std::string& what);
  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

/// Parses `YYYY-MM-DDTHH:MM` (an optional `:00` seconds suffix is tolerated).
std::optional<Timestamp> parse_timestamp(std::string_view text);
std::optional<Date> parse_date(std::string_view text);
std::string format_timestamp(Timestamp ts);
std::string format_date(Date d);

Date date_of(Timestamp ts);
Timestamp start_of(Date d);
/// Minutes since local midnight.
int minute_of_day(Timestamp ts);

struct RawEntry {
  Timestamp timestamp;
  double load_mw;
};

/// Parsed rows, sorted by timestamp; duplicates are still present.
struct RawSeries {
  std::vector<RawEntry> entries;
};

/// Gap-free, duplicate-free 15-minute series.
class LoadSeries {
public:
  LoadSeries() = default;
  LoadSeries(Timestamp start, std::vector<double> values);

  Timestamp start() const noexcept { return start_; }
  Timestamp end() const noexcept { return start_ + kStep * static_cast<int>(values_.size()); }
  Timestamp time_at(std::size_t i) const noexcept { return start_ + kStep * static_cast<int>(i); }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }
  const std::vector<double>& values() const noexcept { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }

  /// Index of `ts` in this series, or nullopt when outside / off-grid.
  std::optional<std::size_t> index_of(Timestamp ts) const;
  /// Sub-series covering [from, to).
  LoadSeries slice(Timestamp from, Timestamp to) const;
  /// Trims leading/trailing partial days so the series starts at 00:00 and
  /// holds a whole number of days.
  LoadSeries day_aligned() const;

  friend bool operator==(const LoadSeries&, const LoadSeries&) = default;

private:
  Timestamp start_{};
  std::vector<double> values_;
};

struct SplitSpec {
  int train_first_year = 0;
  int train_last_year = 0;
  int validation_year = 0;
  int test_year = 0;
};

struct SplitDataset {
  LoadSeries train;
  LoadSeries validation;
  LoadSeries test;
};

RawSeries ingest_csv(const std::filesystem::path& path);
RawSeries parse_csv(std::string_view text);
void write_csv(const std::filesystem::path& path, const LoadSeries& series);

std::set<Date> read_holidays(const std::filesystem::path& path);

struct WrangleOptions {
  std::size_t max_gap_steps = 96;
};

LoadSeries wrangle(const RawSeries& raw, const WrangleOptions& opts = {});
LoadSeries wrangle(const LoadSeries& clean, const WrangleOptions& opts = {});

/// Cuts at Jan 1 00:00 boundaries. Every requested year must be fully covered.
SplitDataset split_by_years(const LoadSeries& series, const SplitSpec& spec);
/// Cuts at arbitrary midnight boundaries: [train_start, validation_start),
/// [validation_start, test_start), [test_start, end).
SplitDataset split_by_dates(const LoadSeries& series, Date train_start, Date validation_start,
                            Date test_start, Date end);

/// Concatenates two contiguous series; throws unless `b` starts where `a` ends.
LoadSeries join(const LoadSeries& a, const LoadSeries& b);

struct ShiftEvent {
  Date first;   ///< inclusive
  Date last;    ///< inclusive
  double factor = 1.0;
};

struct SyntheticSpec {
  Date start{std::chrono::year{2016}, std::chrono::January, std::chrono::day{1}};
  int years = 1;
  /// Explicit end date (exclusive). Overrides `years` when set.
  std::optional<Date> end;
  double base_mw = 5000.0;
  double daily_amplitude = 0.20;   ///< fraction of base
  double weekly_amplitude = 0.05;
  double yearly_amplitude = 0.10;
  double noise_sigma = 0.02;       ///< fraction of base
  std::vector<ShiftEvent> shifts;
};

/// Noise-free harmonic component at `ts` (base + daily + weekly + yearly).
double synthetic_harmonic(const SyntheticSpec& spec, Timestamp ts);
LoadSeries generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

}  // namespace gridcast
