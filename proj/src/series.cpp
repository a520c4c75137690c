#include "gridcast/series.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

namespace gridcast {

using namespace std::chrono;

ParseError::ParseError(std::size_t line, const std::string& what)
    : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

namespace {

bool read_int(std::string_view s, int& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

std::optional<Date> parse_date(std::string_view text) {
  text = trim(text);
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
  int y = 0, m = 0, d = 0;
  if (!read_int(text.substr(0, 4), y) || !read_int(text.substr(5, 2), m) ||
      !read_int(text.substr(8, 2), d))
    return std::nullopt;
  Date date{year{y}, month{static_cast<unsigned>(m)}, day{static_cast<unsigned>(d)}};
  if (!date.ok()) return std::nullopt;
  return date;
}

std::optional<Timestamp> parse_timestamp(std::string_view text) {
  text = trim(text);
  if (text.size() == 19) {
    if (text.substr(16) != ":00") return std::nullopt;
    text = text.substr(0, 16);
  }
  if (text.size() != 16 || (text[10] != 'T' && text[10] != ' ') || text[13] != ':')
    return std::nullopt;
  auto date = parse_date(text.substr(0, 10));
  int hh = 0, mm = 0;
  if (!date || !read_int(text.substr(11, 2), hh) || !read_int(text.substr(14, 2), mm))
    return std::nullopt;
  if (hh < 0 || hh > 23 || mm < 0 || mm > 59) return std::nullopt;
  return start_of(*date) + hours{hh} + minutes{mm};
}

std::string format_date(Date d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()),
                static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
  return buf;
}

std::string format_timestamp(Timestamp ts) {
  const int mod = minute_of_day(ts);
  char buf[16];
  std::snprintf(buf, sizeof buf, "T%02d:%02d", mod / 60, mod % 60);
  return format_date(date_of(ts)) + buf;
}

Date date_of(Timestamp ts) { return Date{floor<days>(ts)}; }

Timestamp start_of(Date d) { return Timestamp{sys_days{d}.time_since_epoch()}; }

int minute_of_day(Timestamp ts) {
  return static_cast<int>((ts - floor<days>(ts)).count());
}

// ---------------------------------------------------------------------------

LoadSeries::LoadSeries(Timestamp start, std::vector<double> values)
    : start_(start), values_(std::move(values)) {
  if (start_.time_since_epoch() % kStep != minutes{0})
    throw std::invalid_argument("series start is not on the 15-minute grid");
  for (std::size_t i = 0; i < values_.size(); ++i)
    if (!std::isfinite(values_[i]))
      throw std::invalid_argument("non-finite load at " + format_timestamp(time_at(i)));
}

std::optional<std::size_t> LoadSeries::index_of(Timestamp ts) const {
  if (ts < start_ || ts >= end()) return std::nullopt;
  const auto offset = ts - start_;
  if (offset % kStep != minutes{0}) return std::nullopt;
  return static_cast<std::size_t>(offset / kStep);
}

LoadSeries LoadSeries::slice(Timestamp from, Timestamp to) const {
  from = std::max(from, start_);
  to = std::min(to, end());
  if (to <= from) return LoadSeries{from, {}};
  const auto a = static_cast<std::size_t>((from - start_) / kStep);
  const auto b = static_cast<std::size_t>((to - start_) / kStep);
  return LoadSeries{start_ + kStep * static_cast<int>(a),
                    std::vector<double>(values_.begin() + a, values_.begin() + b)};
}

LoadSeries LoadSeries::day_aligned() const {
  Timestamp first = ceil<days>(start_);
  Timestamp last = floor<days>(end());
  return slice(first, last);
}

// ---------------------------------------------------------------------------

RawSeries parse_csv(std::string_view text) {
  RawSeries raw;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (!text.empty()) {
    auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    if (!header_seen) {
      header_seen = true;
      if (line != "timestamp,load_mw")
        throw ParseError(line_no, "expected header 'timestamp,load_mw'");
      continue;
    }
    auto comma = line.find(',');
    if (comma == std::string_view::npos || line.find(',', comma + 1) != std::string_view::npos)
      throw ParseError(line_no, "expected two comma-separated fields");
    auto ts = parse_timestamp(line.substr(0, comma));
    if (!ts) throw ParseError(line_no, "invalid timestamp '" + std::string(line.substr(0, comma)) + "'");
    if (ts->time_since_epoch() % kStep != minutes{0})
      throw ParseError(line_no, "timestamp not aligned to the 15-minute grid");
    auto field = trim(line.substr(comma + 1));
    double load = 0.0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), load);
    if (ec != std::errc{} || ptr != field.data() + field.size())
      throw ParseError(line_no, "invalid load value '" + std::string(field) + "'");
    if (!std::isfinite(load)) throw ParseError(line_no, "non-finite load value");
    raw.entries.push_back({*ts, load});
  }
  if (!header_seen) throw ParseError(1, "empty file");
  std::stable_sort(raw.entries.begin(), raw.entries.end(),
                   [](const RawEntry& a, const RawEntry& b) { return a.timestamp < b.timestamp; });
  return raw;
}

RawSeries ingest_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str());
}

void write_csv(const std::filesystem::path& path, const LoadSeries& series) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "timestamp,load_mw\n";
  char buf[64];
  for (std::size_t i = 0; i < series.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", series[i]);
    out << format_timestamp(series.time_at(i)) << ',' << buf << '\n';
  }
}

std::set<Date> read_holidays(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::set<Date> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    auto d = parse_date(t);
    if (!d) throw ParseError(line_no, "invalid date '" + std::string(t) + "'");
    out.insert(*d);
  }
  return out;
}

// ---------------------------------------------------------------------------

LoadSeries wrangle(const RawSeries& raw, const WrangleOptions& opts) {
  if (raw.entries.empty()) throw std::invalid_argument("wrangle: empty series");

  // Keep the first occurrence of each timestamp.
  std::vector<RawEntry> uniq;
  uniq.reserve(raw.entries.size());
  for (const auto& e : raw.entries) {
    if (!uniq.empty() && uniq.back().timestamp == e.timestamp) continue;
    if (!uniq.empty() && e.timestamp < uniq.back().timestamp)
      throw std::invalid_argument("wrangle: entries not sorted");
    uniq.push_back(e);
  }

  const Timestamp start = uniq.front().timestamp;
  const auto steps = static_cast<std::size_t>((uniq.back().timestamp - start) / kStep) + 1;
  std::vector<double> values(steps);
  std::size_t prev = 0;
  values[0] = uniq[0].load_mw;
  for (std::size_t j = 1; j < uniq.size(); ++j) {
    const auto idx = static_cast<std::size_t>((uniq[j].timestamp - start) / kStep);
    const std::size_t missing = idx - prev - 1;
    if (missing > opts.max_gap_steps)
      throw std::runtime_error("wrangle: gap of " + std::to_string(missing) + " steps from " +
                               format_timestamp(uniq[j - 1].timestamp + kStep) + " exceeds limit of " +
                               std::to_string(opts.max_gap_steps));
    const double a = uniq[j - 1].load_mw;
    const double b = uniq[j].load_mw;
    const double span = static_cast<double>(idx - prev);
    for (std::size_t g = prev + 1; g < idx; ++g)
      values[g] = a + (b - a) * static_cast<double>(g - prev) / span;
    values[idx] = b;
    prev = idx;
  }
  return LoadSeries{start, std::move(values)};
}

LoadSeries wrangle(const LoadSeries& clean, const WrangleOptions& opts) {
  RawSeries raw;
  raw.entries.reserve(clean.size());
  for (std::size_t i = 0; i < clean.size(); ++i) raw.entries.push_back({clean.time_at(i), clean[i]});
  return wrangle(raw, opts);
}

// ---------------------------------------------------------------------------

namespace {

Timestamp jan1(int y) { return start_of(Date{year{y}, January, day{1}}); }

void require_covered(const LoadSeries& s, Timestamp from, Timestamp to, const std::string& label) {
  if (from < s.start() || to > s.end())
    throw std::invalid_argument("split: " + label + " is absent or only partially covered (" +
                                format_timestamp(s.start()) + " .. " + format_timestamp(s.end()) +
                                ")");
}

}  // namespace

SplitDataset split_by_years(const LoadSeries& series, const SplitSpec& spec) {
  if (spec.train_first_year > spec.train_last_year ||
      spec.train_last_year >= spec.validation_year || spec.validation_year >= spec.test_year)
    throw std::invalid_argument("split: years must satisfy train < validation < test");
  for (int y = spec.train_first_year; y <= spec.test_year; ++y)
    require_covered(series, jan1(y), jan1(y + 1), "year " + std::to_string(y));
  SplitDataset out;
  out.train = series.slice(jan1(spec.train_first_year), jan1(spec.train_last_year + 1));
  out.validation = series.slice(jan1(spec.validation_year), jan1(spec.validation_year + 1));
  out.test = series.slice(jan1(spec.test_year), jan1(spec.test_year + 1));
  return out;
}

SplitDataset split_by_dates(const LoadSeries& series, Date train_start, Date validation_start,
                            Date test_start, Date end) {
  const auto a = start_of(train_start), b = start_of(validation_start), c = start_of(test_start),
             d = start_of(end);
  if (!(a < b && b < c && c < d))
    throw std::invalid_argument("split: boundaries must be strictly increasing");
  require_covered(series, a, d, "range " + format_date(train_start) + " .. " + format_date(end));
  return SplitDataset{series.slice(a, b), series.slice(b, c), series.slice(c, d)};
}

// ---------------------------------------------------------------------------

double synthetic_harmonic(const SyntheticSpec& spec, Timestamp ts) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  const double tod = minute_of_day(ts) / 1440.0;
  const auto day_point = floor<days>(ts);
  const double dow = static_cast<double>(weekday{day_point}.iso_encoding() - 1);  // Monday = 0
  const double epoch_days = static_cast<double>(day_point.time_since_epoch().count()) + tod;
  const double daily = -std::cos(two_pi * tod);
  const double weekly = std::cos(two_pi * (dow + tod - 2.5) / 7.0);
  const double yearly = std::cos(two_pi * epoch_days / 365.25);
  return spec.base_mw * (1.0 + spec.daily_amplitude * daily + spec.weekly_amplitude * weekly +
                         spec.yearly_amplitude * yearly);
}

LoadSeries generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  if (spec.base_mw <= 0.0 || spec.daily_amplitude < 0.0 || spec.weekly_amplitude < 0.0 ||
      spec.yearly_amplitude < 0.0 || spec.noise_sigma < 0.0)
    throw std::invalid_argument("synthetic: base must be positive; amplitudes and noise non-negative");
  if (!spec.end && spec.years < 1) throw std::invalid_argument("synthetic: years must be >= 1");
  for (const auto& s : spec.shifts)
    if (!(s.factor > 0.0) || sys_days{s.last} < sys_days{s.first})
      throw std::invalid_argument("synthetic: shift events need factor > 0 and first <= last");

  const Timestamp start = start_of(spec.start);
  const Timestamp stop =
      spec.end ? start_of(*spec.end)
               : start_of(Date{spec.start.year() + years{spec.years}, spec.start.month(), spec.start.day()});
  if (stop <= start) throw std::invalid_argument("synthetic: end must follow start");
  const auto n = static_cast<std::size_t>((stop - start) / kStep);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<double> values(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Timestamp ts = start + kStep * static_cast<int>(i);
    double v = synthetic_harmonic(spec, ts);
    if (spec.noise_sigma > 0.0) v += spec.noise_sigma * spec.base_mw * noise(rng);
    const auto d = floor<days>(ts);
    for (const auto& s : spec.shifts)
      if (d >= sys_days{s.first} && d <= sys_days{s.last}) v *= s.factor;
    values[i] = v;
  }
  return LoadSeries{start, std::move(values)};
}

LoadSeries join(const LoadSeries& a, const LoadSeries& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  if (a.end() != b.start())
    throw std::invalid_argument("join: series are not contiguous (" + format_timestamp(a.end()) + " vs " +
                                format_timestamp(b.start()) + ")");
  std::vector<double> v = a.values();
  v.insert(v.end(), b.values().begin(), b.values().end());
  return LoadSeries(a.start(), std::move(v));
}

}  // namespace gridcast
