#include "gridcast/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"

#include "gridcast/covariates.hpp"
#include "gridcast/experiment.hpp"

namespace gridcast::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool json = false;
};

class UsageError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::uint64_t resolve_seed(const Common& c, const std::optional<Config>& cfg) {
  if (c.seed) return *c.seed;
  if (cfg) {
    if (auto s = cfg->get_int("seed")) return static_cast<std::uint64_t>(*s);
  }
  if (const char* env = std::getenv("GRIDCAST_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw UsageError(std::string("GRIDCAST_SEED is not an integer: ") + env);
    }
  }
  return 0;
}

std::optional<Config> load_config(const Common& c) {
  if (c.config.empty()) return std::nullopt;
  return Config::load(c.config);
}

fs::path out_dir(const Common& c, const fs::path& fallback = ".") {
  fs::path p = c.out.empty() ? fallback : fs::path(c.out);
  fs::create_directories(p);
  return p;
}

Date require_date(const std::string& flag, const std::string& text) {
  auto d = parse_date(text);
  if (!d) throw UsageError(flag + " expects YYYY-MM-DD, got " + text);
  return *d;
}

LoadSeries read_clean(const std::string& path) { return wrangle(ingest_csv(path)); }

void emit(std::ostream& out, const Common& c, const json& j, const std::string& text) {
  if (c.json)
    out << j.dump() << '\n';
  else
    out << text;
}

std::string fmt_opt(const json& v, int precision = 3) {
  if (v.is_null()) return "-";
  std::ostringstream s;
  s << std::fixed << std::setprecision(precision) << v.get<double>();
  return s.str();
}

// --- subcommands -----------------------------------------------------------

struct SynthArgs {
  std::string start, end, file = "load.csv";
  int years = 0;
  std::optional<double> base, noise;
  std::vector<std::string> shifts;
};

int cmd_synth(const Common& c, const SynthArgs& a, std::ostream& out) {
  const auto cfg = load_config(c);
  SyntheticSpec s;
  if (cfg) s = experiment::synthetic_from_config(*cfg);
  if (!a.start.empty()) s.start = require_date("--start", a.start);
  if (!a.end.empty()) s.end = require_date("--end", a.end);
  if (a.years > 0) s.years = a.years;
  if (a.base) s.base_mw = *a.base;
  if (a.noise) s.noise_sigma = *a.noise;
  for (const auto& sh : a.shifts) s.shifts.push_back(experiment::parse_shift(sh));
  const auto series = generate_synthetic(s, resolve_seed(c, cfg));
  const auto path = out_dir(c) / a.file;
  write_csv(path, series);
  json j{{"path", path.string()},
         {"rows", series.size()},
         {"start", format_timestamp(series.start())},
         {"end", format_timestamp(series.end())}};
  emit(out, c, j, "wrote " + std::to_string(series.size()) + " rows to " + path.string() + "\n");
  return kExitOk;
}

int cmd_ingest(const Common& c, const std::string& data, std::size_t max_gap, std::ostream& out) {
  const auto raw = ingest_csv(data);
  const auto clean = wrangle(raw, WrangleOptions{max_gap});
  std::set<Timestamp> unique;
  for (const auto& e : raw.entries) unique.insert(e.timestamp);
  std::size_t observed = 0;
  for (auto ts : unique)
    if (ts >= clean.start() && ts < clean.end()) ++observed;
  const auto path = out_dir(c) / "clean.csv";
  write_csv(path, clean);
  json j{{"path", path.string()},
         {"raw_rows", raw.entries.size()},
         {"duplicates_dropped", raw.entries.size() - unique.size()},
         {"trimmed", unique.size() - observed},
         {"filled", clean.size() - observed},
         {"rows", clean.size()},
         {"start", format_timestamp(clean.start())},
         {"end", format_timestamp(clean.end())}};
  emit(out, c, j,
       "clean series: " + std::to_string(clean.size()) + " rows, " + std::to_string(clean.size() - observed) +
           " filled, " + std::to_string(raw.entries.size() - unique.size()) + " duplicates dropped -> " +
           path.string() + "\n");
  return kExitOk;
}

int cmd_features(const Common& c, const std::string& data, const std::string& holidays_path, std::ostream& out) {
  const auto series = read_clean(data);
  const auto holidays = holidays_path.empty() ? std::set<Date>{} : read_holidays(holidays_path);
  const auto m = build_matrix(series, holidays);
  const auto path = out_dir(c) / "covariates.csv";
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << "timestamp,year,month_sin,month_cos,doy_sin,doy_cos,dow_sin,dow_cos,woy_sin,woy_cos,holiday\n";
  char buf[32];
  for (std::size_t i = 0; i < m.rows(); ++i) {
    f << format_timestamp(series.time_at(i));
    for (std::size_t j = 0; j < CovariateMatrix::kWidth; ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
      f << ',' << buf;
    }
    f << '\n';
  }
  json j{{"path", path.string()}, {"rows", m.rows()}, {"columns", CovariateMatrix::kWidth}};
  emit(out, c, j, "wrote " + std::to_string(m.rows()) + " covariate rows to " + path.string() + "\n");
  return kExitOk;
}

struct TrainArgs {
  std::string family = "nbeats", data;
  int flavor = 0;
  std::size_t lookback = 384;
};

int cmd_train(const Common& c, const TrainArgs& a, std::ostream& out) {
  const auto cfg = load_config(c);
  if (!cfg) throw UsageError("train needs --config (for the split and training settings)");
  auto spec = experiment::experiment_from_config(*cfg);
  spec.seed = resolve_seed(c, cfg);
  if (!a.data.empty()) {
    spec.data.csv = a.data;
    spec.data.synthetic.reset();
  }
  experiment::GridCell cell{0, models::parse_family(a.family), a.flavor,
                            models::parse_family(a.family) == models::Family::Psf ? 0 : a.lookback};
  const auto series = experiment::load_series(spec.data, spec.seed);
  const auto holidays = experiment::load_holidays(spec.data);
  const auto data = experiment::apply_split(series, spec.split);
  const auto fspec = experiment::cell_spec(spec, cell);
  auto opts = experiment::cell_fit_options(spec, fspec);
  opts.train.seed = spec.seed;
  auto model = models::Forecaster::build(fspec, spec.seed);
  const auto stats = model.fit(data, holidays, opts);
  const auto dir = out_dir(c);
  model.save(dir / "model.json");
  json j{{"model", (dir / "model.json").string()},
         {"family", std::string(models::to_string(cell.family))},
         {"flavor", cell.flavor},
         {"lookback", cell.lookback},
         {"epochs", stats.epochs_run},
         {"best_epoch", stats.best_epoch},
         {"best_validation_loss", stats.best_validation_loss},
         {"train_wall_seconds", stats.wall_seconds}};
  std::ofstream(dir / "training.json", std::ios::binary) << j.dump(2) << '\n';
  emit(out, c, j,
       "trained " + j["family"].get<std::string>() + " flavor " + std::to_string(cell.flavor) + " in " +
           std::to_string(stats.epochs_run) + " epochs -> " + (dir / "model.json").string() + "\n");
  return kExitOk;
}

struct BacktestArgs {
  std::string model, data, holidays, test_start, test_end, registry;
  std::size_t model_id = 0;
};

int cmd_backtest(const Common& c, const BacktestArgs& a, std::ostream& out) {
  const auto model = models::Forecaster::load(a.model);
  const auto series = read_clean(a.data).day_aligned();
  Date start;
  if (!a.test_start.empty()) {
    start = require_date("--test-start", a.test_start);
  } else {
    const auto last = date_of(series.end() - kStep);
    start = Date{last.year(), std::chrono::January, std::chrono::day{1}};
  }
  const Timestamp t0 = start_of(start);
  const Timestamp t1 = a.test_end.empty() ? series.end() : start_of(require_date("--test-end", a.test_end));
  if (t0 <= series.start() || t0 >= t1 || t1 > series.end())
    throw std::invalid_argument("backtest: test period " + format_timestamp(t0) + " .. " + format_timestamp(t1) +
                                " is not inside the data with history before it");
  const auto history = series.slice(series.start(), t0);
  const auto test = series.slice(t0, t1);
  const auto holidays = a.holidays.empty() ? std::set<Date>{} : read_holidays(a.holidays);
  auto report = backtest::backtest_day_ahead(model, history, test, holidays);
  report.model_id = a.model_id;
  report.family = std::string(models::to_string(model.family()));
  report.flavor = model.spec().flavor;
  report.lookback = model.spec().lookback;
  const auto row = backtest::report_json(report);
  if (!c.out.empty())
    std::ofstream(out_dir(c) / "report.json", std::ios::binary) << backtest::report_detail_json(report).dump() << '\n';
  if (!a.registry.empty()) backtest::append_registry(a.registry, row);
  std::ostringstream text;
  text << report.family << " flavor " << report.flavor << ": MAPE " << fmt_opt(row["overall_mape"]) << "% over "
       << report.days() << " days";
  for (auto s : backtest::kSeasons) text << ", " << backtest::to_string(s) << ' ' << fmt_opt(row["seasonal"][std::string(backtest::to_string(s))]);
  text << '\n';
  emit(out, c, row, text.str());
  return kExitOk;
}

int cmd_grid(const Common& c, std::size_t jobs, std::ostream& out) {
  const auto cfg = load_config(c);
  if (!cfg) throw UsageError("grid needs --config");
  auto spec = experiment::experiment_from_config(*cfg);
  spec.seed = resolve_seed(c, cfg);
  if (!c.out.empty()) spec.out_dir = c.out;
  if (jobs > 0) spec.jobs = jobs;
  const auto rows = experiment::run_experiment_grid(spec);
  std::ostringstream text;
  text << "id  family  flavor  lookback  MAPE     epochs  split\n";
  std::size_t failed = 0;
  for (const auto& r : rows) {
    if (r.contains("error")) ++failed;
    text << std::left << std::setw(4) << r["model_id"].get<std::size_t>() << std::setw(8)
         << r["family"].get<std::string>() << std::setw(8) << r["flavor"].get<int>() << std::setw(10)
         << r["lookback"].get<std::size_t>() << std::setw(9) << fmt_opt(r["overall_mape"]) << std::setw(8)
         << (r["epochs"].is_null() ? std::string("-") : std::to_string(r["epochs"].get<std::size_t>()))
         << r["split"].get<std::string>();
    if (r.contains("error")) text << "  error: " << r["error"].get<std::string>();
    text << '\n';
  }
  text << "registry: " << (spec.out_dir / "registry.jsonl").string() << '\n';
  emit(out, c, json(rows), text.str());
  return failed == rows.size() && !rows.empty() ? kExitRuntime : kExitOk;
}

struct MonitorArgs {
  std::string report, data, years;
  std::optional<double> baseline, ratio;
  std::optional<std::size_t> window, persistence, bins;
};

int cmd_monitor(const Common& c, const MonitorArgs& a, std::ostream& out) {
  if (a.report.empty() && a.data.empty()) throw UsageError("monitor needs --report and/or --data");
  const auto cfg = load_config(c);
  drift::DriftState state;
  std::size_t bins = 50;
  if (cfg) {
    if (auto v = cfg->get_double("monitor.baseline_mape")) state.baseline_mape = *v;
    if (auto v = cfg->get_int("monitor.rolling_window_days")) state.rolling_window_days = static_cast<std::size_t>(*v);
    if (auto v = cfg->get_double("monitor.threshold_ratio")) state.threshold_ratio = *v;
    if (auto v = cfg->get_int("monitor.persistence_days")) state.persistence_days = static_cast<std::size_t>(*v);
    if (auto v = cfg->get_int("monitor.histogram_bins")) bins = static_cast<std::size_t>(*v);
  }
  if (a.baseline) state.baseline_mape = *a.baseline;
  if (a.window) state.rolling_window_days = *a.window;
  if (a.ratio) state.threshold_ratio = *a.ratio;
  if (a.persistence) state.persistence_days = *a.persistence;
  if (a.bins) bins = *a.bins;

  json j = json::object();
  std::ostringstream text;
  const auto dir = out_dir(c);
  if (!a.data.empty()) {
    const auto series = read_clean(a.data);
    std::vector<int> years;
    Config tmp;
    tmp.set("y", a.years);
    for (const auto& y : tmp.get_list("y")) years.push_back(std::stoi(y));
    if (years.empty())
      for (int y = static_cast<int>(date_of(series.start()).year());
           y <= static_cast<int>(date_of(series.end() - kStep).year()); ++y)
        years.push_back(y);
    const auto stats = drift::distribution_stats(series, years, bins);
    drift::write_stats_csv(stats, dir);
    j["stats"] = {{"years", years}, {"bins", bins}, {"dir", dir.string()}};
    text << "distribution statistics for " << years.size() << " year(s) -> " << dir.string() << '\n';
  }
  if (!a.report.empty()) {
    std::ifstream in(a.report, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + a.report);
    const auto report = backtest::report_from_detail_json(json::parse(in));
    if (state.baseline_mape <= 0.0) throw UsageError("monitor needs a positive --baseline (validation MAPE)");
    state.validate();
    const auto rolling = drift::rolling_mape(report, state.rolling_window_days);
    const auto result = drift::evaluate_drift(state, rolling);
    drift::write_event_log(dir / "drift_events.jsonl", result.events);
    j["decision"] = std::string(drift::to_string(result.decision()));
    j["triggered_on"] = result.triggered_on ? json(format_date(*result.triggered_on)) : json(nullptr);
    j["threshold_mape"] = state.threshold();
    j["events"] = result.events.size();
    text << "decision: " << drift::to_string(result.decision());
    if (result.triggered_on) text << " (triggered on " << format_date(*result.triggered_on) << ")";
    text << "; events -> " << (dir / "drift_events.jsonl").string() << '\n';
  }
  emit(out, c, j, text.str());
  return kExitOk;
}

int cmd_report(const Common& c, const std::string& registry, std::ostream& out) {
  const auto rows = backtest::read_registry(registry);
  std::ostringstream text;
  text << "id  family  flavor  lookback  MAPE     winter   spring   summer   autumn   epochs  wall_s\n";
  for (const auto& r : rows) {
    text << std::left << std::setw(4) << r.value("model_id", 0) << std::setw(8) << r.value("family", "?")
         << std::setw(8) << r.value("flavor", 0) << std::setw(10) << r.value("lookback", 0) << std::setw(9)
         << fmt_opt(r["overall_mape"]);
    for (const char* s : {"winter", "spring", "summer", "autumn"}) text << std::setw(9) << fmt_opt(r["seasonal"][s]);
    text << std::setw(8) << (r["epochs"].is_null() ? std::string("-") : std::to_string(r["epochs"].get<std::size_t>()))
         << fmt_opt(r["train_wall_seconds"], 1);
    if (r.contains("split")) text << "  " << r["split"].get<std::string>();
    if (r.contains("error")) text << "  error: " << r["error"].get<std::string>();
    text << '\n';
  }
  emit(out, c, json(rows), text.str());
  return kExitOk;
}

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "configuration file (key = value with [sections])");
  app->add_option("--seed", c.seed, "random seed (fallback: GRIDCAST_SEED)");
  app->add_option("--out", c.out, "output directory");
  app->add_flag("--json", c.json, "machine-readable JSON on stdout");
}

}  // namespace

int command_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"gridcast: day-ahead electricity load forecasting", "gridcast"};
  app.require_subcommand(1);
  Common common;

  SynthArgs synth;
  auto* s_synth = app.add_subcommand("synth", "generate a synthetic load series CSV");
  s_synth->add_option("--start", synth.start, "first day (YYYY-MM-DD)");
  s_synth->add_option("--end", synth.end, "end day, exclusive (YYYY-MM-DD)");
  s_synth->add_option("--years", synth.years, "length in years when --end is absent");
  s_synth->add_option("--base", synth.base, "base load in MW");
  s_synth->add_option("--noise", synth.noise, "noise sigma as a fraction of the base");
  s_synth->add_option("--shift", synth.shifts, "FIRST:LAST:FACTOR multiplicative shift (repeatable)");
  s_synth->add_option("--file", synth.file, "file name inside --out");

  std::string ingest_data;
  std::size_t max_gap = 96;
  auto* s_ingest = app.add_subcommand("ingest", "clean a raw load CSV (duplicates, gaps)");
  s_ingest->add_option("--data", ingest_data, "raw CSV with header timestamp,load_mw")->required();
  s_ingest->add_option("--max-gap", max_gap, "longest fillable gap in 15-minute steps");

  std::string feat_data, feat_holidays;
  auto* s_features = app.add_subcommand("features", "write calendar covariates for a series");
  s_features->add_option("--data", feat_data, "load CSV")->required();
  s_features->add_option("--holidays", feat_holidays, "holiday dates, one YYYY-MM-DD per line");

  TrainArgs train;
  auto* s_train = app.add_subcommand("train", "fit one forecaster");
  s_train->add_option("--family", train.family, "psf, nbeats, lstm or tcn");
  s_train->add_option("--flavor", train.flavor, "0 or 1");
  s_train->add_option("--lookback", train.lookback, "lookback window in steps");
  s_train->add_option("--data", train.data, "load CSV (overrides the config data section)");

  BacktestArgs bt;
  auto* s_backtest = app.add_subcommand("backtest", "day-ahead backtest of a saved model");
  s_backtest->add_option("--model", bt.model, "model checkpoint (JSON)")->required();
  s_backtest->add_option("--data", bt.data, "load CSV covering history and test period")->required();
  s_backtest->add_option("--holidays", bt.holidays, "holiday dates file");
  s_backtest->add_option("--test-start", bt.test_start, "first test day (default: Jan 1 of the last year)");
  s_backtest->add_option("--test-end", bt.test_end, "end of the test period, exclusive");
  s_backtest->add_option("--registry", bt.registry, "append the report row to this JSON-lines file");
  s_backtest->add_option("--model-id", bt.model_id, "model id recorded in the report");

  std::size_t jobs = 0;
  auto* s_grid = app.add_subcommand("grid", "run the experiment grid of a configuration");
  s_grid->add_option("--jobs", jobs, "grid cells trained in parallel");

  MonitorArgs mon;
  auto* s_monitor = app.add_subcommand("monitor", "rolling-error drift check and distribution statistics");
  s_monitor->add_option("--report", mon.report, "detailed backtest report JSON");
  s_monitor->add_option("--baseline", mon.baseline, "baseline (validation) MAPE in percent");
  s_monitor->add_option("--window", mon.window, "rolling window in days");
  s_monitor->add_option("--ratio", mon.ratio, "breach threshold as a multiple of the baseline");
  s_monitor->add_option("--persistence", mon.persistence, "consecutive breach days before retraining");
  s_monitor->add_option("--data", mon.data, "load CSV for distribution statistics");
  s_monitor->add_option("--years", mon.years, "comma-separated years for the statistics");
  s_monitor->add_option("--bins", mon.bins, "histogram bins");

  std::string registry;
  auto* s_report = app.add_subcommand("report", "summarize a run registry");
  s_report->add_option("--registry", registry, "registry JSON-lines file")->required();

  for (auto* sub : app.get_subcommands({})) add_common(sub, common);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (s_synth->parsed()) return cmd_synth(common, synth, out);
    if (s_ingest->parsed()) return cmd_ingest(common, ingest_data, max_gap, out);
    if (s_features->parsed()) return cmd_features(common, feat_data, feat_holidays, out);
    if (s_train->parsed()) return cmd_train(common, train, out);
    if (s_backtest->parsed()) return cmd_backtest(common, bt, out);
    if (s_grid->parsed()) return cmd_grid(common, jobs, out);
    if (s_monitor->parsed()) return cmd_monitor(common, mon, out);
    if (s_report->parsed()) return cmd_report(common, registry, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  err << app.help();
  return kExitUsage;
}

int command_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return command_dispatch(args, out, err);
}

}  // namespace gridcast::cli
