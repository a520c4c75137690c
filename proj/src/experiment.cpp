#include "gridcast/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <fstream>
#include <stdexcept>
#include <thread>

namespace gridcast::experiment {

using nlohmann::json;
using models::Family;

namespace {

Date require_date(const std::string& key, const std::string& text) {
  auto d = parse_date(text);
  if (!d) throw std::invalid_argument("config: '" + key + "' is not a YYYY-MM-DD date: " + text);
  return *d;
}

std::size_t to_size(const std::string& key, const std::string& text) {
  long long v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size() || v < 0)
    throw std::invalid_argument("config: '" + key + "' expects a non-negative integer, got " + text);
  return static_cast<std::size_t>(v);
}

double to_double(const std::string& key, const std::string& text) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    throw std::invalid_argument("config: '" + key + "' expects a number, got " + text);
  return v;
}

std::optional<std::size_t> get_size(const Config& cfg, const std::string& key) {
  auto v = cfg.get_int(key);
  if (!v) return std::nullopt;
  if (*v < 0) throw std::invalid_argument("config: '" + key + "' must be non-negative");
  return static_cast<std::size_t>(*v);
}

std::optional<SplitChoice> parse_split(const Config& cfg, const std::string& p) {
  if (cfg.contains(p + "train_start")) {
    DateSplit d;
    for (const char* k : {"train_start", "validation_start", "test_start", "end"})
      if (!cfg.contains(p + k)) throw std::invalid_argument("config: date split needs '" + p + k + "'");
    d.train_start = require_date(p + "train_start", *cfg.get(p + "train_start"));
    d.validation_start = require_date(p + "validation_start", *cfg.get(p + "validation_start"));
    d.test_start = require_date(p + "test_start", *cfg.get(p + "test_start"));
    d.end = require_date(p + "end", *cfg.get(p + "end"));
    return d;
  }
  if (!cfg.contains(p + "train_years") && !cfg.contains(p + "test_year")) return std::nullopt;
  SplitSpec s;
  const auto years = cfg.get(p + "train_years");
  if (!years) throw std::invalid_argument("config: year split needs '" + p + "train_years' (e.g. 2009-2017)");
  const auto dash = years->find('-');
  const std::string first = years->substr(0, dash);
  const std::string last = dash == std::string::npos ? first : years->substr(dash + 1);
  s.train_first_year = static_cast<int>(to_size(p + "train_years", first));
  s.train_last_year = static_cast<int>(to_size(p + "train_years", last));
  const auto v = cfg.get_int(p + "validation_year");
  const auto t = cfg.get_int(p + "test_year");
  s.validation_year = v ? static_cast<int>(*v) : s.train_last_year + 1;
  s.test_year = t ? static_cast<int>(*t) : s.validation_year + 1;
  return s;
}

}  // namespace

ShiftEvent parse_shift(const std::string& text) {
  // first:last:factor
  const auto a = text.find(':');
  const auto b = a == std::string::npos ? a : text.find(':', a + 1);
  if (b == std::string::npos) throw std::invalid_argument("config: shift must be FIRST:LAST:FACTOR, got " + text);
  ShiftEvent e;
  e.first = require_date("data.shifts", text.substr(0, a));
  e.last = require_date("data.shifts", text.substr(a + 1, b - a - 1));
  e.factor = to_double("data.shifts", text.substr(b + 1));
  return e;
}

SyntheticSpec synthetic_from_config(const Config& cfg) {
  SyntheticSpec s;
  if (auto v = cfg.get("data.start")) s.start = require_date("data.start", *v);
  if (auto v = cfg.get("data.end")) s.end = require_date("data.end", *v);
  if (auto v = cfg.get_int("data.years")) s.years = static_cast<int>(*v);
  if (auto v = cfg.get_double("data.base_mw")) s.base_mw = *v;
  if (auto v = cfg.get_double("data.daily_amplitude")) s.daily_amplitude = *v;
  if (auto v = cfg.get_double("data.weekly_amplitude")) s.weekly_amplitude = *v;
  if (auto v = cfg.get_double("data.yearly_amplitude")) s.yearly_amplitude = *v;
  if (auto v = cfg.get_double("data.noise_sigma")) s.noise_sigma = *v;
  for (const auto& item : cfg.get_list("data.shifts")) s.shifts.push_back(parse_shift(item));
  return s;
}

namespace {

const std::set<std::string, std::less<>> kKnownKeys = {
    "seed", "jobs",
    "data.path", "data.holidays", "data.max_gap_steps", "data.synthetic", "data.start", "data.end", "data.years",
    "data.base_mw", "data.daily_amplitude", "data.weekly_amplitude", "data.yearly_amplitude", "data.noise_sigma",
    "data.shifts",
    "split.train_years", "split.validation_year", "split.test_year", "split.train_start", "split.validation_start",
    "split.test_start", "split.end",
    "model.families", "model.flavors", "model.lookbacks", "model.nbeats.*", "model.lstm.*", "model.tcn.*",
    "model.psf.*",
    "training.learning_rate", "training.batch_size", "training.max_epochs", "training.patience",
    "training.min_delta", "training.window_stride", "training.svr_epsilon", "training.svr_lambda",
    "training.svr_iterations", "training.svr_step",
    "monitor.baseline_mape", "monitor.rolling_window_days", "monitor.threshold_ratio", "monitor.persistence_days",
    "monitor.histogram_bins",
    "output.dir", "output.record_wall_time", "output.save_models",
    "rerun.train_years", "rerun.validation_year", "rerun.test_year", "rerun.train_start", "rerun.validation_start",
    "rerun.test_start", "rerun.end"};

std::string family_key(Family f) { return f == Family::LstmEd ? "lstm" : std::string(models::to_string(f)); }

}  // namespace

SplitDataset apply_split(const LoadSeries& series, const SplitChoice& split) {
  if (const auto* s = std::get_if<SplitSpec>(&split)) return split_by_years(series, *s);
  const auto& d = std::get<DateSplit>(split);
  return split_by_dates(series, d.train_start, d.validation_start, d.test_start, d.end);
}

void ExperimentSpec::validate() const {
  if (!data.csv && !data.synthetic) throw std::invalid_argument("experiment: no data path or synthetic spec");
  if (families.empty() || flavors.empty()) throw std::invalid_argument("experiment: grid is empty");
  const bool neural = std::any_of(families.begin(), families.end(), [](Family f) { return f != Family::Psf; });
  if (neural && lookbacks.empty()) throw std::invalid_argument("experiment: grid is empty (no lookbacks)");
  for (int f : flavors)
    if (f != 0 && f != 1) throw std::invalid_argument("experiment: flavors must be 0 or 1");
  for (auto l : lookbacks)
    if (l == 0) throw std::invalid_argument("experiment: lookback must be positive");
  if (jobs == 0) throw std::invalid_argument("experiment: jobs must be at least 1");
  monitor.validate();
}

ExperimentSpec experiment_from_config(const Config& cfg) {
  cfg.require_known(kKnownKeys);
  ExperimentSpec spec;

  if (auto p = cfg.get("data.path")) spec.data.csv = *p;
  if (auto p = cfg.get("data.holidays")) spec.data.holidays = *p;
  if (auto g = get_size(cfg, "data.max_gap_steps")) spec.data.max_gap_steps = *g;
  const bool synthetic = cfg.get_bool("data.synthetic").value_or(!spec.data.csv);
  if (synthetic) {
    if (spec.data.csv) throw std::invalid_argument("config: data.path and data.synthetic are exclusive");
    spec.data.synthetic = synthetic_from_config(cfg);
  }

  auto split = parse_split(cfg, "split.");
  if (!split) throw std::invalid_argument("config: missing [split] section");
  spec.split = *split;
  spec.rerun_split = parse_split(cfg, "rerun.");

  if (cfg.contains("model.families")) {
    spec.families.clear();
    for (const auto& f : cfg.get_list("model.families")) spec.families.push_back(models::parse_family(f));
  }
  if (cfg.contains("model.flavors")) {
    spec.flavors.clear();
    for (const auto& f : cfg.get_list("model.flavors"))
      spec.flavors.push_back(static_cast<int>(to_size("model.flavors", f)));
  }
  if (cfg.contains("model.lookbacks")) {
    spec.lookbacks.clear();
    for (const auto& l : cfg.get_list("model.lookbacks")) spec.lookbacks.push_back(to_size("model.lookbacks", l));
  }
  for (const auto& [key, value] : cfg.entries())
    if (key.starts_with("model.") && key.find('.', 6) != std::string::npos) spec.arch_overrides[key.substr(6)] = value;

  spec.training.learning_rate = cfg.get_double("training.learning_rate");
  spec.training.batch_size = get_size(cfg, "training.batch_size");
  spec.training.max_epochs = get_size(cfg, "training.max_epochs");
  spec.training.patience = get_size(cfg, "training.patience");
  spec.training.min_delta = cfg.get_double("training.min_delta");
  spec.training.window_stride = get_size(cfg, "training.window_stride");
  if (auto v = cfg.get_double("training.svr_epsilon")) spec.svr.epsilon = *v;
  if (auto v = cfg.get_double("training.svr_lambda")) spec.svr.lambda = *v;
  if (auto v = get_size(cfg, "training.svr_iterations")) spec.svr.iterations = *v;
  if (auto v = cfg.get_double("training.svr_step")) spec.svr.step = *v;

  if (auto v = cfg.get_double("monitor.baseline_mape")) spec.monitor.baseline_mape = *v;
  if (auto v = get_size(cfg, "monitor.rolling_window_days")) spec.monitor.rolling_window_days = *v;
  if (auto v = cfg.get_double("monitor.threshold_ratio")) spec.monitor.threshold_ratio = *v;
  if (auto v = get_size(cfg, "monitor.persistence_days")) spec.monitor.persistence_days = *v;
  if (auto v = get_size(cfg, "monitor.histogram_bins")) spec.histogram_bins = *v;

  if (auto v = cfg.get("output.dir")) spec.out_dir = *v;
  if (auto v = cfg.get_bool("output.record_wall_time")) spec.record_wall_time = *v;
  if (auto v = cfg.get_bool("output.save_models")) spec.save_models = *v;
  if (auto v = get_size(cfg, "seed")) spec.seed = *v;
  if (auto v = get_size(cfg, "jobs")) spec.jobs = *v;

  // Overrides are checked eagerly so typos fail before any training.
  for (Family f : spec.families) {
    auto fs = models::flavor_spec(f, 0, spec.lookbacks.empty() ? 384 : spec.lookbacks.front());
    for (const auto& [key, value] : spec.arch_overrides)
      if (key.starts_with(family_key(f) + ".")) apply_override(fs.arch, key, value);
  }
  return spec;
}

std::vector<GridCell> enumerate_grid(const ExperimentSpec& spec) {
  std::vector<GridCell> cells;
  for (Family f : {Family::Psf, Family::NBeats, Family::LstmEd, Family::Tcn}) {
    if (std::find(spec.families.begin(), spec.families.end(), f) == spec.families.end()) continue;
    for (int flavor : spec.flavors) {
      if (f == Family::Psf) {
        cells.push_back({cells.size(), f, flavor, 0});
        continue;
      }
      for (auto l : spec.lookbacks) cells.push_back({cells.size(), f, flavor, l});
    }
  }
  return cells;
}

void apply_override(models::ArchConfig& arch, const std::string& key, const std::string& value) {
  const auto dot = key.find('.');
  const std::string fam = key.substr(0, dot), name = dot == std::string::npos ? "" : key.substr(dot + 1);
  auto unknown = [&] { throw std::invalid_argument("config: unknown model override 'model." + key + "'"); };
  if (auto* c = std::get_if<models::NBeatsConfig>(&arch)) {
    if (fam != "nbeats") return;
    if (name == "stacks") c->stacks = to_size(key, value);
    else if (name == "blocks_per_stack") c->blocks_per_stack = to_size(key, value);
    else if (name == "layers_per_block") c->layers_per_block = to_size(key, value);
    else if (name == "layer_width") c->layer_width = to_size(key, value);
    else if (name == "expansion_coefficient_dim") c->expansion_coefficient_dim = to_size(key, value);
    else unknown();
  } else if (auto* c = std::get_if<models::LstmEdConfig>(&arch)) {
    if (fam != "lstm") return;
    if (name == "recurrent_layers") c->recurrent_layers = to_size(key, value);
    else if (name == "hidden_dim") c->hidden_dim = to_size(key, value);
    else if (name == "dropout") c->dropout = to_double(key, value);
    else if (name == "learning_rate") c->learning_rate = to_double(key, value);
    else unknown();
  } else if (auto* c = std::get_if<models::TcnConfig>(&arch)) {
    if (fam != "tcn") return;
    if (name == "kernel_size") c->kernel_size = to_size(key, value);
    else if (name == "num_filters") c->num_filters = to_size(key, value);
    else if (name == "dilation_base") c->dilation_base = to_size(key, value);
    else if (name == "num_layers") c->num_layers = to_size(key, value);
    else unknown();
  } else if (auto* c = std::get_if<psf::PsfConfig>(&arch)) {
    if (fam != "psf") return;
    if (name == "windows") {
      c->windows.clear();
      Config tmp;
      tmp.set("w", value);
      for (const auto& w : tmp.get_list("w")) c->windows.push_back(to_size(key, w));
    } else if (name == "k_min") c->k_min = to_size(key, value);
    else if (name == "k_max") c->k_max = to_size(key, value);
    else if (name == "restarts") c->restarts = to_size(key, value);
    else unknown();
  }
}

models::ForecasterSpec cell_spec(const ExperimentSpec& spec, const GridCell& cell) {
  auto fs = models::flavor_spec(cell.family, cell.flavor, cell.family == Family::Psf ? 384 : cell.lookback);
  const std::string prefix = family_key(cell.family) + ".";
  for (const auto& [key, value] : spec.arch_overrides)
    if (key.starts_with(prefix)) apply_override(fs.arch, key, value);
  return fs;
}

models::FitOptions cell_fit_options(const ExperimentSpec& spec, const models::ForecasterSpec& fspec) {
  models::FitOptions o;
  o.train = models::default_train_config(fspec);
  const auto& t = spec.training;
  if (t.learning_rate) o.train.learning_rate = *t.learning_rate;
  if (t.batch_size) o.train.batch_size = *t.batch_size;
  if (t.max_epochs) o.train.max_epochs = *t.max_epochs;
  if (t.patience) o.train.patience = *t.patience;
  if (t.min_delta) o.train.min_delta = *t.min_delta;
  if (t.window_stride) o.window_stride = *t.window_stride;
  o.svr = spec.svr;
  return o;
}

std::uint64_t cell_seed(std::uint64_t seed, std::size_t model_id) {
  // splitmix64 finalizer over (seed, id)
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (model_id + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

LoadSeries load_series(const DataSource& data, std::uint64_t seed) {
  if (data.csv) return wrangle(ingest_csv(*data.csv), WrangleOptions{data.max_gap_steps});
  if (data.synthetic) return generate_synthetic(*data.synthetic, seed);
  throw std::invalid_argument("experiment: no data source");
}

std::set<Date> load_holidays(const DataSource& data) {
  return data.holidays ? read_holidays(*data.holidays) : std::set<Date>{};
}

json failure_row(const GridCell& cell, const std::string& what) {
  return json{{"model_id", cell.model_id},
              {"family", std::string(models::to_string(cell.family))},
              {"flavor", cell.flavor},
              {"lookback", cell.lookback},
              {"overall_mape", nullptr},
              {"seasonal", {{"winter", nullptr}, {"spring", nullptr}, {"summer", nullptr}, {"autumn", nullptr}}},
              {"epochs", nullptr},
              {"train_wall_seconds", nullptr},
              {"excluded_points", nullptr},
              {"error", what}};
}

CellResult run_cell(const ExperimentSpec& spec, const GridCell& cell, const LoadSeries& series,
                    const SplitChoice& split, const std::set<Date>& holidays, const std::string& split_name) {
  CellResult result{cell, {}, std::nullopt};
  try {
    const auto data = apply_split(series, split);
    const auto fspec = cell_spec(spec, cell);
    auto opts = cell_fit_options(spec, fspec);
    const auto seed = cell_seed(spec.seed, cell.model_id);
    opts.train.seed = seed;
    auto model = models::Forecaster::build(fspec, seed);
    const auto stats = model.fit(data, holidays, opts);
    auto report = backtest::backtest_day_ahead(model, join(data.train, data.validation), data.test, holidays);
    report.model_id = cell.model_id;
    report.family = std::string(models::to_string(cell.family));
    report.flavor = cell.flavor;
    report.lookback = cell.lookback;
    report.training = stats;
    result.row = backtest::report_json(report, spec.record_wall_time);
    const std::string stem = (split_name == "primary" ? "model_" : split_name + "_model_") + std::to_string(cell.model_id);
    if (spec.save_models) {
      std::filesystem::create_directories(spec.out_dir / "models");
      model.save(spec.out_dir / "models" / (stem + ".json"));
    }
    std::filesystem::create_directories(spec.out_dir / "reports");
    std::ofstream(spec.out_dir / "reports" / (stem + ".json"), std::ios::binary)
        << backtest::report_detail_json(report, spec.record_wall_time).dump() << '\n';
    result.report = std::move(report);
  } catch (const std::exception& e) {
    result.row = failure_row(cell, e.what());
  }
  result.row["split"] = split_name;
  return result;
}

namespace {

std::vector<CellResult> run_cells(const ExperimentSpec& spec, const std::vector<GridCell>& cells,
                                  const LoadSeries& series, const SplitChoice& split, const std::set<Date>& holidays,
                                  const std::string& split_name) {
  std::vector<std::optional<CellResult>> slots(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++)
      slots[i] = run_cell(spec, cells[i], series, split, holidays, split_name);
  };
  const std::size_t n = std::min(spec.jobs, cells.size());
  if (n <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
  }
  std::vector<CellResult> out;
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

}  // namespace

std::vector<json> run_experiment_grid(const ExperimentSpec& spec) {
  spec.validate();
  std::filesystem::create_directories(spec.out_dir);
  const auto registry = spec.out_dir / "registry.jsonl";
  std::ofstream(registry, std::ios::binary | std::ios::trunc);

  const auto series = load_series(spec.data, spec.seed);
  const auto holidays = load_holidays(spec.data);
  const auto cells = enumerate_grid(spec);

  std::vector<json> rows;
  const auto primary = run_cells(spec, cells, series, spec.split, holidays, "primary");
  for (const auto& r : primary) {
    backtest::append_registry(registry, r.row);
    rows.push_back(r.row);
  }

  if (spec.rerun_split) {
    std::vector<GridCell> best;
    for (Family f : {Family::NBeats, Family::LstmEd, Family::Tcn}) {
      const CellResult* pick = nullptr;
      for (const auto& r : primary)
        if (r.cell.family == f && r.report && (!pick || r.report->overall_mape < pick->report->overall_mape))
          pick = &r;
      if (pick) best.push_back(pick->cell);
    }
    for (const auto& r : run_cells(spec, best, series, *spec.rerun_split, holidays, "rerun")) {
      backtest::append_registry(registry, r.row);
      rows.push_back(r.row);
    }
  }
  return rows;
}

}  // namespace gridcast::experiment
