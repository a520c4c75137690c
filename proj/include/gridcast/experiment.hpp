#pragma once

// Experiment grid: build, fit, backtest and register every
// (family, flavor, lookback) cell of a configuration.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "gridcast/backtest.hpp"
#include "gridcast/config.hpp"
#include "gridcast/drift.hpp"
#include "gridcast/forecaster.hpp"

#include "json.hpp"

namespace gridcast::experiment {

struct DataSource {
  std::optional<std::filesystem::path> csv;
  std::optional<SyntheticSpec> synthetic;
  std::optional<std::filesystem::path> holidays;
  std::size_t max_gap_steps = 96;
};

struct DateSplit {
  Date train_start;
  Date validation_start;
  Date test_start;
  Date end;
};

using SplitChoice = std::variant<SplitSpec, DateSplit>;

SplitDataset apply_split(const LoadSeries& series, const SplitChoice& split);

struct TrainOverrides {
  std::optional<double> learning_rate;
  std::optional<std::size_t> batch_size;
  std::optional<std::size_t> max_epochs;
  std::optional<std::size_t> patience;
  std::optional<double> min_delta;
  std::optional<std::size_t> window_stride;
};

struct GridCell {
  std::size_t model_id = 0;
  models::Family family = models::Family::Psf;
  int flavor = 0;
  std::size_t lookback = 0;  ///< 0 for PSF
};

struct ExperimentSpec {
  DataSource data;
  SplitChoice split;
  std::vector<models::Family> families{models::Family::Psf, models::Family::NBeats, models::Family::LstmEd,
                                       models::Family::Tcn};
  std::vector<int> flavors{0, 1};
  std::vector<std::size_t> lookbacks{384, 672, 960};
  /// "nbeats.layer_width" -> "32"; applied to every cell of that family.
  std::map<std::string, std::string> arch_overrides;
  TrainOverrides training;
  psf::SvrOptions svr;
  drift::DriftState monitor;
  std::size_t histogram_bins = 50;
  std::filesystem::path out_dir = "gridcast-out";
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  bool record_wall_time = true;
  bool save_models = true;
  /// Re-run the best model of each neural family on a shifted split.
  std::optional<SplitChoice> rerun_split;

  void validate() const;
};

/// "FIRST:LAST:FACTOR", dates inclusive.
ShiftEvent parse_shift(const std::string& text);
/// The synthetic-series keys of the [data] section.
SyntheticSpec synthetic_from_config(const Config& cfg);

/// Reads an ExperimentSpec from the sections data, split, model, training,
/// monitor, output and rerun. Unknown keys are rejected.
ExperimentSpec experiment_from_config(const Config& cfg);

/// PSF cells first (one per flavor), then each neural family flavor-major
/// over the lookbacks. model_id is the position in this order.
std::vector<GridCell> enumerate_grid(const ExperimentSpec& spec);

models::ForecasterSpec cell_spec(const ExperimentSpec& spec, const GridCell& cell);
models::FitOptions cell_fit_options(const ExperimentSpec& spec, const models::ForecasterSpec& fspec);
/// Per-cell seed derived from the experiment seed.
std::uint64_t cell_seed(std::uint64_t seed, std::size_t model_id);

/// Applies one "family.key" override to an architecture config.
void apply_override(models::ArchConfig& arch, const std::string& key, const std::string& value);

LoadSeries load_series(const DataSource& data, std::uint64_t seed);
std::set<Date> load_holidays(const DataSource& data);

/// Registry row with every schema field; null metrics and an "error" field.
nlohmann::json failure_row(const GridCell& cell, const std::string& what);

struct CellResult {
  GridCell cell;
  nlohmann::json row;
  std::optional<backtest::BacktestReport> report;
};

/// Fits and backtests one cell. Never throws for model failures; they are
/// reported in the row.
CellResult run_cell(const ExperimentSpec& spec, const GridCell& cell, const LoadSeries& series,
                    const SplitChoice& split, const std::set<Date>& holidays, const std::string& split_name);

/// Runs the grid (and the re-run, if configured), writing registry.jsonl
/// into spec.out_dir. Returns the rows in registry order.
std::vector<nlohmann::json> run_experiment_grid(const ExperimentSpec& spec);

}  // namespace gridcast::experiment
