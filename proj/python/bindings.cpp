#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "gridcast/backtest.hpp"
#include "gridcast/cli.hpp"
#include "gridcast/config.hpp"
#include "gridcast/covariates.hpp"
#include "gridcast/drift.hpp"
#include "gridcast/experiment.hpp"
#include "gridcast/forecaster.hpp"
#include "gridcast/networks.hpp"
#include "gridcast/series.hpp"

namespace py = pybind11;
using namespace gridcast;

namespace {

Timestamp to_timestamp(const std::string& text) {
  if (auto ts = parse_timestamp(text)) return *ts;
  if (auto d = parse_date(text)) return start_of(*d);
  throw py::value_error("not a timestamp or date: " + text);
}

Date to_date(const std::string& text) {
  if (auto d = parse_date(text)) return *d;
  throw py::value_error("not a date: " + text);
}

std::set<Date> to_dates(const std::vector<std::string>& texts) {
  std::set<Date> out;
  for (const auto& t : texts) out.insert(to_date(t));
  return out;
}

py::array_t<double> to_array(const std::vector<double>& v) {
  py::array_t<double> a(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), a.mutable_data());
  return a;
}

std::vector<double> from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  return {a.data(), a.data() + a.size()};
}

py::object json_to_py(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

LoadSeries synthetic(const std::string& start, const std::string& end, std::uint64_t seed, double base_mw,
                     double noise_sigma, const std::vector<std::tuple<std::string, std::string, double>>& shifts) {
  SyntheticSpec spec;
  spec.start = to_date(start);
  spec.end = to_date(end);
  spec.base_mw = base_mw;
  spec.noise_sigma = noise_sigma;
  for (const auto& [first, last, factor] : shifts) spec.shifts.push_back({to_date(first), to_date(last), factor});
  return generate_synthetic(spec, seed);
}

models::Forecaster build_forecaster(const std::string& family, int flavor, std::size_t lookback, std::uint64_t seed,
                                    const std::map<std::string, std::string>& overrides) {
  auto spec = models::flavor_spec(models::parse_family(family), flavor, lookback);
  for (const auto& [k, v] : overrides) experiment::apply_override(spec.arch, k, v);
  return models::Forecaster::build(spec, seed);
}

nlohmann::json fit_forecaster(models::Forecaster& model, const LoadSeries& train, const LoadSeries& validation,
                              const std::vector<std::string>& holidays, std::optional<std::size_t> max_epochs,
                              std::optional<std::size_t> batch_size, std::optional<std::size_t> patience,
                              std::optional<double> learning_rate, std::uint64_t seed) {
  models::FitOptions opts;
  opts.train = models::default_train_config(model.spec());
  if (max_epochs) opts.train.max_epochs = *max_epochs;
  if (batch_size) opts.train.batch_size = *batch_size;
  if (patience) opts.train.patience = *patience;
  if (learning_rate) opts.train.learning_rate = *learning_rate;
  opts.train.seed = seed;
  SplitDataset data{train, validation, LoadSeries{}};
  const auto h = to_dates(holidays);
  ad::TrainingStats stats;
  {
    py::gil_scoped_release release;
    stats = model.fit(data, h, opts);
  }
  return {{"epochs", stats.epochs_run}, {"best_epoch", stats.best_epoch}, {"wall_seconds", stats.wall_seconds}};
}

py::array_t<double> forecast_next_day(const models::Forecaster& model, const LoadSeries& history,
                                      const std::vector<std::string>& holidays) {
  const auto cov = build_matrix(history.start(), history.size() + kStepsPerDay, to_dates(holidays));
  return to_array(model.forecast_day(history.values(), cov));
}

std::tuple<int, std::string, std::string> run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  int code = 0;
  {
    py::gil_scoped_release release;
    code = cli::command_dispatch(args, out, err);
  }
  return {code, out.str(), err.str()};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Day-ahead load forecasting core";

  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);

  py::class_<LoadSeries>(m, "LoadSeries")
      .def(py::init([](const std::string& start, const py::array_t<double, py::array::c_style | py::array::forcecast>& v) {
             return LoadSeries(to_timestamp(start), from_array(v));
           }),
           py::arg("start"), py::arg("values"))
      .def_property_readonly("start", [](const LoadSeries& s) { return format_timestamp(s.start()); })
      .def_property_readonly("end", [](const LoadSeries& s) { return format_timestamp(s.end()); })
      .def_property_readonly("values", [](const LoadSeries& s) { return to_array(s.values()); })
      .def("__len__", &LoadSeries::size)
      .def("slice", [](const LoadSeries& s, const std::string& from, const std::string& to) {
        return s.slice(to_timestamp(from), to_timestamp(to));
      })
      .def("day_aligned", &LoadSeries::day_aligned)
      .def("__repr__", [](const LoadSeries& s) {
        return "LoadSeries(" + format_timestamp(s.start()) + " .. " + format_timestamp(s.end()) + ", " +
               std::to_string(s.size()) + " steps)";
      });

  m.def("read_csv", [](const std::string& path, std::size_t max_gap_steps) {
    return wrangle(ingest_csv(path), WrangleOptions{max_gap_steps});
  }, py::arg("path"), py::arg("max_gap_steps") = 96, "Ingests and cleans a timestamp,load_mw CSV.");
  m.def("parse_csv", [](const std::string& text, std::size_t max_gap_steps) {
    return wrangle(parse_csv(text), WrangleOptions{max_gap_steps});
  }, py::arg("text"), py::arg("max_gap_steps") = 96);
  m.def("write_csv", [](const std::string& path, const LoadSeries& s) { write_csv(path, s); });
  m.def("synthetic", &synthetic, py::arg("start"), py::arg("end"), py::arg("seed") = 0, py::arg("base_mw") = 5000.0,
        py::arg("noise_sigma") = 0.02, py::arg("shifts") = std::vector<std::tuple<std::string, std::string, double>>{},
        "Harmonic synthetic load; shifts are (first, last, factor) with inclusive dates.");
  m.def("split_by_dates", [](const LoadSeries& s, const std::string& a, const std::string& b, const std::string& c,
                             const std::string& d) {
    auto split = split_by_dates(s, to_date(a), to_date(b), to_date(c), to_date(d));
    return std::make_tuple(split.train, split.validation, split.test);
  });

  m.def("covariates", [](const LoadSeries& s, const std::vector<std::string>& holidays) {
    const auto cov = build_matrix(s, to_dates(holidays));
    py::array_t<double> a({static_cast<py::ssize_t>(cov.rows()), static_cast<py::ssize_t>(CovariateMatrix::kWidth)});
    std::copy(cov.data().begin(), cov.data().end(), a.mutable_data());
    return a;
  }, py::arg("series"), py::arg("holidays") = std::vector<std::string>{});

  m.def("mape", [](const py::array_t<double, py::array::c_style | py::array::forcecast>& actual,
                   const py::array_t<double, py::array::c_style | py::array::forcecast>& forecast) {
    return backtest::mape(from_array(actual), from_array(forecast)).percent;
  });
  m.def("tcn_num_layers", &models::tcn_num_layers, py::arg("lookback"), py::arg("dilation_base"), py::arg("kernel_size"));
  m.def("tcn_receptive_field", &models::tcn_receptive_field, py::arg("layers"), py::arg("kernel_size"),
        py::arg("dilation_base"));

  py::class_<models::Forecaster>(m, "Forecaster")
      .def_static("build", &build_forecaster, py::arg("family"), py::arg("flavor") = 0, py::arg("lookback") = 384,
                  py::arg("seed") = 0, py::arg("overrides") = std::map<std::string, std::string>{})
      .def_static("load", [](const std::string& path) { return models::Forecaster::load(path); })
      .def_property_readonly("family", [](const models::Forecaster& f) { return std::string(models::to_string(f.family())); })
      .def_property_readonly("min_history", &models::Forecaster::min_history)
      .def("fit", [](models::Forecaster& f, const LoadSeries& train, const LoadSeries& validation,
                     const std::vector<std::string>& holidays, std::optional<std::size_t> max_epochs,
                     std::optional<std::size_t> batch_size, std::optional<std::size_t> patience,
                     std::optional<double> learning_rate, std::uint64_t seed) {
             return json_to_py(fit_forecaster(f, train, validation, holidays, max_epochs, batch_size, patience,
                                              learning_rate, seed));
           },
           py::arg("train"), py::arg("validation"), py::arg("holidays") = std::vector<std::string>{},
           py::arg("max_epochs") = py::none(), py::arg("batch_size") = py::none(), py::arg("patience") = py::none(),
           py::arg("learning_rate") = py::none(), py::arg("seed") = 0)
      .def("forecast_day", &forecast_next_day, py::arg("history"), py::arg("holidays") = std::vector<std::string>{},
           "96 values for the day after `history`, which must end at midnight.")
      .def("save", [](const models::Forecaster& f, const std::string& path) { f.save(path); })
      .def("to_json", [](const models::Forecaster& f) { return json_to_py(f.to_json()); });

  m.def("backtest", [](const models::Forecaster& model, const LoadSeries& history, const LoadSeries& test,
                       const std::vector<std::string>& holidays) {
    backtest::BacktestReport report;
    const auto h = to_dates(holidays);
    {
      py::gil_scoped_release release;
      report = backtest::backtest_day_ahead(model, history, test, h);
    }
    return json_to_py(backtest::report_detail_json(report));
  }, py::arg("model"), py::arg("history"), py::arg("test"), py::arg("holidays") = std::vector<std::string>{});

  m.def("monitor", [](const py::object& report, double baseline_mape, std::size_t window_days, double ratio,
                      std::size_t persistence_days) {
    const auto text = py::module_::import("json").attr("dumps")(report).cast<std::string>();
    const auto parsed = backtest::report_from_detail_json(nlohmann::json::parse(text));
    drift::DriftState state;
    state.baseline_mape = baseline_mape;
    state.rolling_window_days = window_days;
    state.threshold_ratio = ratio;
    state.persistence_days = persistence_days;
    state.validate();
    const auto result = drift::evaluate_drift(state, drift::rolling_mape(parsed, window_days));
    nlohmann::json events = nlohmann::json::array();
    for (const auto& e : result.events) events.push_back(drift::event_json(e));
    return json_to_py({{"decision", drift::to_string(result.decision())},
                       {"triggered_on", result.triggered_on ? nlohmann::json(format_date(*result.triggered_on))
                                                            : nlohmann::json(nullptr)},
                       {"events", events}});
  }, py::arg("report"), py::arg("baseline_mape"), py::arg("window_days") = 30, py::arg("ratio") = 1.5,
     py::arg("persistence_days") = 7);

  m.def("run_grid", [](const std::string& config_text, std::optional<std::string> out_dir,
                       std::optional<std::size_t> jobs) {
    auto spec = experiment::experiment_from_config(Config::parse(config_text));
    if (out_dir) spec.out_dir = *out_dir;
    if (jobs) spec.jobs = *jobs;
    std::vector<nlohmann::json> rows;
    {
      py::gil_scoped_release release;
      rows = experiment::run_experiment_grid(spec);
    }
    return json_to_py(nlohmann::json(rows));
  }, py::arg("config_text"), py::arg("out_dir") = py::none(), py::arg("jobs") = py::none(),
     "Runs the experiment grid described by an INI config; returns the registry rows.");

  m.def("cli", &run_cli, py::arg("args"), "Runs one command-line invocation; returns (exit_code, stdout, stderr).");
}
