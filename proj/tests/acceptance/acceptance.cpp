// One line per acceptance criterion; nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "gridcast/backtest.hpp"
#include "gridcast/config.hpp"
#include "gridcast/drift.hpp"
#include "gridcast/experiment.hpp"
#include "gridcast/forecaster.hpp"
#include "gridcast/networks.hpp"
#include "gridcast/psf.hpp"
#include "oracles.hpp"

using namespace gridcast;
namespace fs = std::filesystem;
using ad::Graph;
using ad::ParameterSet;
using ad::Tensor;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

Tensor random_tensor(ad::Shape shape, std::mt19937_64& rng, double sd = 1.0) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> n(0.0, sd);
  for (auto& v : t.data()) v = n(rng);
  return t;
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

double rel(double a, double b) { return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), 1e-300}); }

fs::path work_dir() {
  const fs::path dir = fs::current_path() / "acceptance-work";
  fs::create_directories(dir);
  return dir;
}

// ---------------------------------------------------------------------------

Outcome tcn_depth() {
  using models::tcn_num_layers;
  using models::tcn_receptive_field;
  const std::size_t a = tcn_num_layers(672, 2, 3), b = tcn_num_layers(15, 2, 3), c = tcn_num_layers(960, 3, 5);
  bool ok = a == 9 && b == 3 && c == 6;
  // Kernel and dilation base each take both flavor values, at every lookback.
  std::size_t covered = 0;
  for (std::size_t l : {384, 672, 960})
    for (std::size_t k : {3, 5})
      for (std::size_t base : {2, 3}) {
        const std::size_t n = tcn_num_layers(l, base, k);
        const std::size_t rf = tcn_receptive_field(n, k, base);
        if (rf >= l && rf == oracle::receptive_field(n, k, base) && n == oracle::min_covering_layers(l, k, base))
          ++covered;
      }
  for (int flavor : {0, 1})
    for (std::size_t l : {384, 672, 960}) {
      const auto spec = models::flavor_spec(models::Family::Tcn, flavor, l);
      const auto& cfg = std::get<models::TcnConfig>(spec.arch);
      ok = ok && tcn_receptive_field(cfg.resolved_layers(), cfg.kernel_size, cfg.dilation_base) >= l;
    }
  ok = ok && covered == 12;
  return {ok, "depths " + std::to_string(a) + "/" + std::to_string(b) + "/" + std::to_string(c) + ", coverage " +
                  std::to_string(covered) + "/12"};
}

Outcome gradient_fidelity() {
  double worst_dense = 0, worst_lstm = 0, worst_conv = 0;
  const std::size_t seeds = 20;
  for (std::uint64_t seed = 0; seed < seeds; ++seed) {
    std::mt19937_64 rng(seed);
    {
      ParameterSet p;
      p.add("w0", random_tensor({6, 8}, rng, 0.5));
      p.add("b0", random_tensor({8}, rng, 0.1));
      p.add("w1", random_tensor({8, 8}, rng, 0.5));
      p.add("b1", random_tensor({8}, rng, 0.1));
      p.add("w2", random_tensor({8, 3}, rng, 0.5));
      p.add("b2", random_tensor({3}, rng, 0.1));
      const Tensor x = random_tensor({4, 6}, rng), y = random_tensor({4, 3}, rng);
      worst_dense = std::max(worst_dense, oracle::max_gradient_error(p, [&](Graph& g) {
        auto h = g.relu(g.affine(g.input(x), g.param("w0"), g.param("b0")));
        h = g.relu(g.affine(h, g.param("w1"), g.param("b1")));
        return g.mse(g.affine(h, g.param("w2"), g.param("b2")), g.input(y));
      }));
    }
    {
      const std::size_t B = 2, I = 3, H = 4, T = 5;
      ParameterSet p;
      p.add("w", random_tensor({I + H, 4 * H}, rng, 0.5));
      p.add("b", random_tensor({4 * H}, rng, 0.1));
      std::vector<Tensor> xs;
      for (std::size_t t = 0; t < T; ++t) xs.push_back(random_tensor({B, I}, rng));
      const Tensor y = random_tensor({B, H}, rng);
      worst_lstm = std::max(worst_lstm, oracle::max_gradient_error(p, [&](Graph& g) {
        auto state = g.input(Tensor({B, 2 * H}, 0.0));
        for (std::size_t t = 0; t < T; ++t) state = g.lstm_cell(g.input(xs[t]), state, g.param("w"), g.param("b"));
        return g.mse(g.slice(state, 1, 0, H), g.input(y));
      }));
    }
    {
      const std::size_t L = 16;
      ParameterSet p;
      p.add("x", random_tensor({2, 2, L}, rng));
      p.add("c0.w", random_tensor({3, 2, 3}, rng, 0.5));
      p.add("c0.b", random_tensor({3}, rng, 0.1));
      p.add("c1.w", random_tensor({3, 3, 3}, rng, 0.5));
      p.add("c1.b", random_tensor({3}, rng, 0.1));
      p.add("c2.w", random_tensor({2, 3, 3}, rng, 0.5));
      p.add("c2.b", random_tensor({2}, rng, 0.1));
      const Tensor y = random_tensor({2, 2, L}, rng);
      worst_conv = std::max(worst_conv, oracle::max_gradient_error(p, [&](Graph& g) {
        auto h = g.relu(g.causal_conv1d(g.param("x"), g.param("c0.w"), g.param("c0.b"), 1));
        h = g.relu(g.causal_conv1d(h, g.param("c1.w"), g.param("c1.b"), 2));
        h = g.causal_conv1d(h, g.param("c2.w"), g.param("c2.b"), 4);
        return g.mse(h, g.input(y));
      }));
    }
  }
  const bool ok = worst_dense < 1e-4 && worst_lstm < 1e-4 && worst_conv < 1e-4;
  return {ok, std::to_string(seeds) + " seeds, max rel err dense " + fmt(worst_dense, 3) + ", lstm " +
                  fmt(worst_lstm, 3) + ", conv " + fmt(worst_conv, 3)};
}

Outcome nbeats_identities() {
  double worst_sum = 0, worst_residual = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    models::NBeatsConfig cfg;
    cfg.stacks = 2 + seed % 4;
    cfg.blocks_per_stack = 1 + seed % 2;
    cfg.layers_per_block = 1 + seed % 4;
    cfg.layer_width = 16;
    cfg.lookback = 48;
    cfg.horizon = 12;
    models::NBeats net(cfg, seed);
    std::mt19937_64 rng(seed + 1000);
    const Tensor x = random_tensor({4, 48}, rng);
    Graph g(net.params());
    const auto tr = net.trace(g, g.input(x));
    const auto& out = g.value(tr.output);
    for (std::size_t i = 0; i < out.size(); ++i) {
      double sum = 0;
      for (auto f : tr.forecasts) sum += g.value(f)[i];
      worst_sum = std::max(worst_sum, rel(out[i], sum));
    }
    const auto& residual = g.value(tr.residual);
    for (std::size_t i = 0; i < x.size(); ++i) {
      double r = x[i];
      for (auto b : tr.backcasts) r -= g.value(b)[i];
      worst_residual = std::max(worst_residual, std::fabs(residual[i] - r) / std::max(1.0, std::fabs(r)));
    }
  }
  return {worst_sum <= 1e-9 && worst_residual <= 1e-9,
          "20 models, forecast sum " + fmt(worst_sum, 3) + ", residual " + fmt(worst_residual, 3)};
}

Outcome tcn_causality() {
  models::TcnConfig cfg;
  cfg.lookback = 32;
  cfg.horizon = 4;
  models::Tcn net(cfg, 17);
  auto& params = net.params();
  std::mt19937_64 rng(5);
  const std::size_t C = 1 + cfg.covariate_width, L = 32;
  const Tensor base = random_tensor({1, C, L}, rng);
  Graph g0(params);
  const auto ref = net.trace(g0, g0.input(base));
  std::size_t compared = 0, violations = 0;
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t t = 0; t < L; ++t) {
      Tensor x = base;
      x[c * L + t] += 1.0;
      Graph g(params);
      const auto tr = net.trace(g, g.input(x));
      for (std::size_t l = 0; l < tr.layers.size(); ++l) {
        const auto& a = g0.value(ref.layers[l]);
        const auto& b = g.value(tr.layers[l]);
        for (std::size_t f = 0; f < cfg.num_filters; ++f)
          for (std::size_t p = 0; p < t; ++p) {
            ++compared;
            if (a[f * L + p] != b[f * L + p]) ++violations;
          }
      }
    }
  return {violations == 0 && compared > 0,
          std::to_string(net.layers()) + " layers, " + std::to_string(compared) + " pre-t activations, " +
              std::to_string(violations) + " changed"};
}

Outcome backtest_oracle() {
  SyntheticSpec spec;
  spec.start = *parse_date("2020-01-01");
  spec.end = *parse_date("2020-04-01");
  const auto s = generate_synthetic(spec, 3);
  const Timestamp cut = start_of(*parse_date("2020-03-02"));
  const auto history = s.slice(s.start(), cut);
  const auto test = s.slice(cut, s.end());
  const auto cov = build_matrix(s, {});
  std::vector<double> full = s.values();
  const oracle::PerfectStub perfect(full);
  const oracle::PersistenceStub persistence;
  bool ok = true;
  std::size_t points = 0;
  double perfect_mape = -1;
  for (const DayAheadModel* m : {static_cast<const DayAheadModel*>(&perfect), static_cast<const DayAheadModel*>(&persistence)}) {
    const auto report = backtest::backtest_day_ahead(*m, history, test, cov);
    const auto loop = oracle::brute_force_backtest(*m, history.values(), test.values(), cov);
    ok = ok && report.forecasts == loop.forecasts && report.actuals == loop.actuals;
    ok = ok && rel(report.overall_mape, oracle::mape(loop.actuals, loop.forecasts)) <= 1e-12;
    points = report.forecasts.size();
    ok = ok && points == 2880;
    if (m == &perfect) perfect_mape = report.overall_mape;
  }
  ok = ok && perfect_mape == 0.0;
  return {ok, "bit-identical to brute force, " + std::to_string(points) + " points, perfect MAPE " + fmt(perfect_mape)};
}

Outcome mape_units() {
  const std::vector<double> y{100, 200}, f{110, 180};
  const double m = backtest::mape(y, f).percent;
  const double zero = backtest::mape(y, y).percent;
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(1.0, 1000.0), scale(1e-3, 1e3);
  double worst = 0;
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> a(64), p(64);
    for (std::size_t i = 0; i < a.size(); ++i) {
      a[i] = u(rng) * (i % 3 == 0 ? -1.0 : 1.0);
      p[i] = u(rng);
    }
    const double c = scale(rng);
    std::vector<double> ca(a), cp(p);
    for (auto& v : ca) v *= c;
    for (auto& v : cp) v *= c;
    worst = std::max(worst, rel(backtest::mape(ca, cp).percent, backtest::mape(a, p).percent));
  }
  const bool ok = std::fabs(m - 10.0) < 1e-12 && zero == 0.0 && worst < 1e-12;
  return {ok, "MAPE " + fmt(m, 12) + ", perfect " + fmt(zero) + ", scale invariance rel err " + fmt(worst, 3)};
}

// --- end to end --------------------------------------------------------------

constexpr const char* kBenchmarkConfig = R"(seed = 7
[data]
synthetic = true
start = 2016-07-01
end = 2020-07-01
noise_sigma = 0.02
[split]
train_start = 2016-07-01
validation_start = 2019-07-01
test_start = 2020-01-01
end = 2020-07-01
[model]
families = psf, nbeats, lstm, tcn
flavors = 0
lookbacks = 384
nbeats.stacks = 4
nbeats.layer_width = 32
[training]
batch_size = 32
max_epochs = 60
patience = 8
[output]
record_wall_time = false
)";

struct Benchmark {
  experiment::ExperimentSpec spec;
  std::vector<nlohmann::json> rows;
  double seconds = 0;
};

std::optional<Benchmark> g_benchmark;

Outcome synthetic_benchmark() {
  Benchmark bench;
  bench.spec = experiment::experiment_from_config(Config::parse(kBenchmarkConfig));
  bench.spec.out_dir = work_dir() / "benchmark";
  bench.spec.jobs = 1;
  const auto t0 = std::chrono::steady_clock::now();
  bench.rows = experiment::run_experiment_grid(bench.spec);
  bench.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const auto series = experiment::load_series(bench.spec.data, bench.spec.seed);
  const auto split = experiment::apply_split(series, bench.spec.split);
  const auto history = join(split.train, split.validation);

  oracle::PersistenceStub persistence;
  const auto pers = backtest::backtest_day_ahead(persistence, history, split.test, std::set<Date>{});
  oracle::MeanDayStub mean_day(history.size() / oracle::kDay);
  mean_day.fit(history.values());
  const auto mean = backtest::backtest_day_ahead(mean_day, history, split.test, std::set<Date>{});

  bool ok = bench.seconds < 30 * 60;
  std::ostringstream detail;
  detail << "persistence " << fmt(pers.overall_mape) << ", mean-day " << fmt(mean.overall_mape);
  std::map<std::string, bool> seen;
  for (const auto& row : bench.rows) {
    const std::string family = row.at("family");
    if (row.contains("error") || row.at("overall_mape").is_null()) {
      ok = false;
      detail << ", " << family << " failed";
      continue;
    }
    const double m = row.at("overall_mape");
    const int flavor = row.at("flavor");
    detail << ", " << family << flavor << " " << fmt(m);
    if (family == "psf") {
      if (flavor == 0) ok = ok && m <= mean.overall_mape;
      seen["psf"] = true;
    } else {
      ok = ok && m <= pers.overall_mape;
      seen[family] = true;
    }
  }
  ok = ok && seen.size() == 4;
  detail << "; " << fmt(bench.seconds, 3) << " s";
  g_benchmark = std::move(bench);
  return {ok, detail.str()};
}

Outcome shift_drill() {
  if (!g_benchmark) return {false, "benchmark models unavailable"};
  const auto& bench = g_benchmark->spec;
  const Date onset = *parse_date("2020-03-01");

  auto data = bench.data;
  data.synthetic->shifts.push_back(experiment::parse_shift("2020-03-01:2020-05-31:0.8"));
  const auto series = experiment::load_series(data, bench.seed);
  const auto split = experiment::apply_split(series, bench.split);
  const auto history = join(split.train, split.validation);

  // Neural model with the lowest unshifted test error.
  const nlohmann::json* best = nullptr;
  for (const auto& row : g_benchmark->rows)
    if (row.at("family") != "psf" && !row.contains("error") &&
        (!best || row.at("overall_mape").get<double>() < best->at("overall_mape").get<double>()))
      best = &row;
  if (!best) return {false, "no trained neural model"};
  const std::size_t id = best->at("model_id");
  const auto model = models::Forecaster::load(bench.out_dir / "models" / ("model_" + std::to_string(id) + ".json"));

  const auto validation = backtest::backtest_day_ahead(model, split.train, split.validation, std::set<Date>{});
  const auto shifted = backtest::backtest_day_ahead(model, history, split.test, std::set<Date>{});

  bool spring_max = shifted.seasonal[1].has_value();
  std::ostringstream detail;
  detail << best->at("family").get<std::string>() << " model " << id << ", seasons";
  for (auto s : backtest::kSeasons) {
    const auto& v = shifted.seasonal[static_cast<std::size_t>(s)];
    if (!v) continue;
    detail << " " << backtest::to_string(s) << " " << fmt(*v);
    if (s != backtest::Season::Spring && spring_max) spring_max = *shifted.seasonal[1] > *v;
  }

  drift::DriftState state;
  state.baseline_mape = validation.overall_mape;
  const auto rolling = drift::rolling_mape(shifted, state.rolling_window_days);
  const auto result = drift::evaluate_drift(state, rolling);
  bool in_time = false;
  if (result.triggered_on) {
    const auto lag = (std::chrono::sys_days{*result.triggered_on} - std::chrono::sys_days{onset}).count();
    in_time = lag >= 0 && lag <= 37;
    detail << "; baseline " << fmt(state.baseline_mape) << ", retrain on " << format_date(*result.triggered_on)
           << " (" << lag << " days after onset)";
  } else {
    detail << "; baseline " << fmt(state.baseline_mape) << ", never triggered";
  }
  return {spring_max && in_time, detail.str()};
}

// --- psf -----------------------------------------------------------------------

psf::DayMatrix make_days(const std::vector<std::vector<double>>& rows, ZScore scaler = {}) {
  std::vector<double> data;
  std::vector<Date> dates;
  const auto d0 = std::chrono::sys_days{std::chrono::year{2020} / 1 / 1};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    data.insert(data.end(), rows[i].begin(), rows[i].end());
    dates.emplace_back(d0 + std::chrono::days{static_cast<int>(i)});
  }
  return psf::DayMatrix(std::move(data), std::move(dates), scaler);
}

std::vector<double> pattern_row(int kind, std::mt19937_64& rng, double jitter) {
  std::normal_distribution<double> n(0.0, jitter);
  std::vector<double> r(oracle::kDay);
  for (std::size_t s = 0; s < r.size(); ++s) r[s] = std::sin(0.07 * static_cast<double>(s) * (kind + 1)) * 2.0 + kind + n(rng);
  return r;
}

Outcome psf_oracles() {
  const std::vector<double> c0(oracle::kDay, 0.0), c1(oracle::kDay, 1.0), c10(oracle::kDay, 10.0), c11(oracle::kDay, 11.0);
  psf::Labeling pairs;
  pairs.k = 2;
  pairs.labels = {0, 0, 1, 1};
  const double sil = psf::silhouette_score(make_days({c0, c1, c10, c11}), pairs);
  bool ok = std::fabs(sil - 0.8997) <= 1e-3;

  std::mt19937_64 rng(4);
  const std::vector<std::size_t> abc{0, 1, 2, 0, 1, 2, 0, 1};
  std::vector<std::vector<double>> rows;
  for (auto l : abc) rows.push_back(pattern_row(static_cast<int>(l), rng, 0.3));
  const auto days = make_days(rows, ZScore{5000.0, 250.0});
  psf::Labeling lab;
  lab.k = 3;
  lab.labels = abc;
  bool exact = true;
  for (std::size_t w = 1; w <= 7; ++w) exact = exact && psf::psf_predict_day(lab, days, w) == oracle::brute_force_psf(abc, days, w);
  ok = ok && exact;

  std::size_t periodic_ok = 0, periodic_total = 0;
  for (int period = 2; period <= 7; ++period) {
    std::vector<std::vector<double>> patterns, seq;
    for (int p = 0; p < period; ++p) patterns.push_back(pattern_row(p, rng, 0.0));
    std::vector<std::size_t> labels;
    const int n = period * 5 + 2;
    for (int d = 0; d < n; ++d) {
      seq.push_back(patterns[static_cast<std::size_t>(d % period)]);
      labels.push_back(static_cast<std::size_t>(d % period));
    }
    psf::Labeling pl;
    pl.k = static_cast<std::size_t>(period);
    pl.labels = labels;
    const auto pd = make_days(seq);
    for (std::size_t w : {1, 2, 3, 5, 7}) {
      ++periodic_total;
      const auto next = psf::psf_predict_day(pl, pd, w);
      const auto& truth = patterns[static_cast<std::size_t>(n % period)];
      bool same = true;
      for (std::size_t s = 0; s < oracle::kDay; ++s) same = same && std::fabs(next[s] - truth[s]) <= 1e-12;
      if (same) ++periodic_ok;
    }
  }
  ok = ok && periodic_ok == periodic_total;
  return {ok, "silhouette " + fmt(sil, 6) + ", ABCABCAB " + (exact ? "bit-exact" : "mismatch") + ", periodic " +
                  std::to_string(periodic_ok) + "/" + std::to_string(periodic_total)};
}

// --- determinism ---------------------------------------------------------------

constexpr const char* kDeterminismConfig = R"(seed = 11
[data]
synthetic = true
start = 2019-01-01
end = 2019-07-01
[split]
train_start = 2019-01-01
validation_start = 2019-05-01
test_start = 2019-06-01
end = 2019-07-01
[model]
nbeats.stacks = 2
nbeats.layer_width = 16
lstm.hidden_dim = 6
[training]
max_epochs = 2
[output]
record_wall_time = false
save_models = false
)";

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome determinism() {
  const fs::path dir = work_dir() / "determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const fs::path cfg = dir / "grid.ini";
  std::ofstream(cfg) << kDeterminismConfig;
  std::vector<std::string> registries;
  for (int run = 0; run < 2; ++run) {
    const fs::path out = dir / ("run" + std::to_string(run));
    const std::string cmd = std::string("\"") + GRIDCAST_CLI_PATH + "\" grid --config \"" + cfg.string() + "\" --out \"" +
                            out.string() + "\" --jobs " + std::to_string(run + 1) + " > \"" + (dir / "log.txt").string() +
                            "\" 2>&1";
    if (std::system(cmd.c_str()) != 0) return {false, "grid run " + std::to_string(run) + " failed"};
    registries.push_back(slurp(out / "registry.jsonl"));
  }
  std::size_t rows = 0, failed = 0;
  std::istringstream lines(registries[0]);
  for (std::string line; std::getline(lines, line);) {
    ++rows;
    if (nlohmann::json::parse(line).contains("error")) ++failed;
  }
  const bool same = !registries[0].empty() && registries[0] == registries[1];
  return {same && rows == 20 && failed == 0, std::to_string(rows) + " rows, " + std::to_string(registries[0].size()) +
                                                 " bytes, " + (same ? "byte-identical" : "different")};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"tcn auto-depth and receptive-field coverage", tcn_depth},
      {"gradient fidelity", gradient_fidelity},
      {"n-beats doubly residual identities", nbeats_identities},
      {"tcn causality", tcn_causality},
      {"backtest oracle equivalence", backtest_oracle},
      {"mape", mape_units},
      {"synthetic end-to-end benchmark", synthetic_benchmark},
      {"distribution-shift drill", shift_drill},
      {"psf oracles", psf_oracles},
      {"grid determinism", determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "[PASS]" : "[FAIL]") << " criterion " << i + 1 << ": " << criteria[i].first << " ("
              << o.detail << ") [" << fmt(secs, 3) << " s]" << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
