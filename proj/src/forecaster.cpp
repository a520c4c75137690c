#include "gridcast/forecaster.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <fstream>
#include <stdexcept>

namespace gridcast::models {

using nlohmann::json;

std::string_view to_string(Family f) {
  switch (f) {
    case Family::Psf: return "psf";
    case Family::NBeats: return "nbeats";
    case Family::LstmEd: return "lstm";
    case Family::Tcn: return "tcn";
  }
  return "?";
}

Family parse_family(std::string_view name) {
  std::string s(name);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (s == "psf") return Family::Psf;
  if (s == "nbeats" || s == "n-beats") return Family::NBeats;
  if (s == "lstm" || s == "lstm-ed" || s == "lstm_ed") return Family::LstmEd;
  if (s == "tcn") return Family::Tcn;
  throw std::invalid_argument("unknown model family '" + std::string(name) + "'");
}

ForecasterSpec flavor_spec(Family family, int flavor, std::size_t lookback) {
  if (flavor != 0 && flavor != 1) throw std::invalid_argument("unknown flavor " + std::to_string(flavor));
  ForecasterSpec spec;
  spec.family = family;
  spec.flavor = flavor;
  spec.lookback = family == Family::Psf ? 0 : lookback;
  switch (family) {
    case Family::NBeats: {
      NBeatsConfig c;
      c.stacks = flavor == 0 ? 20 : 30;
      c.blocks_per_stack = 1;
      c.layers_per_block = 4;
      c.layer_width = flavor == 0 ? 64 : 512;
      c.expansion_coefficient_dim = 5;
      c.lookback = lookback;
      spec.arch = c;
      break;
    }
    case Family::LstmEd: {
      LstmEdConfig c;
      c.recurrent_layers = flavor == 0 ? 1 : 2;
      c.hidden_dim = flavor == 0 ? 20 : 64;
      c.dropout = 0.0;
      c.learning_rate = flavor == 0 ? 0.0008 : 0.001;
      c.lookback = lookback;
      spec.arch = c;
      break;
    }
    case Family::Tcn: {
      TcnConfig c;
      c.kernel_size = flavor == 0 ? 3 : 5;
      c.num_filters = flavor == 0 ? 3 : 5;
      c.dilation_base = flavor == 0 ? 2 : 3;
      c.num_layers = 0;
      c.lookback = lookback;
      spec.arch = c;
      break;
    }
    case Family::Psf: {
      psf::PsfConfig c;
      c.method = flavor == 0 ? psf::EnsembleMethod::Averaging : psf::EnsembleMethod::Stacking;
      spec.arch = c;
      break;
    }
  }
  return spec;
}

ad::TrainConfig default_train_config(const ForecasterSpec& spec) {
  ad::TrainConfig t;
  if (const auto* l = std::get_if<LstmEdConfig>(&spec.arch)) t.learning_rate = l->learning_rate;
  return t;
}

std::unique_ptr<NeuralNet> make_network(const ArchConfig& arch, std::uint64_t seed) {
  if (const auto* c = std::get_if<NBeatsConfig>(&arch)) return std::make_unique<NBeats>(*c, seed);
  if (const auto* c = std::get_if<LstmEdConfig>(&arch)) return std::make_unique<LstmEncoderDecoder>(*c, seed);
  if (const auto* c = std::get_if<TcnConfig>(&arch)) return std::make_unique<Tcn>(*c, seed);
  throw std::invalid_argument("make_network: PSF has no network");
}

namespace {

Family family_of(const ArchConfig& arch) {
  switch (arch.index()) {
    case 0: return Family::NBeats;
    case 1: return Family::LstmEd;
    case 2: return Family::Tcn;
    default: return Family::Psf;
  }
}

std::size_t lookback_of(const ArchConfig& arch) {
  return std::visit(
      [](const auto& c) -> std::size_t {
        if constexpr (requires { c.lookback; })
          return c.lookback;
        else
          return 0;
      },
      arch);
}

std::size_t first_midnight(Timestamp start) {
  const int mod = minute_of_day(start);
  return mod == 0 ? 0 : static_cast<std::size_t>((1440 - mod) / 15);
}

double mean_squared(const NeuralNet& net, const WindowSource& src, const std::vector<std::size_t>& starts,
                    std::size_t batch_size) {
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t b = 0; b < starts.size(); b += batch_size) {
    const std::size_t e = std::min(starts.size(), b + batch_size);
    Batch batch = make_batch(src, std::span(starts).subspan(b, e - b), net.lookback(), net.horizon(),
                             net.uses_covariates(), true);
    ad::Graph g(net.params());
    const ad::Tensor& pred = g.value(net.forward(g, batch, Mode::Infer, nullptr));
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const double d = pred[i] - batch.target[i];
      sum += d * d;
    }
    count += pred.size();
  }
  return sum / static_cast<double>(count);
}

}  // namespace

Forecaster Forecaster::build(const ForecasterSpec& spec, std::uint64_t seed) {
  if (family_of(spec.arch) != spec.family)
    throw std::invalid_argument("forecaster: architecture config does not match family " +
                                std::string(to_string(spec.family)));
  Forecaster f;
  f.spec_ = spec;
  if (spec.family == Family::Psf) {
    auto cfg = std::get<psf::PsfConfig>(spec.arch);
    cfg.validate();
    if (cfg.seed == 0) cfg.seed = seed;
    f.spec_.arch = cfg;
  } else {
    f.spec_.lookback = lookback_of(spec.arch);
    f.net_ = make_network(spec.arch, seed);
  }
  return f;
}

std::size_t Forecaster::horizon() const noexcept { return net_ ? net_->horizon() : kHorizon; }

std::size_t Forecaster::min_history() const { return net_ ? net_->lookback() : 2 * kStepsPerDay; }

ad::TrainingStats Forecaster::fit(const SplitDataset& data, const std::set<Date>& holidays, const FitOptions& opts) {
  if (data.train.empty() || data.validation.empty())
    throw std::invalid_argument("fit: training and validation sets must be non-empty");
  if (data.train.end() != data.validation.start())
    throw std::invalid_argument("fit: validation must directly follow training");

  if (family() == Family::Psf) {
    const auto t0 = std::chrono::steady_clock::now();
    psf_ = psf::PsfModel::fit(data.train, std::get<psf::PsfConfig>(spec_.arch));
    if (psf_->config().method == psf::EnsembleMethod::Stacking)
      psf_->fit_meta(data.train.day_aligned(), data.validation.day_aligned(), opts.svr);
    ad::TrainingStats stats;
    stats.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return stats;
  }

  NeuralNet& net = *net_;
  const std::size_t L = net.lookback(), H = net.horizon();
  const CovariateMatrix train_cov = build_matrix(data.train, holidays);
  scaler_ = FeatureScaler::fit(data.train.values(), train_cov);

  const WindowSource train_src = WindowSource::make(data.train.values(), train_cov, scaler_);
  const auto train_starts = window_starts(first_midnight(data.train.start()), data.train.size(), L, H, opts.window_stride);
  if (train_starts.empty()) throw std::invalid_argument("fit: training split shorter than lookback + horizon");

  std::vector<double> joined = data.train.values();
  joined.insert(joined.end(), data.validation.values().begin(), data.validation.values().end());
  const CovariateMatrix joined_cov = build_matrix(data.train.start(), joined.size(), holidays);
  const WindowSource val_src = WindowSource::make(joined, joined_cov, scaler_);
  const auto val_starts = window_starts(data.train.size() + first_midnight(data.validation.start()), joined.size(), L,
                                        H, kStepsPerDay);
  if (val_starts.empty()) throw std::invalid_argument("fit: validation split holds no complete forecast day");

  ad::FitProblem problem;
  problem.params = &net.params();
  problem.train_size = train_starts.size();
  problem.batch_loss = [&](ad::Graph& g, std::span<const std::size_t> idx, std::mt19937_64& rng) {
    std::vector<std::size_t> starts(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) starts[i] = train_starts[idx[i]];
    Batch batch = make_batch(train_src, starts, L, H, net.uses_covariates(), true);
    ad::Var pred = net.forward(g, batch, Mode::Train, &rng);
    return g.mse(pred, g.input(std::move(batch.target)));
  };
  problem.validation_loss = [&] { return mean_squared(net, val_src, val_starts, opts.eval_batch_size); };
  return ad::fit(problem, opts.train);
}

std::vector<double> Forecaster::forecast_day(std::span<const double> observed, const CovariateMatrix& covariates) const {
  if (psf_) return psf_->predict(observed);
  if (!net_) throw std::logic_error("forecaster is not fitted");
  const std::size_t L = net_->lookback(), H = net_->horizon(), n = observed.size();
  if (n < L) throw std::invalid_argument("forecast: history shorter than the lookback window");
  if (net_->uses_covariates() && covariates.rows() < n + H)
    throw std::invalid_argument("forecast: covariates do not cover the forecast day");

  WindowSource src;
  src.load.resize(L);
  for (std::size_t i = 0; i < L; ++i) src.load[i] = scaler_.load.apply(observed[n - L + i]);
  if (net_->uses_covariates()) {
    constexpr std::size_t w = CovariateMatrix::kWidth;
    src.cov.resize((L + H) * w);
    for (std::size_t i = 0; i < L + H; ++i)
      for (std::size_t j = 0; j < w; ++j) src.cov[i * w + j] = scaler_.covariates[j].apply(covariates(n - L + i, j));
  }
  const std::size_t start = L;
  Batch batch = make_batch(src, std::span(&start, 1), L, H, net_->uses_covariates(), false);
  ad::Graph g(net_->params());
  const ad::Tensor& pred = g.value(net_->forward(g, batch, Mode::Infer, nullptr));
  std::vector<double> out(H);
  for (std::size_t i = 0; i < H; ++i) out[i] = scaler_.load.invert(pred[i]);
  return out;
}

// ---------------------------------------------------------------------------
// serialization

namespace {

json zscore_json(const ZScore& z) { return {{"mean", z.mean}, {"std", z.stddev}}; }
ZScore zscore_from(const json& j) { return ZScore{j.at("mean").get<double>(), j.at("std").get<double>()}; }

json arch_json(const ArchConfig& arch) {
  if (const auto* c = std::get_if<NBeatsConfig>(&arch))
    return {{"stacks", c->stacks},
            {"blocks_per_stack", c->blocks_per_stack},
            {"layers_per_block", c->layers_per_block},
            {"layer_width", c->layer_width},
            {"expansion_coefficient_dim", c->expansion_coefficient_dim},
            {"lookback", c->lookback},
            {"horizon", c->horizon}};
  if (const auto* c = std::get_if<LstmEdConfig>(&arch))
    return {{"recurrent_layers", c->recurrent_layers}, {"hidden_dim", c->hidden_dim},
            {"dropout", c->dropout},                   {"learning_rate", c->learning_rate},
            {"lookback", c->lookback},                 {"horizon", c->horizon},
            {"covariate_width", c->covariate_width}};
  if (const auto* c = std::get_if<TcnConfig>(&arch))
    return {{"kernel_size", c->kernel_size}, {"num_filters", c->num_filters},
            {"dilation_base", c->dilation_base}, {"num_layers", c->num_layers},
            {"lookback", c->lookback},       {"horizon", c->horizon},
            {"covariate_width", c->covariate_width}};
  const auto& c = std::get<psf::PsfConfig>(arch);
  return {{"windows", c.windows}, {"k_min", c.k_min},       {"k_max", c.k_max},
          {"seed", c.seed},       {"restarts", c.restarts},
          {"method", c.method == psf::EnsembleMethod::Averaging ? "averaging" : "stacking"}};
}

ArchConfig arch_from(Family family, const json& j) {
  switch (family) {
    case Family::NBeats: {
      NBeatsConfig c;
      c.stacks = j.at("stacks");
      c.blocks_per_stack = j.at("blocks_per_stack");
      c.layers_per_block = j.at("layers_per_block");
      c.layer_width = j.at("layer_width");
      c.expansion_coefficient_dim = j.at("expansion_coefficient_dim");
      c.lookback = j.at("lookback");
      c.horizon = j.at("horizon");
      return c;
    }
    case Family::LstmEd: {
      LstmEdConfig c;
      c.recurrent_layers = j.at("recurrent_layers");
      c.hidden_dim = j.at("hidden_dim");
      c.dropout = j.at("dropout");
      c.learning_rate = j.at("learning_rate");
      c.lookback = j.at("lookback");
      c.horizon = j.at("horizon");
      c.covariate_width = j.at("covariate_width");
      return c;
    }
    case Family::Tcn: {
      TcnConfig c;
      c.kernel_size = j.at("kernel_size");
      c.num_filters = j.at("num_filters");
      c.dilation_base = j.at("dilation_base");
      c.num_layers = j.at("num_layers");
      c.lookback = j.at("lookback");
      c.horizon = j.at("horizon");
      c.covariate_width = j.at("covariate_width");
      return c;
    }
    case Family::Psf: {
      psf::PsfConfig c;
      c.windows = j.at("windows").get<std::vector<std::size_t>>();
      c.k_min = j.at("k_min");
      c.k_max = j.at("k_max");
      c.seed = j.at("seed");
      c.restarts = j.at("restarts");
      c.method = j.at("method") == "stacking" ? psf::EnsembleMethod::Stacking : psf::EnsembleMethod::Averaging;
      return c;
    }
  }
  throw std::invalid_argument("unknown family");
}

constexpr const char* kFormat = "gridcast-forecaster/1";

}  // namespace

json Forecaster::to_json() const {
  json j;
  j["format"] = kFormat;
  j["family"] = to_string(spec_.family);
  j["flavor"] = spec_.flavor;
  j["lookback"] = spec_.lookback;
  j["config"] = arch_json(spec_.arch);
  json cov = json::array();
  for (const auto& z : scaler_.covariates) cov.push_back(zscore_json(z));
  j["scaler"] = {{"load", zscore_json(scaler_.load)}, {"covariates", cov}};
  if (net_) {
    json params = json::array();
    const auto& ps = net_->params();
    for (std::size_t i = 0; i < ps.size(); ++i)
      params.push_back({{"name", ps.name(i)}, {"shape", ps.value(i).shape()}, {"values", ps.value(i).storage()}});
    j["parameters"] = std::move(params);
  }
  if (psf_) {
    const auto& lab = psf_->clustering();
    j["psf"] = {{"scaler", zscore_json(psf_->scaler())},
                {"k", lab.k},
                {"centroids", lab.centroids},
                {"meta", {{"weights", psf_->meta().weights},
                          {"bias", psf_->meta().bias},
                          {"scaler", zscore_json(psf_->meta().scaler)}}}};
  }
  return j;
}

Forecaster Forecaster::from_json(const json& j) {
  if (j.value("format", "") != kFormat) throw std::invalid_argument("not a gridcast forecaster checkpoint");
  ForecasterSpec spec;
  spec.family = parse_family(j.at("family").get<std::string>());
  spec.flavor = j.at("flavor");
  spec.lookback = j.at("lookback");
  spec.arch = arch_from(spec.family, j.at("config"));
  Forecaster f = build(spec, 0);
  const auto& sc = j.at("scaler");
  f.scaler_.load = zscore_from(sc.at("load"));
  const auto& cov = sc.at("covariates");
  if (cov.size() != f.scaler_.covariates.size()) throw std::invalid_argument("checkpoint: covariate scaler width");
  for (std::size_t i = 0; i < cov.size(); ++i) f.scaler_.covariates[i] = zscore_from(cov[i]);

  if (f.net_) {
    auto& ps = f.net_->params();
    const auto& params = j.at("parameters");
    if (params.size() != ps.size()) throw std::invalid_argument("checkpoint: parameter count mismatch");
    for (std::size_t i = 0; i < ps.size(); ++i) {
      const auto& p = params[i];
      if (p.at("name").get<std::string>() != ps.name(i))
        throw std::invalid_argument("checkpoint: expected parameter '" + ps.name(i) + "'");
      ad::Tensor t(p.at("shape").get<ad::Shape>(), p.at("values").get<std::vector<double>>());
      if (t.shape() != ps.value(i).shape())
        throw std::invalid_argument("checkpoint: shape mismatch for '" + ps.name(i) + "'");
      ps.value(i) = std::move(t);
    }
  }
  if (j.contains("psf")) {
    const auto& p = j.at("psf");
    psf::Labeling lab;
    lab.k = p.at("k");
    lab.centroids = p.at("centroids").get<std::vector<double>>();
    if (lab.centroids.size() != lab.k * kStepsPerDay) throw std::invalid_argument("checkpoint: centroid size");
    psf::PsfModel model(std::get<psf::PsfConfig>(f.spec_.arch), zscore_from(p.at("scaler")), std::move(lab));
    psf::LinearSvr meta;
    meta.weights = p.at("meta").at("weights").get<std::vector<double>>();
    meta.bias = p.at("meta").at("bias");
    meta.scaler = zscore_from(p.at("meta").at("scaler"));
    model.set_meta(std::move(meta));
    f.psf_ = std::move(model);
  }
  return f;
}

void Forecaster::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_json().dump() << '\n';
}

Forecaster Forecaster::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return from_json(json::parse(in));
}

}  // namespace gridcast::models
