#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <set>
#include <string_view>
#include <variant>

#include "gridcast/day_ahead.hpp"
#include "gridcast/networks.hpp"
#include "gridcast/optim.hpp"
#include "gridcast/psf.hpp"
#include "gridcast/series.hpp"

#include "json.hpp"

namespace gridcast::models {

enum class Family { Psf, NBeats, LstmEd, Tcn };

std::string_view to_string(Family f);
/// Accepts "psf", "nbeats", "lstm", "tcn" (case-insensitive; "n-beats" and "lstm-ed" too).
Family parse_family(std::string_view name);

using ArchConfig = std::variant<NBeatsConfig, LstmEdConfig, TcnConfig, psf::PsfConfig>;

struct ForecasterSpec {
  Family family = Family::NBeats;
  int flavor = 0;
  std::size_t lookback = 384;
  ArchConfig arch;
};

/// Architecture hyperparameters of a named flavor (0 or 1) for `family`.
/// PSF ignores the lookback.
ForecasterSpec flavor_spec(Family family, int flavor, std::size_t lookback);

/// Training defaults; LSTM flavors carry their own learning rate.
ad::TrainConfig default_train_config(const ForecasterSpec& spec);

struct FitOptions {
  ad::TrainConfig train;
  /// Distance between consecutive training windows (96 = one per day, aligned at 00:00).
  std::size_t window_stride = kStepsPerDay;
  std::size_t eval_batch_size = 256;
  psf::SvrOptions svr;
};

/// A trained or untrained day-ahead forecaster of any family.
class Forecaster final : public DayAheadModel {
public:
  static Forecaster build(const ForecasterSpec& spec, std::uint64_t seed);

  Forecaster(Forecaster&&) noexcept = default;
  Forecaster& operator=(Forecaster&&) noexcept = default;

  const ForecasterSpec& spec() const noexcept { return spec_; }
  Family family() const noexcept { return spec_.family; }
  std::size_t horizon() const noexcept;

  /// Neural families: Adam + early stopping on the validation split.
  /// PSF: clustering on the training split; the stacking flavor also fits its
  /// meta-learner on the validation split.
  ad::TrainingStats fit(const SplitDataset& data, const std::set<Date>& holidays, const FitOptions& opts);

  std::size_t min_history() const override;
  std::vector<double> forecast_day(std::span<const double> observed, const CovariateMatrix& covariates) const override;

  NeuralNet* network() noexcept { return net_.get(); }
  const NeuralNet* network() const noexcept { return net_.get(); }
  const std::optional<psf::PsfModel>& psf() const noexcept { return psf_; }
  const FeatureScaler& scaler() const noexcept { return scaler_; }
  void set_scaler(const FeatureScaler& s) { scaler_ = s; }

  nlohmann::json to_json() const;
  static Forecaster from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static Forecaster load(const std::filesystem::path& path);

private:
  Forecaster() = default;

  ForecasterSpec spec_;
  std::unique_ptr<NeuralNet> net_;
  std::optional<psf::PsfModel> psf_;
  FeatureScaler scaler_;
};

/// Builds a network from an architecture config (PSF configs are rejected).
std::unique_ptr<NeuralNet> make_network(const ArchConfig& arch, std::uint64_t seed);

}  // namespace gridcast::models
