#pragma once

// Pattern Sequence Forecasting: days are clustered into labels, the most
// recent label sequence is matched against history, and the days that
// followed each match are averaged.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "gridcast/scaler.hpp"
#include "gridcast/series.hpp"

namespace gridcast::psf {

/// One standardized 96-value row per complete calendar day.
class DayMatrix {
public:
  DayMatrix() = default;
  DayMatrix(std::vector<double> data, std::vector<Date> dates, ZScore scaler);

  std::size_t days() const noexcept { return dates_.size(); }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * kStepsPerDay, kStepsPerDay}; }
  const std::vector<double>& data() const noexcept { return data_; }
  const std::vector<Date>& dates() const noexcept { return dates_; }
  const ZScore& scaler() const noexcept { return scaler_; }

private:
  std::vector<double> data_;
  std::vector<Date> dates_;
  ZScore scaler_;
};

/// Standardizes with `scaler` (fitted on training data).
DayMatrix day_matrix(const LoadSeries& series, const ZScore& scaler);
/// Fits the scaler on the complete days of `series` itself.
DayMatrix day_matrix(const LoadSeries& series);

struct Labeling {
  std::size_t k = 0;
  std::vector<double> centroids;  ///< k x 96
  std::vector<std::size_t> labels;
  double inertia = 0.0;
  /// Inertia after every assignment step of the winning restart.
  std::vector<double> inertia_trace;

  std::span<const double> centroid(std::size_t c) const {
    return {centroids.data() + c * kStepsPerDay, kStepsPerDay};
  }
};

/// Lloyd's algorithm with k-means++ seeding; keeps the lowest-inertia restart.
Labeling kmeans_fit(const DayMatrix& days, std::size_t k, std::uint64_t seed, std::size_t restarts = 5,
                    std::size_t max_iterations = 300);

/// Nearest-centroid label of one standardized day (ties go to the lower index).
std::size_t assign_label(const Labeling& labeling, std::span<const double> day);

double silhouette_score(const DayMatrix& days, const Labeling& labeling);

/// Index of the highest score; exact ties resolve to the earliest entry.
std::size_t best_score_index(std::span<const double> scores);

/// Fits every k in [k_min, k_max] and keeps the best silhouette (ties toward smaller k).
Labeling select_clustering(const DayMatrix& days, std::size_t k_min, std::size_t k_max, std::uint64_t seed,
                           std::size_t restarts = 5);

/// Standardized forecast of the day after `days`: mean of the successors of
/// every earlier occurrence of the last `w` labels, shrinking `w` on no match
/// and falling back to the mean of all days.
std::vector<double> match_and_average(std::span<const std::size_t> labels, const DayMatrix& days, std::size_t w);

/// As match_and_average, de-standardized to megawatts.
std::vector<double> psf_predict_day(const Labeling& labeling, const DayMatrix& days, std::size_t w);

std::vector<double> ensemble_average(const std::vector<std::vector<double>>& members);

struct SvrOptions {
  double epsilon = 0.1;
  double lambda = 1e-4;
  std::size_t iterations = 3000;
  double step = 0.1;
};

/// Linear epsilon-insensitive stacking regressor over member forecasts.
/// Inputs and target are standardized with the target's statistics, so
/// weights are directly comparable to averaging weights (1/members).
struct LinearSvr {
  std::vector<double> weights;
  double bias = 0.0;
  ZScore scaler;

  double predict(std::span<const double> member_values) const;
};

/// `samples` is row-major (n x members).
LinearSvr svr_meta_fit(std::span<const double> samples, std::size_t members, std::span<const double> actuals,
                       const SvrOptions& opts = {});

enum class EnsembleMethod { Averaging, Stacking };

struct PsfConfig {
  std::vector<std::size_t> windows{1, 2, 3, 5, 7};
  std::size_t k_min = 2;
  std::size_t k_max = 10;
  std::uint64_t seed = 0;
  std::size_t restarts = 5;
  EnsembleMethod method = EnsembleMethod::Averaging;

  void validate() const;
};

/// A fitted PSF ensemble: one clustering shared by every window-length member.
class PsfModel {
public:
  PsfModel() = default;
  PsfModel(PsfConfig cfg, ZScore scaler, Labeling clustering);

  /// Clusters the complete days of `train`.
  static PsfModel fit(const LoadSeries& train, const PsfConfig& cfg);

  const PsfConfig& config() const noexcept { return cfg_; }
  const ZScore& scaler() const noexcept { return scaler_; }
  const Labeling& clustering() const noexcept { return clustering_; }
  const LinearSvr& meta() const noexcept { return meta_; }
  void set_meta(LinearSvr meta) { meta_ = std::move(meta); }

  /// Member forecasts (megawatts) for the day following `history`, which must
  /// end at midnight. Leading partial days are ignored.
  std::vector<std::vector<double>> member_forecasts(std::span<const double> history) const;
  std::vector<double> predict(std::span<const double> history) const;

  /// Trains the stacking meta-learner on day-ahead member forecasts over
  /// `target_days` (whole days following `prefix`).
  void fit_meta(const LoadSeries& prefix, const LoadSeries& target_days, const SvrOptions& opts = {});

private:
  PsfConfig cfg_;
  ZScore scaler_;
  Labeling clustering_;
  LinearSvr meta_;
};

}  // namespace gridcast::psf
