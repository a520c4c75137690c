#include "gridcast/psf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace gridcast::psf {

namespace {

double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace

DayMatrix::DayMatrix(std::vector<double> data, std::vector<Date> dates, ZScore scaler)
    : data_(std::move(data)), dates_(std::move(dates)), scaler_(scaler) {
  if (data_.size() != dates_.size() * kStepsPerDay) throw std::invalid_argument("day matrix: rows must have 96 values");
}

DayMatrix day_matrix(const LoadSeries& series, const ZScore& scaler) {
  const LoadSeries aligned = series.day_aligned();
  const std::size_t n = aligned.size() / kStepsPerDay;
  if (n < 2) throw std::invalid_argument("day matrix: fewer than 2 complete days");
  std::vector<double> data(aligned.size());
  std::vector<Date> dates(n);
  for (std::size_t i = 0; i < aligned.size(); ++i) data[i] = scaler.apply(aligned[i]);
  for (std::size_t d = 0; d < n; ++d) dates[d] = date_of(aligned.time_at(d * kStepsPerDay));
  return DayMatrix{std::move(data), std::move(dates), scaler};
}

DayMatrix day_matrix(const LoadSeries& series) {
  const LoadSeries aligned = series.day_aligned();
  return day_matrix(aligned, ZScore::fit(aligned.values()));
}

// ---------------------------------------------------------------------------
// k-means

std::size_t assign_label(const Labeling& labeling, std::span<const double> day) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < labeling.k; ++c) {
    const double d = sq_dist(day, labeling.centroid(c));
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

namespace {

Labeling kmeans_once(const DayMatrix& days, std::size_t k, std::mt19937_64& rng, std::size_t max_iterations) {
  const std::size_t n = days.days();
  Labeling lab;
  lab.k = k;
  lab.centroids.resize(k * kStepsPerDay);

  // k-means++ seeding
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::size_t chosen = pick(rng);
  for (std::size_t c = 0; c < k; ++c) {
    if (c > 0) {
      double total = 0.0;
      for (double v : d2) total += v;
      if (total > 0.0) {
        std::uniform_real_distribution<double> u(0.0, total);
        double r = u(rng);
        chosen = n - 1;
        for (std::size_t i = 0; i < n; ++i) {
          r -= d2[i];
          if (r < 0.0) {
            chosen = i;
            break;
          }
        }
      } else {
        chosen = pick(rng);
      }
    }
    auto row = days.row(chosen);
    std::copy(row.begin(), row.end(), lab.centroids.begin() + static_cast<std::ptrdiff_t>(c * kStepsPerDay));
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], sq_dist(days.row(i), lab.centroid(c)));
  }

  lab.labels.assign(n, k);  // k = unassigned
  std::vector<double> dist(n);
  for (std::size_t iter = 0; iter < max_iterations; ++iter) {
    bool changed = false;
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double d = sq_dist(days.row(i), lab.centroid(c));
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (lab.labels[i] != best) changed = true;
      lab.labels[i] = best;
      dist[i] = best_d;
      inertia += best_d;
    }

    // Empty clusters take over the point farthest from its centroid.
    std::vector<std::size_t> counts(k, 0);
    for (auto l : lab.labels) ++counts[l];
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) continue;
      std::size_t far = 0;
      for (std::size_t i = 1; i < n; ++i)
        if (dist[i] > dist[far] && counts[lab.labels[i]] > 1) far = i;
      if (counts[lab.labels[far]] <= 1) continue;
      --counts[lab.labels[far]];
      inertia -= dist[far];
      dist[far] = 0.0;
      lab.labels[far] = c;
      counts[c] = 1;
      changed = true;
    }
    lab.inertia_trace.push_back(inertia);
    lab.inertia = inertia;
    if (!changed) break;

    std::fill(lab.centroids.begin(), lab.centroids.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      auto row = days.row(i);
      double* c = lab.centroids.data() + lab.labels[i] * kStepsPerDay;
      for (std::size_t j = 0; j < kStepsPerDay; ++j) c[j] += row[j];
    }
    for (std::size_t c = 0; c < k; ++c) {
      double* cen = lab.centroids.data() + c * kStepsPerDay;
      for (std::size_t j = 0; j < kStepsPerDay; ++j) cen[j] /= static_cast<double>(counts[c]);
    }
  }
  return lab;
}

}  // namespace

Labeling kmeans_fit(const DayMatrix& days, std::size_t k, std::uint64_t seed, std::size_t restarts,
                    std::size_t max_iterations) {
  if (k < 1 || k > days.days())
    throw std::invalid_argument("kmeans: k must lie in [1, " + std::to_string(days.days()) + "]");
  if (restarts < 1) throw std::invalid_argument("kmeans: restarts must be >= 1");
  std::mt19937_64 rng(seed);
  Labeling best;
  for (std::size_t r = 0; r < restarts; ++r) {
    Labeling lab = kmeans_once(days, k, rng, max_iterations);
    if (r == 0 || lab.inertia < best.inertia) best = std::move(lab);
  }
  return best;
}

// ---------------------------------------------------------------------------
// silhouette

namespace {

double silhouette_from(const std::vector<double>& dist, std::size_t n, const Labeling& labeling) {
  std::vector<std::size_t> counts(labeling.k, 0);
  for (auto l : labeling.labels) ++counts[l];
  std::vector<double> sums(labeling.k);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t own = labeling.labels[i];
    if (counts[own] <= 1) continue;  // singleton scores 0
    std::fill(sums.begin(), sums.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) sums[labeling.labels[j]] += dist[i * n + j];
    const double a = sums[own] / static_cast<double>(counts[own] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < labeling.k; ++c)
      if (c != own && counts[c] > 0) b = std::min(b, sums[c] / static_cast<double>(counts[c]));
    if (!std::isfinite(b)) continue;
    const double m = std::max(a, b);
    if (m > 0.0) total += (b - a) / m;
  }
  return total / static_cast<double>(n);
}

std::vector<double> distance_matrix(const DayMatrix& days) {
  const std::size_t n = days.days();
  std::vector<double> dist(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = std::sqrt(sq_dist(days.row(i), days.row(j)));
      dist[i * n + j] = d;
      dist[j * n + i] = d;
    }
  return dist;
}

void check_labeling(const DayMatrix& days, const Labeling& labeling) {
  if (labeling.k < 2) throw std::invalid_argument("silhouette: requires k >= 2");
  if (labeling.labels.size() != days.days()) throw std::invalid_argument("silhouette: label count mismatch");
  for (auto l : labeling.labels)
    if (l >= labeling.k) throw std::invalid_argument("silhouette: label out of range");
}

}  // namespace

double silhouette_score(const DayMatrix& days, const Labeling& labeling) {
  check_labeling(days, labeling);
  return silhouette_from(distance_matrix(days), days.days(), labeling);
}

std::size_t best_score_index(std::span<const double> scores) {
  if (scores.empty()) throw std::invalid_argument("best_score_index: no scores");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i)
    if (scores[i] > scores[best]) best = i;
  return best;
}

Labeling select_clustering(const DayMatrix& days, std::size_t k_min, std::size_t k_max, std::uint64_t seed,
                           std::size_t restarts) {
  if (k_min < 2 || k_max < k_min) throw std::invalid_argument("select_clustering: need 2 <= k_min <= k_max");
  if (k_min > days.days()) throw std::invalid_argument("select_clustering: k_min exceeds the number of days");
  k_max = std::min(k_max, days.days());
  const auto dist = distance_matrix(days);
  std::vector<Labeling> fits;
  std::vector<double> scores;
  for (std::size_t k = k_min; k <= k_max; ++k) {
    fits.push_back(kmeans_fit(days, k, seed, restarts));
    check_labeling(days, fits.back());
    scores.push_back(silhouette_from(dist, days.days(), fits.back()));
  }
  return std::move(fits[best_score_index(scores)]);
}

// ---------------------------------------------------------------------------
// prediction

std::vector<double> match_and_average(std::span<const std::size_t> labels, const DayMatrix& days, std::size_t w) {
  const std::size_t n = labels.size();
  if (n != days.days()) throw std::invalid_argument("psf: label count does not match day count");
  if (n == 0) throw std::invalid_argument("psf: empty history");
  std::vector<double> out(kStepsPerDay, 0.0);
  for (std::size_t width = std::min(w, n - 1); width >= 1; --width) {
    const auto tail = labels.subspan(n - width);
    std::size_t matches = 0;
    std::fill(out.begin(), out.end(), 0.0);
    // j + width < n: the successor day exists, which also excludes the tail itself.
    for (std::size_t j = 0; j + width < n; ++j) {
      if (!std::equal(tail.begin(), tail.end(), labels.begin() + static_cast<std::ptrdiff_t>(j))) continue;
      auto next = days.row(j + width);
      for (std::size_t s = 0; s < kStepsPerDay; ++s) out[s] += next[s];
      ++matches;
    }
    if (matches > 0) {
      for (auto& v : out) v /= static_cast<double>(matches);
      return out;
    }
  }
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t d = 0; d < n; ++d) {
    auto row = days.row(d);
    for (std::size_t s = 0; s < kStepsPerDay; ++s) out[s] += row[s];
  }
  for (auto& v : out) v /= static_cast<double>(n);
  return out;
}

std::vector<double> psf_predict_day(const Labeling& labeling, const DayMatrix& days, std::size_t w) {
  if (w < 1) throw std::invalid_argument("psf: window length must be >= 1");
  auto out = match_and_average(labeling.labels, days, w);
  for (auto& v : out) v = days.scaler().invert(v);
  return out;
}

std::vector<double> ensemble_average(const std::vector<std::vector<double>>& members) {
  if (members.empty()) throw std::invalid_argument("ensemble_average: no members");
  std::vector<double> out(members.front().size(), 0.0);
  for (const auto& m : members) {
    if (m.size() != out.size()) throw std::invalid_argument("ensemble_average: member length mismatch");
    for (std::size_t i = 0; i < m.size(); ++i) out[i] += m[i];
  }
  for (auto& v : out) v /= static_cast<double>(members.size());
  return out;
}

// ---------------------------------------------------------------------------
// stacking

double LinearSvr::predict(std::span<const double> member_values) const {
  if (member_values.size() != weights.size()) throw std::invalid_argument("svr: member count mismatch");
  double z = bias;
  for (std::size_t i = 0; i < weights.size(); ++i) z += weights[i] * scaler.apply(member_values[i]);
  return scaler.invert(z);
}

LinearSvr svr_meta_fit(std::span<const double> samples, std::size_t members, std::span<const double> actuals,
                       const SvrOptions& opts) {
  if (members == 0 || actuals.empty() || samples.size() != actuals.size() * members)
    throw std::invalid_argument("svr: need >= 1 sample per member and matching shapes");
  const std::size_t n = actuals.size();
  LinearSvr model;
  model.scaler = ZScore::fit(actuals);
  std::vector<double> x(samples.size()), y(n);
  for (std::size_t i = 0; i < samples.size(); ++i) x[i] = model.scaler.apply(samples[i]);
  for (std::size_t i = 0; i < n; ++i) y[i] = model.scaler.apply(actuals[i]);

  const double prior = 1.0 / static_cast<double>(members);
  std::vector<double> w(members, prior), gw(members);
  double b = 0.0;

  auto objective = [&](const std::vector<double>& wv, double bv, std::vector<double>* grad_w, double* grad_b) {
    double loss = 0.0;
    if (grad_w) std::fill(grad_w->begin(), grad_w->end(), 0.0);
    if (grad_b) *grad_b = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double r = bv - y[i];
      const double* xi = x.data() + i * members;
      for (std::size_t m = 0; m < members; ++m) r += wv[m] * xi[m];
      const double excess = std::abs(r) - opts.epsilon;
      if (excess <= 0.0) continue;
      loss += excess;
      const double sgn = r > 0.0 ? 1.0 : -1.0;
      if (grad_w)
        for (std::size_t m = 0; m < members; ++m) (*grad_w)[m] += sgn * xi[m];
      if (grad_b) *grad_b += sgn;
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    loss *= inv_n;
    double reg = 0.0;
    for (std::size_t m = 0; m < members; ++m) {
      reg += (wv[m] - prior) * (wv[m] - prior);
      if (grad_w) (*grad_w)[m] = (*grad_w)[m] * inv_n + opts.lambda * (wv[m] - prior);
    }
    if (grad_b) *grad_b *= inv_n;
    return loss + 0.5 * opts.lambda * reg;
  };

  std::vector<double> best_w = w;
  double best_b = b;
  double best_obj = objective(w, b, nullptr, nullptr);
  double gb = 0.0;
  for (std::size_t t = 1; t <= opts.iterations; ++t) {
    objective(w, b, &gw, &gb);
    bool flat = gb == 0.0;
    for (double g : gw) flat = flat && g == 0.0;
    if (flat) break;
    const double eta = opts.step / std::sqrt(static_cast<double>(t));
    for (std::size_t m = 0; m < members; ++m) w[m] -= eta * gw[m];
    b -= eta * gb;
    const double obj = objective(w, b, nullptr, nullptr);
    if (!std::isfinite(obj)) throw std::runtime_error("svr: sub-gradient descent diverged");
    if (obj < best_obj) {
      best_obj = obj;
      best_w = w;
      best_b = b;
    }
  }
  model.weights = std::move(best_w);
  model.bias = best_b;
  return model;
}

// ---------------------------------------------------------------------------
// ensemble model

void PsfConfig::validate() const {
  if (windows.empty()) throw std::invalid_argument("psf: at least one window length required");
  for (auto w : windows)
    if (w < 1) throw std::invalid_argument("psf: window lengths must be >= 1");
  if (k_min < 2 || k_max < k_min) throw std::invalid_argument("psf: need 2 <= k_min <= k_max");
  if (restarts < 1) throw std::invalid_argument("psf: restarts must be >= 1");
}

PsfModel::PsfModel(PsfConfig cfg, ZScore scaler, Labeling clustering)
    : cfg_(std::move(cfg)), scaler_(scaler), clustering_(std::move(clustering)) {
  cfg_.validate();
  const double prior = 1.0 / static_cast<double>(cfg_.windows.size());
  meta_.weights.assign(cfg_.windows.size(), prior);
  meta_.scaler = scaler_;
}

PsfModel PsfModel::fit(const LoadSeries& train, const PsfConfig& cfg) {
  cfg.validate();
  const DayMatrix days = day_matrix(train);
  Labeling lab = select_clustering(days, cfg.k_min, cfg.k_max, cfg.seed, cfg.restarts);
  lab.labels.clear();  // re-derived from history at prediction time
  lab.inertia_trace.clear();
  return PsfModel{cfg, days.scaler(), std::move(lab)};
}

std::vector<std::vector<double>> PsfModel::member_forecasts(std::span<const double> history) const {
  const std::size_t n_days = history.size() / kStepsPerDay;
  if (n_days < 2) throw std::invalid_argument("psf: history must hold at least 2 complete days");
  const auto tail = history.subspan(history.size() - n_days * kStepsPerDay);
  std::vector<double> data(tail.size());
  for (std::size_t i = 0; i < tail.size(); ++i) data[i] = scaler_.apply(tail[i]);
  const DayMatrix days{std::move(data), std::vector<Date>(n_days), scaler_};
  std::vector<std::size_t> labels(n_days);
  for (std::size_t d = 0; d < n_days; ++d) labels[d] = assign_label(clustering_, days.row(d));

  std::vector<std::vector<double>> out;
  out.reserve(cfg_.windows.size());
  for (auto w : cfg_.windows) {
    auto f = match_and_average(labels, days, w);
    for (auto& v : f) v = scaler_.invert(v);
    out.push_back(std::move(f));
  }
  return out;
}

std::vector<double> PsfModel::predict(std::span<const double> history) const {
  auto members = member_forecasts(history);
  if (cfg_.method == EnsembleMethod::Averaging) return ensemble_average(members);
  std::vector<double> out(kStepsPerDay);
  std::vector<double> point(members.size());
  for (std::size_t s = 0; s < kStepsPerDay; ++s) {
    for (std::size_t m = 0; m < members.size(); ++m) point[m] = members[m][s];
    out[s] = meta_.predict(point);
  }
  return out;
}

void PsfModel::fit_meta(const LoadSeries& prefix, const LoadSeries& target_days, const SvrOptions& opts) {
  if (target_days.size() % kStepsPerDay != 0 || target_days.empty())
    throw std::invalid_argument("psf: meta-learner targets must be whole days");
  if (prefix.end() != target_days.start()) throw std::invalid_argument("psf: meta-learner prefix must abut targets");
  std::vector<double> history = prefix.values();
  const std::size_t members = cfg_.windows.size();
  std::vector<double> samples;
  samples.reserve(target_days.size() * members);
  for (std::size_t d = 0; d < target_days.size() / kStepsPerDay; ++d) {
    const auto fc = member_forecasts(history);
    for (std::size_t s = 0; s < kStepsPerDay; ++s)
      for (std::size_t m = 0; m < members; ++m) samples.push_back(fc[m][s]);
    const auto begin = target_days.values().begin() + static_cast<std::ptrdiff_t>(d * kStepsPerDay);
    history.insert(history.end(), begin, begin + static_cast<std::ptrdiff_t>(kStepsPerDay));
  }
  meta_ = svr_meta_fit(samples, members, target_days.values(), opts);
}

}  // namespace gridcast::psf
