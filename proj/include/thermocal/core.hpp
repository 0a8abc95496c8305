#pragma once

// Domain types and the linear expansion model shared by every stage of the
// calibration pipeline.
//
// Unit convention (fixed project-wide, converted only at I/O boundaries):
//   rod displacement q, contracted length q0 ... millimetres
//   thermal expansion ............................ micrometres
//   relative temperature dT ...................... kelvins
//   expansion coefficients A, B ................. um / (mm * K)

#include "thermocal/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace thermocal {

inline constexpr double kDefaultStrokeMm = 250.0;
inline constexpr double kDefaultQ0Mm = 500.0;

enum class Unit { millimetre, micrometre, kelvin };

constexpr std::string_view unit_symbol(Unit u) noexcept {
  switch (u) {
  case Unit::millimetre: return "mm";
  case Unit::micrometre: return "um";
  case Unit::kelvin: return "K";
  }
  return "?";
}

/// Uniformly sampled scalar channel. Samples flagged invalid are excluded from
/// every statistic and fit downstream.
class TimeSeries {
public:
  TimeSeries(double t0, double dt, std::vector<double> values, std::vector<std::uint8_t> valid, Unit unit)
      : t0_(t0), dt_(dt), values_(std::move(values)), valid_(std::move(valid)), unit_(unit) {
    if (values_.empty())
      fail(ErrorCode::input, "time series must hold at least one sample");
    if (values_.size() != valid_.size())
      fail(ErrorCode::input, "time series values and validity mask differ in length");
    if (!(dt_ > 0.0) || !std::isfinite(dt_))
      fail(ErrorCode::input, "time series sample period must be positive");
  }

  /// All-valid series.
  TimeSeries(double t0, double dt, std::vector<double> values, Unit unit)
      : TimeSeries(t0, dt, values, std::vector<std::uint8_t>(values.size(), 1), unit) {}

  double t0() const noexcept { return t0_; }
  double dt() const noexcept { return dt_; }
  Unit unit() const noexcept { return unit_; }
  std::size_t size() const noexcept { return values_.size(); }
  double time_at(std::size_t k) const noexcept { return t0_ + static_cast<double>(k) * dt_; }

  std::span<const double> values() const noexcept { return values_; }
  std::span<const std::uint8_t> valid() const noexcept { return valid_; }
  double operator[](std::size_t k) const { return values_[k]; }
  bool is_valid(std::size_t k) const { return valid_[k] != 0; }

  bool operator==(const TimeSeries&) const = default;

private:
  double t0_;
  double dt_;
  std::vector<double> values_;
  std::vector<std::uint8_t> valid_;
  Unit unit_;
};

/// Aligned multi-channel record of one scenario on a common time grid.
///
/// Temperature columns are addressed by sensor id, 1-based. At the first valid
/// sample every temperature column and the measured expansion are exactly zero.
class ScenarioDataset {
public:
  ScenarioDataset(std::string id, double q0_mm, std::vector<double> time_s, std::vector<double> q_mm,
                  std::vector<std::vector<double>> delta_T_K, std::vector<double> delta_q_um,
                  std::vector<std::uint8_t> valid, double stroke_mm = kDefaultStrokeMm)
      : id_(std::move(id)), q0_mm_(q0_mm), stroke_mm_(stroke_mm), time_s_(std::move(time_s)), q_mm_(std::move(q_mm)),
        delta_T_K_(std::move(delta_T_K)), delta_q_um_(std::move(delta_q_um)), valid_(std::move(valid)) {
    check();
  }

  const std::string& id() const noexcept { return id_; }
  double q0_mm() const noexcept { return q0_mm_; }
  double stroke_mm() const noexcept { return stroke_mm_; }
  std::size_t size() const noexcept { return time_s_.size(); }
  int n_sensors() const noexcept { return static_cast<int>(delta_T_K_.size()); }

  std::span<const double> time_s() const noexcept { return time_s_; }
  std::span<const double> q_mm() const noexcept { return q_mm_; }
  std::span<const double> delta_q_um() const noexcept { return delta_q_um_; }
  std::span<const std::uint8_t> valid() const noexcept { return valid_; }
  bool is_valid(std::size_t k) const { return valid_[k] != 0; }

  std::span<const double> delta_T_K(int sensor_id) const {
    if (sensor_id < 1 || sensor_id > n_sensors())
      fail(ErrorCode::config, "dataset '" + id_ + "' has no temperature sensor " + std::to_string(sensor_id));
    return delta_T_K_[static_cast<std::size_t>(sensor_id - 1)];
  }

  /// Temperatures of every sensor at sample k, indexed by sensor id - 1.
  void temperatures_at(std::size_t k, std::span<double> out) const {
    for (std::size_t s = 0; s < delta_T_K_.size() && s < out.size(); ++s)
      out[s] = delta_T_K_[s][k];
  }

  std::size_t first_valid() const noexcept { return first_valid_; }
  std::size_t valid_count() const noexcept {
    return static_cast<std::size_t>(std::count(valid_.begin(), valid_.end(), std::uint8_t{1}));
  }

  ScenarioDataset with_q0(double q0_mm) const {
    ScenarioDataset copy = *this;
    copy.q0_mm_ = q0_mm;
    copy.check();
    return copy;
  }

  ScenarioDataset with_id(std::string id) const {
    ScenarioDataset copy = *this;
    copy.id_ = std::move(id);
    return copy;
  }

  bool operator==(const ScenarioDataset&) const = default;

private:
  void check() {
    const std::size_t n = time_s_.size();
    if (n == 0)
      fail(ErrorCode::input, "dataset '" + id_ + "' is empty");
    if (q_mm_.size() != n || delta_q_um_.size() != n || valid_.size() != n)
      fail(ErrorCode::input, "dataset '" + id_ + "' columns differ in length");
    if (delta_T_K_.empty())
      fail(ErrorCode::input, "dataset '" + id_ + "' has no temperature sensors");
    for (const auto& col : delta_T_K_)
      if (col.size() != n)
        fail(ErrorCode::input, "dataset '" + id_ + "' columns differ in length");
    if (!(q0_mm_ > 0.0) || !std::isfinite(q0_mm_))
      fail(ErrorCode::input, "q0 must be a positive length in mm");
    if (!(stroke_mm_ > 0.0))
      fail(ErrorCode::input, "stroke must be positive");
    for (std::size_t k = 1; k < n; ++k)
      if (!(time_s_[k] > time_s_[k - 1]))
        fail(ErrorCode::input, "dataset '" + id_ + "' time column is not strictly increasing");
    for (double q : q_mm_)
      if (!(q >= 0.0 && q <= stroke_mm_))
        fail(ErrorCode::input, "dataset '" + id_ + "' rod displacement outside [0, stroke]");
    for (auto& v : valid_)
      v = v ? 1 : 0;
    auto it = std::find(valid_.begin(), valid_.end(), std::uint8_t{1});
    if (it == valid_.end())
      fail(ErrorCode::input, "dataset '" + id_ + "' has no valid sample");
    first_valid_ = static_cast<std::size_t>(it - valid_.begin());
    if (delta_q_um_[first_valid_] != 0.0)
      fail(ErrorCode::input, "dataset '" + id_ + "' expansion is not zero-referenced at the first valid sample");
    for (const auto& col : delta_T_K_)
      if (col[first_valid_] != 0.0)
        fail(ErrorCode::input, "dataset '" + id_ + "' temperatures are not zero-referenced at the first valid sample");
  }

  std::string id_;
  double q0_mm_;
  double stroke_mm_;
  std::vector<double> time_s_;
  std::vector<double> q_mm_;
  std::vector<std::vector<double>> delta_T_K_;
  std::vector<double> delta_q_um_;
  std::vector<std::uint8_t> valid_;
  std::size_t first_valid_ = 0;
};

/// A single sensor or an unordered pair of sensors. Pairs are stored in
/// canonical order (lower id first) since the model is invariant under swap.
class SensorConfig {
public:
  static SensorConfig single(int id) {
    if (id < 1)
      fail(ErrorCode::config, "sensor ids start at 1");
    return SensorConfig(id, 0);
  }

  static SensorConfig pair(int i, int j) {
    if (i < 1 || j < 1)
      fail(ErrorCode::config, "sensor ids start at 1");
    if (i == j)
      fail(ErrorCode::config, "a sensor pair needs two distinct sensors");
    return i < j ? SensorConfig(i, j) : SensorConfig(j, i);
  }

  bool is_pair() const noexcept { return second_ != 0; }
  std::size_t arity() const noexcept { return is_pair() ? 2 : 1; }
  int first() const noexcept { return first_; }
  int second() const noexcept { return second_; }
  int sensor(std::size_t k) const noexcept { return k == 0 ? first_ : second_; }
  int max_sensor() const noexcept { return std::max(first_, second_); }

  std::string label() const {
    return is_pair() ? std::to_string(first_) + "-" + std::to_string(second_) : std::to_string(first_);
  }

  auto operator<=>(const SensorConfig&) const = default;

private:
  SensorConfig(int a, int b) : first_(a), second_(b) {}
  int first_;
  int second_; // 0 for single-sensor configurations
};

/// Coefficients attached to one sensor: `a` scales q0*dT (fixed part),
/// `b` scales q*dT (moving rod). Both in um / (mm * K).
struct SensorCoefficients {
  int sensor = 0;
  double a = 0.0;
  double b = 0.0;

  bool operator==(const SensorCoefficients&) const = default;
};

class ExpansionModel {
public:
  /// Terms may be given in any order; they are stored in canonical sensor order.
  ExpansionModel(std::vector<SensorCoefficients> terms, double q0_mm, std::vector<std::string> training_ids = {})
      : terms_(std::move(terms)), q0_mm_(q0_mm), training_ids_(std::move(training_ids)) {
    if (terms_.size() == 1)
      config_ = SensorConfig::single(terms_[0].sensor);
    else if (terms_.size() == 2)
      config_ = SensorConfig::pair(terms_[0].sensor, terms_[1].sensor);
    else
      fail(ErrorCode::config, "an expansion model uses one or two sensors");
    std::sort(terms_.begin(), terms_.end(), [](auto& l, auto& r) { return l.sensor < r.sensor; });
    if (!(q0_mm_ > 0.0) || !std::isfinite(q0_mm_))
      fail(ErrorCode::input, "q0 must be a positive length in mm");
    for (const auto& t : terms_)
      if (!std::isfinite(t.a) || !std::isfinite(t.b))
        fail(ErrorCode::input, "expansion coefficients must be finite");
  }

  const SensorConfig& config() const noexcept { return config_; }
  std::span<const SensorCoefficients> terms() const noexcept { return terms_; }
  double q0_mm() const noexcept { return q0_mm_; }

  /// Identity tags of the datasets the coefficients were identified on.
  std::span<const std::string> training_ids() const noexcept { return training_ids_; }

  ExpansionModel with_q0(double q0_mm) const { return ExpansionModel(terms_, q0_mm, training_ids_); }

  bool operator==(const ExpansionModel&) const = default;

private:
  std::vector<SensorCoefficients> terms_;
  SensorConfig config_ = SensorConfig::single(1);
  double q0_mm_;
  std::vector<std::string> training_ids_;
};

/// Predicted thermal expansion in um for rod displacement q (mm), given the
/// relative temperature of every sensor indexed by sensor id - 1.
inline double predict_expansion(const ExpansionModel& model, double q_mm, std::span<const double> delta_T_K) {
  if (static_cast<std::size_t>(model.config().max_sensor()) > delta_T_K.size())
    fail(ErrorCode::config, "no temperature supplied for sensor " + std::to_string(model.config().max_sensor()));
  const double q0 = model.q0_mm();
  double sum = 0.0;
  for (const auto& t : model.terms()) {
    const double dT = delta_T_K[static_cast<std::size_t>(t.sensor - 1)];
    sum += t.a * q0 * dT + t.b * q_mm * dT;
  }
  return sum;
}

struct ResidualNorms {
  double rmse = 0.0;
  double linf = 0.0;
};

/// RMSE = L2 / sqrt(p) and L-infinity of a residual vector.
inline ResidualNorms residual_norms(std::span<const double> residuals) {
  if (residuals.empty())
    fail(ErrorCode::domain, "residual norms of an empty vector are undefined");
  double ss = 0.0;
  double linf = 0.0;
  for (double r : residuals) {
    ss += r * r;
    linf = std::max(linf, std::abs(r));
  }
  const double l2 = std::sqrt(ss);
  // rmse <= linf holds exactly; the min only absorbs last-bit rounding when all |r| are equal
  return {std::min(l2 / std::sqrt(static_cast<double>(residuals.size())), linf), linf};
}

/// Residuals (measured - predicted) of one configuration on one or more datasets.
struct FitReport {
  std::vector<double> residuals_um;
  double rmse_um = 0.0;
  double linf_um = 0.0;
  std::size_t n_samples = 0;
  std::size_t n_outliers_removed = 0;

  bool operator==(const FitReport&) const = default;
};

inline FitReport make_fit_report(std::vector<double> residuals_um, std::size_t n_outliers_removed = 0) {
  const auto norms = residual_norms(residuals_um);
  FitReport r;
  r.n_samples = residuals_um.size();
  r.residuals_um = std::move(residuals_um);
  r.rmse_um = norms.rmse;
  r.linf_um = norms.linf;
  r.n_outliers_removed = n_outliers_removed;
  return r;
}

} // namespace thermocal
