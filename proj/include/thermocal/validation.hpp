#pragma once

// Cross-validation of frozen models on held-out scenarios and the drift
// reduction statistics reported for them.

#include "thermocal/regression.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace thermocal {

/// Drift is |measured expansion|, residual is |measured - predicted|, both over
/// valid samples. Reductions are undefined (nullopt) when the drift is zero.
struct DriftStatistics {
  std::size_t n_samples = 0;
  double max_drift_um = 0.0;
  double max_residual_um = 0.0;
  double mean_abs_drift_um = 0.0;
  double mean_abs_residual_um = 0.0;
  std::optional<double> reduction_max_pct;
  std::optional<double> reduction_mean_pct;

  bool operator==(const DriftStatistics&) const = default;
};

inline std::optional<double> reduction_pct(double drift_um, double residual_um) {
  if (!(drift_um > 0.0))
    return std::nullopt;
  return 100.0 * (1.0 - residual_um / drift_um);
}

inline DriftStatistics drift_statistics(std::span<const double> measured_um, std::span<const double> residual_um) {
  if (measured_um.size() != residual_um.size())
    fail(ErrorCode::input, "measured and residual series differ in length");
  if (measured_um.empty())
    fail(ErrorCode::domain, "drift statistics of an empty series are undefined");
  DriftStatistics s;
  s.n_samples = measured_um.size();
  double sum_d = 0.0;
  double sum_r = 0.0;
  for (std::size_t k = 0; k < measured_um.size(); ++k) {
    const double d = std::abs(measured_um[k]);
    const double r = std::abs(residual_um[k]);
    s.max_drift_um = std::max(s.max_drift_um, d);
    s.max_residual_um = std::max(s.max_residual_um, r);
    sum_d += d;
    sum_r += r;
  }
  const auto n = static_cast<double>(s.n_samples);
  s.mean_abs_drift_um = sum_d / n;
  s.mean_abs_residual_um = sum_r / n;
  s.reduction_max_pct = reduction_pct(s.max_drift_um, s.max_residual_um);
  s.reduction_mean_pct = reduction_pct(s.mean_abs_drift_um, s.mean_abs_residual_um);
  return s;
}

struct ScenarioValidation {
  std::string id;
  DriftStatistics stats;

  bool operator==(const ScenarioValidation&) const = default;
};

struct ValidationReport {
  SensorConfig config = SensorConfig::single(1);
  std::vector<ScenarioValidation> scenarios;
  DriftStatistics pooled; // every valid sample of every scenario

  bool operator==(const ValidationReport&) const = default;
};

struct ValidationOptions {
  /// Allows scoring a model on its own training data (in-sample check).
  bool permit_training_overlap = false;
};

/// One row of a measured / predicted / residual trace.
struct TraceSample {
  double time_s;
  double q_mm;
  bool valid;
  double measured_um;
  double predicted_um;
  double residual_um;
};

inline std::vector<TraceSample> validation_trace(const ExpansionModel& model, const ScenarioDataset& ds) {
  const auto predicted = predict_series(model, ds);
  std::vector<TraceSample> out(ds.size());
  for (std::size_t k = 0; k < ds.size(); ++k) {
    const double m = ds.delta_q_um()[k];
    out[k] = {ds.time_s()[k], ds.q_mm()[k], ds.is_valid(k), m, predicted[k], m - predicted[k]};
  }
  return out;
}

/// Applies the frozen model to every scenario. Scenarios whose identity tag
/// appears among the model's training ids are refused with a leakage error.
inline ValidationReport cross_validate(const ExpansionModel& model, std::span<const ScenarioDataset> scenarios,
                                       const ValidationOptions& options = {}) {
  if (scenarios.empty())
    fail(ErrorCode::input, "no validation scenario");
  if (!options.permit_training_overlap) {
    const std::set<std::string> trained(model.training_ids().begin(), model.training_ids().end());
    for (const auto& ds : scenarios)
      if (trained.contains(ds.id()))
        fail(ErrorCode::leakage, "scenario '" + ds.id() + "' was used to train the model");
  }
  ValidationReport report;
  report.config = model.config();
  std::vector<double> all_measured;
  std::vector<double> all_residual;
  for (const auto& ds : scenarios) {
    std::vector<double> measured;
    std::vector<double> residual;
    for (const auto& s : validation_trace(model, ds))
      if (s.valid) {
        measured.push_back(s.measured_um);
        residual.push_back(s.residual_um);
      }
    report.scenarios.push_back({ds.id(), drift_statistics(measured, residual)});
    all_measured.insert(all_measured.end(), measured.begin(), measured.end());
    all_residual.insert(all_residual.end(), residual.begin(), residual.end());
  }
  report.pooled = drift_statistics(all_measured, all_residual);
  return report;
}

} // namespace thermocal
