#pragma once

// Setpoint correction: commands the position that, once thermally expanded,
// lands on the requested setpoint.

#include "thermocal/core.hpp"

#include <cmath>
#include <span>
#include <vector>

namespace thermocal {

struct CorrectionLimits {
  double stroke_mm = kDefaultStrokeMm;
  double tolerance_mm = 1e-6;
  int max_iterations = 10;
};

enum class CorrectionStatus {
  ok,
  out_of_stroke, // corrected value left the stroke; q_mm holds the uncorrected setpoint
};

struct CorrectedSetpoint {
  double q_mm = 0.0;
  CorrectionStatus status = CorrectionStatus::ok;
  int iterations = 0;
};

/// Solves q = q_setpoint - predict(q) / 1000 by fixed-point iteration from
/// q_setpoint. The expansion depends on q through the moving-rod term, so the
/// corrected command is the position whose expanded length equals the
/// setpoint. Does not allocate.
inline CorrectedSetpoint correct_setpoint(const ExpansionModel& model, double q_setpoint_mm,
                                          std::span<const double> delta_T_K, const CorrectionLimits& limits = {}) {
  if (!(q_setpoint_mm >= 0.0 && q_setpoint_mm <= limits.stroke_mm))
    fail(ErrorCode::range, "setpoint " + std::to_string(q_setpoint_mm) + " mm outside stroke");
  double q = q_setpoint_mm;
  for (int it = 1; it <= limits.max_iterations; ++it) {
    const double next = q_setpoint_mm - predict_expansion(model, q, delta_T_K) / 1000.0;
    if (!std::isfinite(next))
      break;
    const bool converged = std::abs(next - q) < limits.tolerance_mm;
    q = next;
    if (converged) {
      if (q < 0.0 || q > limits.stroke_mm)
        return {q_setpoint_mm, CorrectionStatus::out_of_stroke, it};
      return {q, CorrectionStatus::ok, it};
    }
  }
  fail(ErrorCode::numeric, "setpoint correction did not converge");
}

struct BatchOptions {
  CorrectionLimits limits;
  /// Trailing moving-average length applied to temperatures; 0 or 1 disables it.
  std::size_t smoothing_samples = 0;
};

struct BatchCorrection {
  TimeSeries corrected;               // mm, validity copied from the setpoint trace
  std::vector<std::uint8_t> fallback; // 1 where the uncorrected setpoint was kept
};

namespace detail {

/// Streaming trailing mean over the last `window` samples of each sensor.
class TrailingMean {
public:
  TrailingMean(std::size_t sensors, std::size_t window) : window_(window), sums_(sensors, 0.0) {}

  void push(std::span<const double> sample, std::span<const std::vector<double>> history, std::size_t k,
            std::span<double> out) {
    const std::size_t len = std::min(window_, k + 1);
    for (std::size_t s = 0; s < sums_.size(); ++s) {
      sums_[s] += sample[s];
      if (k >= window_)
        sums_[s] -= history[s][k - window_];
      out[s] = sums_[s] / static_cast<double>(len);
    }
  }

private:
  std::size_t window_;
  std::vector<double> sums_;
};

} // namespace detail

/// Per-sample correction of a setpoint trace with aligned temperature traces.
inline BatchCorrection batch_correct(const ExpansionModel& model, const TimeSeries& setpoint,
                                     std::span<const TimeSeries> thermals, const BatchOptions& options = {}) {
  const std::size_t n = setpoint.size();
  for (const auto& col : thermals)
    if (col.size() != n)
      fail(ErrorCode::input, "temperature traces are not aligned with the setpoint trace");
  if (static_cast<std::size_t>(model.config().max_sensor()) > thermals.size())
    fail(ErrorCode::config, "no temperature trace for sensor " + std::to_string(model.config().max_sensor()));

  std::vector<std::vector<double>> history(thermals.size());
  for (std::size_t s = 0; s < thermals.size(); ++s)
    history[s].assign(thermals[s].values().begin(), thermals[s].values().end());

  const bool smooth = options.smoothing_samples > 1;
  detail::TrailingMean mean(thermals.size(), options.smoothing_samples);
  std::vector<double> raw(thermals.size());
  std::vector<double> dT(thermals.size());
  std::vector<double> q(n);
  std::vector<std::uint8_t> fallback(n);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t s = 0; s < thermals.size(); ++s)
      raw[s] = history[s][k];
    if (smooth)
      mean.push(raw, history, k, dT);
    else
      dT = raw;
    const auto c = correct_setpoint(model, setpoint[k], dT, options.limits);
    q[k] = c.q_mm;
    fallback[k] = c.status == CorrectionStatus::out_of_stroke ? 1 : 0;
  }
  return {TimeSeries(setpoint.t0(), setpoint.dt(), std::move(q),
                     std::vector<std::uint8_t>(setpoint.valid().begin(), setpoint.valid().end()), Unit::millimetre),
          std::move(fallback)};
}

/// Corrects the q column of a dataset using its own temperature columns.
inline BatchCorrection batch_correct(const ExpansionModel& model, const ScenarioDataset& ds,
                                     const BatchOptions& options = {}) {
  const auto t = ds.time_s();
  const double dt = ds.size() > 1 ? t[1] - t[0] : 1.0;
  TimeSeries setpoint(t[0], dt, std::vector<double>(ds.q_mm().begin(), ds.q_mm().end()),
                      std::vector<std::uint8_t>(ds.valid().begin(), ds.valid().end()), Unit::millimetre);
  std::vector<TimeSeries> thermals;
  for (int s = 1; s <= ds.n_sensors(); ++s) {
    const auto col = ds.delta_T_K(s);
    thermals.emplace_back(t[0], dt, std::vector<double>(col.begin(), col.end()), Unit::kelvin);
  }
  return batch_correct(model, setpoint, thermals, options);
}

} // namespace thermocal
