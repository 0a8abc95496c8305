#pragma once

// JSON documents for models, fit reports, ranking results and validation
// reports. Field names carry their unit suffix (rmse_um, q0_mm, ...).

#include "thermocal/core.hpp"
#include "thermocal/io.hpp"
#include "thermocal/selection.hpp"
#include "thermocal/validation.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace thermocal {

using Json = nlohmann::ordered_json;

namespace detail {

inline Json nullable(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }
inline Json nullable(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

template <typename T>
T require(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key))
    fail(ErrorCode::input, std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    fail(ErrorCode::input, std::string("field '") + key + "' has the wrong type");
  }
}

} // namespace detail

inline Json config_to_json(const SensorConfig& c) {
  Json j;
  j["kind"] = c.is_pair() ? "pair" : "single";
  j["label"] = c.label();
  j["sensors"] = c.is_pair() ? Json::array({c.first(), c.second()}) : Json::array({c.first()});
  return j;
}

inline SensorConfig config_from_json(const Json& j) {
  const auto sensors = detail::require<std::vector<int>>(j, "sensors");
  if (sensors.size() == 1)
    return SensorConfig::single(sensors[0]);
  if (sensors.size() == 2)
    return SensorConfig::pair(sensors[0], sensors[1]);
  fail(ErrorCode::input, "a sensor configuration lists one or two sensors");
}

inline Json model_to_json(const ExpansionModel& m) {
  Json j;
  j["config"] = config_to_json(m.config());
  j["q0_mm"] = m.q0_mm();
  Json terms = Json::array();
  for (const auto& t : m.terms())
    terms.push_back({{"sensor", t.sensor}, {"A_um_per_mm_K", t.a}, {"B_um_per_mm_K", t.b}});
  j["coefficients"] = terms;
  j["training_ids"] = std::vector<std::string>(m.training_ids().begin(), m.training_ids().end());
  return j;
}

inline ExpansionModel model_from_json(const Json& j) {
  std::vector<SensorCoefficients> terms;
  const auto& arr = j.contains("coefficients") ? j.at("coefficients") : Json();
  if (!arr.is_array())
    fail(ErrorCode::input, "model needs a coefficients array");
  for (const auto& t : arr)
    terms.push_back({detail::require<int>(t, "sensor"), detail::require<double>(t, "A_um_per_mm_K"),
                     detail::require<double>(t, "B_um_per_mm_K")});
  std::vector<std::string> ids;
  if (j.contains("training_ids"))
    ids = detail::require<std::vector<std::string>>(j, "training_ids");
  ExpansionModel model(std::move(terms), detail::require<double>(j, "q0_mm"), std::move(ids));
  if (j.contains("config") && config_from_json(j.at("config")) != model.config())
    fail(ErrorCode::input, "model config does not match its coefficients");
  return model;
}

inline Json fit_report_to_json(const FitReport& r) {
  Json j;
  j["rmse_um"] = r.rmse_um;
  j["linf_um"] = r.linf_um;
  j["n_samples"] = r.n_samples;
  j["n_outliers_removed"] = r.n_outliers_removed;
  j["residuals_um"] = r.residuals_um;
  return j;
}

inline FitReport fit_report_from_json(const Json& j) {
  FitReport r;
  r.rmse_um = detail::require<double>(j, "rmse_um");
  r.linf_um = detail::require<double>(j, "linf_um");
  r.n_samples = detail::require<std::size_t>(j, "n_samples");
  r.n_outliers_removed = detail::require<std::size_t>(j, "n_outliers_removed");
  r.residuals_um = detail::require<std::vector<double>>(j, "residuals_um");
  if (r.residuals_um.size() != r.n_samples)
    fail(ErrorCode::input, "fit report residual count does not match n_samples");
  return r;
}

/// Model file written by `fit`: {"model": ..., "fit_report": ..., ...}. A bare
/// model object is accepted as well.
inline ExpansionModel read_model(const std::filesystem::path& path) {
  Json j;
  try {
    j = Json::parse(detail::read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCode::input, "'" + path.string() + "' is not valid JSON: " + e.what());
  }
  return model_from_json(j.contains("model") ? j.at("model") : j);
}

inline Json pareto_to_json(const ParetoResult& p) {
  Json front = Json::array();
  for (const auto& e : p.front)
    front.push_back({{"config", config_to_json(e.config)}, {"rmse_um", e.rmse_um}, {"linf_um", e.linf_um}});
  return {{"front", front}, {"dominated_count", p.dominated_count}};
}

namespace detail {

inline Json square(std::span<const double> values, int n) {
  Json rows = Json::array();
  for (int i = 0; i < n; ++i) {
    Json row = Json::array();
    for (int j = 0; j < n; ++j)
      row.push_back(nullable(values[static_cast<std::size_t>(i * n + j)]));
    rows.push_back(row);
  }
  return rows;
}

} // namespace detail

inline Json criteria_to_json(const CriteriaMatrices& m) {
  Json j;
  j["n_sensors"] = m.n();
  j["fits_executed"] = m.fits_executed;
  j["rmse_um"] = detail::square(m.rmse_data(), m.n());
  j["linf_um"] = detail::square(m.linf_data(), m.n());
  Json status = Json::array();
  for (int i = 0; i < m.n(); ++i) {
    Json row = Json::array();
    for (int k = 0; k < m.n(); ++k)
      row.push_back(m.status(i, k) == CellStatus::ok ? "ok" : "degenerate");
    status.push_back(row);
  }
  j["status"] = status;
  // sentinel cells are written as null
  auto display = [&](std::span<const double> v) {
    auto norm = normalize_for_display(v, m.status_data());
    for (auto& x : norm)
      if (x == kDegenerateSentinel)
        x = std::numeric_limits<double>::quiet_NaN();
    return detail::square(norm, m.n());
  };
  j["rmse_normalized"] = display(m.rmse_data());
  j["linf_normalized"] = display(m.linf_data());
  return j;
}

/// One row per upper-triangle cell, for external plotting.
inline std::string criteria_to_csv(const CriteriaMatrices& m, const ParetoResult* pareto = nullptr) {
  const auto rn = normalize_for_display(m.rmse_data(), m.status_data());
  const auto ln = normalize_for_display(m.linf_data(), m.status_data());
  std::string out = "sensor_i,sensor_j,kind,status,rmse_um,linf_um,rmse_norm,linf_norm,pareto\n";
  for (int i = 0; i < m.n(); ++i)
    for (int j = i; j < m.n(); ++j) {
      const auto idx = static_cast<std::size_t>(i * m.n() + j);
      const bool ok = m.status(i, j) == CellStatus::ok;
      bool on_front = false;
      if (pareto)
        for (const auto& e : pareto->front)
          on_front = on_front || e.config == CriteriaMatrices::config_of(i, j);
      out += std::to_string(i + 1) + "," + std::to_string(j + 1) + "," + (i == j ? "single" : "pair") + "," +
             (ok ? "ok" : "degenerate") + ",";
      out += ok ? format_double(m.rmse(i, j)) + "," + format_double(m.linf(i, j)) + "," + format_double(rn[idx]) +
                      "," + format_double(ln[idx])
                : std::string(",,,");
      out += on_front ? ",1\n" : ",0\n";
    }
  return out;
}

inline Json drift_to_json(const DriftStatistics& s) {
  Json j;
  j["n_samples"] = s.n_samples;
  j["max_drift_um"] = s.max_drift_um;
  j["max_residual_um"] = s.max_residual_um;
  j["mean_abs_drift_um"] = s.mean_abs_drift_um;
  j["mean_abs_residual_um"] = s.mean_abs_residual_um;
  j["reduction_max_pct"] = detail::nullable(s.reduction_max_pct);
  j["reduction_mean_pct"] = detail::nullable(s.reduction_mean_pct);
  return j;
}

inline Json validation_to_json(const ValidationReport& r) {
  Json j;
  j["config"] = config_to_json(r.config);
  Json scenarios = Json::array();
  for (const auto& s : r.scenarios) {
    Json e = {{"id", s.id}};
    e.update(drift_to_json(s.stats));
    scenarios.push_back(e);
  }
  j["scenarios"] = scenarios;
  j["pooled"] = drift_to_json(r.pooled);
  return j;
}

inline std::string trace_to_csv(std::span<const std::pair<std::string, std::vector<TraceSample>>> traces) {
  std::string out = "scenario,time_s,q_mm,valid,measured_um,predicted_um,residual_um\n";
  for (const auto& [id, rows] : traces)
    for (const auto& s : rows)
      out += id + "," + format_double(s.time_s) + "," + format_double(s.q_mm) + (s.valid ? ",1," : ",0,") +
             format_double(s.measured_um) + "," + format_double(s.predicted_um) + "," + format_double(s.residual_um) +
             "\n";
  return out;
}

/// Pretty-printed JSON with a trailing newline.
inline std::string dump(const Json& j) { return j.dump(2) + "\n"; }

inline void write_json(const std::filesystem::path& path, const Json& j) { atomic_write(path, dump(j)); }

} // namespace thermocal
