#pragma once

// Least-squares identification of the expansion coefficients of one sensor
// configuration, with a single MAD-based outlier rejection pass.

#include "thermocal/core.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace thermocal {

/// Condition number above which a design is treated as rank deficient.
inline constexpr double kMaxConditionNumber = 1e12;

struct OutlierPolicy {
  double c = 5.0; // threshold in robust standard deviations; 0 disables removal
};

/// Regression design: one row per valid sample, columns
/// [q0*dT_i, q*dT_i, q0*dT_j, q*dT_j] (the last two for pairs only).
struct Design {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  std::vector<std::string> columns;
};

inline std::vector<std::string> design_columns(const SensorConfig& config) {
  std::vector<std::string> names;
  for (std::size_t s = 0; s < config.arity(); ++s) {
    const auto id = std::to_string(config.sensor(s));
    names.push_back("q0*dT" + id);
    names.push_back("q*dT" + id);
  }
  return names;
}

/// Stacks the valid samples of every dataset into one design. All datasets
/// must describe the same leg, i.e. share q0.
inline Design build_design(std::span<const ScenarioDataset> datasets, const SensorConfig& config) {
  if (datasets.empty())
    fail(ErrorCode::input, "no dataset to build a design from");
  const double q0 = datasets.front().q0_mm();
  std::size_t rows = 0;
  for (const auto& ds : datasets) {
    if (ds.q0_mm() != q0)
      fail(ErrorCode::input, "training datasets disagree on q0 ('" + ds.id() + "')");
    if (config.max_sensor() > ds.n_sensors())
      fail(ErrorCode::config, "dataset '" + ds.id() + "' has no sensor " + std::to_string(config.max_sensor()));
    rows += ds.valid_count();
  }
  const auto k = static_cast<Eigen::Index>(2 * config.arity());
  if (static_cast<Eigen::Index>(rows) < k)
    fail(ErrorCode::degenerate, "insufficient data: " + std::to_string(rows) + " valid samples for " +
                                    std::to_string(k) + " coefficients");
  Design d{Eigen::MatrixXd(static_cast<Eigen::Index>(rows), k), Eigen::VectorXd(static_cast<Eigen::Index>(rows)),
           design_columns(config)};
  Eigen::Index r = 0;
  for (const auto& ds : datasets) {
    const auto q = ds.q_mm();
    const auto y = ds.delta_q_um();
    for (std::size_t i = 0; i < ds.size(); ++i) {
      if (!ds.is_valid(i))
        continue;
      for (std::size_t s = 0; s < config.arity(); ++s) {
        const double dT = ds.delta_T_K(config.sensor(s))[i];
        d.x(r, static_cast<Eigen::Index>(2 * s)) = q0 * dT;
        d.x(r, static_cast<Eigen::Index>(2 * s + 1)) = q[i] * dT;
      }
      d.y(r) = y[i];
      ++r;
    }
  }
  return d;
}

inline Design build_design(const ScenarioDataset& dataset, const SensorConfig& config) {
  return build_design(std::span<const ScenarioDataset>(&dataset, 1), config);
}

struct LeastSquaresSolution {
  Eigen::VectorXd coeffs;
  double condition_number = 0.0; // of the column-equilibrated design
};

/// Minimises ||x b - y||_2 by Householder QR of the column-equilibrated
/// design. Throws a degenerate-data error naming the offending columns when a
/// column vanishes or the condition number exceeds kMaxConditionNumber.
inline LeastSquaresSolution solve_least_squares(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                                std::span<const std::string> names = {}) {
  const Eigen::Index k = x.cols();
  auto name = [&](Eigen::Index c) {
    return c < static_cast<Eigen::Index>(names.size()) ? names[static_cast<std::size_t>(c)]
                                                       : "column " + std::to_string(c);
  };
  if (x.rows() < k)
    fail(ErrorCode::degenerate, "insufficient data: fewer rows than coefficients");

  Eigen::VectorXd scale(k);
  std::string zero_cols;
  for (Eigen::Index c = 0; c < k; ++c) {
    scale(c) = x.col(c).norm();
    if (!(scale(c) > 0.0))
      zero_cols += (zero_cols.empty() ? "" : ", ") + name(c);
  }
  if (!zero_cols.empty())
    fail(ErrorCode::degenerate, "degenerate data: all-zero design columns [" + zero_cols + "]");

  const Eigen::MatrixXd xs = x * scale.cwiseInverse().asDiagonal();
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(xs);
  const Eigen::MatrixXd r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(r, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double cond = sv(k - 1) > 0.0 ? sv(0) / sv(k - 1) : std::numeric_limits<double>::infinity();
  if (!(cond <= kMaxConditionNumber)) {
    // columns participating in the near-null direction
    const Eigen::VectorXd v = svd.matrixV().col(k - 1);
    std::string cols;
    for (Eigen::Index c = 0; c < k; ++c)
      if (std::abs(v(c)) > 0.1)
        cols += (cols.empty() ? "" : ", ") + name(c);
    fail(ErrorCode::degenerate, "degenerate data: collinear design columns [" + cols + "], condition number " +
                                    std::to_string(cond));
  }
  Eigen::VectorXd b = qr.solve(y);
  return {b.cwiseQuotient(scale), cond};
}

struct FitResult {
  ExpansionModel model;
  FitReport report;
};

namespace detail {

inline double median(std::vector<double> v) {
  const auto mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1)
    return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

/// 1.4826 * MAD, floored relative to the response scale so that round-off
/// residuals of an exact fit never count as outliers.
inline double robust_sigma(const Eigen::VectorXd& residuals, const Eigen::VectorXd& y) {
  std::vector<double> r(residuals.data(), residuals.data() + residuals.size());
  const double med = median(r);
  for (auto& v : r)
    v = std::abs(v - med);
  const double floor = 1e-9 * y.cwiseAbs().maxCoeff();
  return std::max(1.4826 * median(std::move(r)), floor);
}

inline ExpansionModel to_model(const SensorConfig& config, const Eigen::VectorXd& b, double q0,
                               std::vector<std::string> training_ids) {
  std::vector<SensorCoefficients> terms;
  for (std::size_t s = 0; s < config.arity(); ++s)
    terms.push_back({config.sensor(s), b(static_cast<Eigen::Index>(2 * s)), b(static_cast<Eigen::Index>(2 * s + 1))});
  return ExpansionModel(std::move(terms), q0, std::move(training_ids));
}

} // namespace detail

/// Identifies the coefficients of `config` on the concatenated valid samples
/// of `datasets`. With outliers enabled, the model is fitted once, samples
/// whose residual exceeds c robust standard deviations are discarded, and the
/// model is refitted once on the rest. The report describes the final fit.
inline FitResult fit(std::span<const ScenarioDataset> datasets, const SensorConfig& config,
                     const OutlierPolicy& policy = {}) {
  Design d = build_design(datasets, config);
  auto sol = solve_least_squares(d.x, d.y, d.columns);
  Eigen::VectorXd residuals = d.y - d.x * sol.coeffs;
  std::size_t removed = 0;

  if (policy.c > 0.0) {
    const double threshold = policy.c * detail::robust_sigma(residuals, d.y);
    std::vector<Eigen::Index> keep;
    keep.reserve(static_cast<std::size_t>(d.y.size()));
    for (Eigen::Index i = 0; i < residuals.size(); ++i)
      if (std::abs(residuals(i)) <= threshold)
        keep.push_back(i);
    removed = static_cast<std::size_t>(d.y.size()) - keep.size();
    if (removed > 0) {
      Eigen::MatrixXd x(static_cast<Eigen::Index>(keep.size()), d.x.cols());
      Eigen::VectorXd y(static_cast<Eigen::Index>(keep.size()));
      for (std::size_t r = 0; r < keep.size(); ++r) {
        x.row(static_cast<Eigen::Index>(r)) = d.x.row(keep[r]);
        y(static_cast<Eigen::Index>(r)) = d.y(keep[r]);
      }
      sol = solve_least_squares(x, y, d.columns);
      residuals = y - x * sol.coeffs;
    }
  }

  std::vector<std::string> ids;
  for (const auto& ds : datasets)
    ids.push_back(ds.id());
  return {detail::to_model(config, sol.coeffs, datasets.front().q0_mm(), std::move(ids)),
          make_fit_report(std::vector<double>(residuals.data(), residuals.data() + residuals.size()), removed)};
}

inline FitResult fit(const ScenarioDataset& dataset, const SensorConfig& config, const OutlierPolicy& policy = {}) {
  return fit(std::span<const ScenarioDataset>(&dataset, 1), config, policy);
}

/// Model prediction at every sample of a dataset (valid or not), in um.
inline std::vector<double> predict_series(const ExpansionModel& model, const ScenarioDataset& ds) {
  if (model.config().max_sensor() > ds.n_sensors())
    fail(ErrorCode::config, "dataset '" + ds.id() + "' has no sensor " + std::to_string(model.config().max_sensor()));
  std::vector<double> dT(static_cast<std::size_t>(ds.n_sensors()));
  std::vector<double> out(ds.size());
  for (std::size_t k = 0; k < ds.size(); ++k) {
    ds.temperatures_at(k, dT);
    out[k] = predict_expansion(model, ds.q_mm()[k], dT);
  }
  return out;
}

/// Residuals of a frozen model on the valid samples of `datasets`; no refit.
inline FitReport evaluate(const ExpansionModel& model, std::span<const ScenarioDataset> datasets) {
  std::vector<double> residuals;
  for (const auto& ds : datasets) {
    const auto predicted = predict_series(model, ds);
    for (std::size_t k = 0; k < ds.size(); ++k)
      if (ds.is_valid(k))
        residuals.push_back(ds.delta_q_um()[k] - predicted[k]);
  }
  if (residuals.empty())
    fail(ErrorCode::input, "no valid sample to evaluate the model on");
  return make_fit_report(std::move(residuals));
}

inline FitReport evaluate(const ExpansionModel& model, const ScenarioDataset& dataset) {
  return evaluate(model, std::span<const ScenarioDataset>(&dataset, 1));
}

} // namespace thermocal
