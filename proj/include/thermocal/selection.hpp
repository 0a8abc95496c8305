#pragma once

// Exhaustive ranking of sensor configurations (every single sensor and every
// unordered pair) and extraction of the (RMSE, L-infinity) Pareto front.

#include "thermocal/regression.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <span>
#include <thread>
#include <vector>

namespace thermocal {

/// Largest configuration size evaluated. The enumeration below is written
/// against this constant; raising it needs a k-subset enumerator and wider
/// SensorConfig.
inline constexpr std::size_t kMaxConfigArity = 2;

enum class CellStatus { ok, degenerate };

/// Symmetric n x n criteria matrices. Cell (i, j) with i != j holds the pair
/// (i+1, j+1); the diagonal holds single sensors. Indices are 0-based.
class CriteriaMatrices {
public:
  explicit CriteriaMatrices(int n)
      : n_(n), rmse_(cells(n), std::numeric_limits<double>::quiet_NaN()),
        linf_(cells(n), std::numeric_limits<double>::quiet_NaN()), status_(cells(n), CellStatus::degenerate) {
    if (n < 1)
      fail(ErrorCode::input, "criteria matrices need at least one sensor");
  }

  int n() const noexcept { return n_; }
  double rmse(int i, int j) const { return rmse_[index(i, j)]; }
  double linf(int i, int j) const { return linf_[index(i, j)]; }
  CellStatus status(int i, int j) const { return status_[index(i, j)]; }

  /// Sensor configuration represented by cell (i, j).
  static SensorConfig config_of(int i, int j) {
    return i == j ? SensorConfig::single(i + 1) : SensorConfig::pair(i + 1, j + 1);
  }

  /// Writes both (i, j) and (j, i).
  void set(int i, int j, CellStatus status, double rmse, double linf) {
    for (auto idx : {index(i, j), index(j, i)}) {
      status_[idx] = status;
      rmse_[idx] = rmse;
      linf_[idx] = linf;
    }
  }

  std::span<const double> rmse_data() const noexcept { return rmse_; }
  std::span<const double> linf_data() const noexcept { return linf_; }
  std::span<const CellStatus> status_data() const noexcept { return status_; }

  std::size_t fits_executed = 0;

private:
  static std::size_t cells(int n) { return n > 0 ? static_cast<std::size_t>(n) * static_cast<std::size_t>(n) : 0; }
  std::size_t index(int i, int j) const {
    if (i < 0 || j < 0 || i >= n_ || j >= n_)
      fail(ErrorCode::input, "criteria cell out of range");
    return static_cast<std::size_t>(i) * static_cast<std::size_t>(n_) + static_cast<std::size_t>(j);
  }

  int n_;
  std::vector<double> rmse_;
  std::vector<double> linf_;
  std::vector<CellStatus> status_;
};

struct RankOptions {
  OutlierPolicy outliers;
  unsigned threads = 1;
};

/// Default per-cell evaluation: a full regression fit.
struct RegressionFitter {
  FitReport operator()(std::span<const ScenarioDataset> datasets, const SensorConfig& config,
                       const OutlierPolicy& policy) const {
    return fit(datasets, config, policy).report;
  }
};

/// Fits every single sensor and every unordered pair, n(n+1)/2 fits in total.
/// Cells are independent; with threads > 1 they are evaluated concurrently and
/// stored by index, so the result does not depend on scheduling. A cell whose
/// fit reports degenerate data is marked and left NaN.
template <typename Fitter = RegressionFitter>
CriteriaMatrices rank_all(std::span<const ScenarioDataset> datasets, const RankOptions& options = {},
                          Fitter&& fitter = Fitter{}) {
  if (datasets.empty())
    fail(ErrorCode::input, "no dataset to rank");
  int n = datasets.front().n_sensors();
  for (const auto& ds : datasets)
    n = std::min(n, ds.n_sensors());
  CriteriaMatrices m(n);

  std::vector<std::pair<int, int>> cells;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j)
      cells.emplace_back(i, j);

  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> executed{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t c = next.fetch_add(1);
      if (c >= cells.size())
        return;
      const auto [i, j] = cells[c];
      try {
        const FitReport r = fitter(datasets, CriteriaMatrices::config_of(i, j), options.outliers);
        executed.fetch_add(1);
        m.set(i, j, CellStatus::ok, r.rmse_um, r.linf_um);
      } catch (const Error& e) {
        executed.fetch_add(1);
        if (e.code() != ErrorCode::degenerate) {
          std::lock_guard lock(error_mutex);
          if (!error)
            error = std::current_exception();
        }
      }
    }
  };
  const unsigned threads = std::max(1u, options.threads);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t)
      pool.emplace_back(worker);
  }
  if (error)
    std::rethrow_exception(error);
  m.fits_executed = executed.load();
  return m;
}

inline CriteriaMatrices rank_all(const ScenarioDataset& dataset, const RankOptions& options = {}) {
  return rank_all(std::span<const ScenarioDataset>(&dataset, 1), options);
}

// ---------------------------------------------------------------------------
// Pareto front

struct Criteria2 {
  double rmse;
  double linf;
};

/// a dominates b: no worse on both criteria and strictly better on one.
constexpr bool dominates(const Criteria2& a, const Criteria2& b) noexcept {
  return a.rmse <= b.rmse && a.linf <= b.linf && (a.rmse < b.rmse || a.linf < b.linf);
}

/// Indices of the nondominated points, ordered by (rmse, linf, index).
/// Points tied on both criteria are all kept.
inline std::vector<std::size_t> nondominated(std::span<const Criteria2> points) {
  std::vector<std::size_t> order(points.size());
  for (std::size_t i = 0; i < order.size(); ++i)
    order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (points[a].rmse != points[b].rmse)
      return points[a].rmse < points[b].rmse;
    if (points[a].linf != points[b].linf)
      return points[a].linf < points[b].linf;
    return a < b;
  });
  // Sweep groups of equal rmse. Within a group only the minimal linf survives;
  // it is nondominated iff it beats every linf seen at strictly smaller rmse.
  std::vector<std::size_t> front;
  double best_linf = std::numeric_limits<double>::infinity();
  for (std::size_t g = 0; g < order.size();) {
    std::size_t end = g;
    while (end < order.size() && points[order[end]].rmse == points[order[g]].rmse)
      ++end;
    const double group_min = points[order[g]].linf;
    if (group_min < best_linf) {
      for (std::size_t k = g; k < end && points[order[k]].linf == group_min; ++k)
        front.push_back(order[k]);
      best_linf = group_min;
    }
    g = end;
  }
  return front;
}

struct ParetoEntry {
  SensorConfig config;
  double rmse_um;
  double linf_um;

  bool operator==(const ParetoEntry&) const = default;
};

struct ParetoResult {
  std::vector<ParetoEntry> front; // ascending rmse
  std::size_t dominated_count = 0;
};

/// Nondominated configurations among the ok cells of the upper triangle.
inline ParetoResult pareto_front(const CriteriaMatrices& m) {
  std::vector<SensorConfig> configs;
  std::vector<Criteria2> points;
  for (int i = 0; i < m.n(); ++i)
    for (int j = i; j < m.n(); ++j)
      if (m.status(i, j) == CellStatus::ok) {
        configs.push_back(CriteriaMatrices::config_of(i, j));
        points.push_back({m.rmse(i, j), m.linf(i, j)});
      }
  if (points.empty())
    fail(ErrorCode::degenerate, "every configuration is degenerate; the Pareto front is empty");
  ParetoResult result;
  for (auto idx : nondominated(points))
    result.front.push_back({configs[idx], points[idx].rmse, points[idx].linf});
  result.dominated_count = points.size() - result.front.size();
  return result;
}

/// Lowest-RMSE single sensor, ties broken by L-infinity then id.
inline std::optional<ParetoEntry> best_single(const CriteriaMatrices& m) {
  std::optional<ParetoEntry> best;
  for (int i = 0; i < m.n(); ++i) {
    if (m.status(i, i) != CellStatus::ok)
      continue;
    ParetoEntry e{SensorConfig::single(i + 1), m.rmse(i, i), m.linf(i, i)};
    if (!best || e.rmse_um < best->rmse_um || (e.rmse_um == best->rmse_um && e.linf_um < best->linf_um))
      best = e;
  }
  return best;
}

inline constexpr double kDegenerateSentinel = -1.0;

/// Min-max normalisation over the ok cells of one matrix, for heat maps.
/// Degenerate cells map to kDegenerateSentinel; a constant matrix maps to 0.
inline std::vector<double> normalize_for_display(std::span<const double> values, std::span<const CellStatus> status) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < values.size(); ++k)
    if (status[k] == CellStatus::ok) {
      lo = std::min(lo, values[k]);
      hi = std::max(hi, values[k]);
    }
  std::vector<double> out(values.size(), kDegenerateSentinel);
  for (std::size_t k = 0; k < values.size(); ++k)
    if (status[k] == CellStatus::ok)
      out[k] = hi > lo ? (values[k] - lo) / (hi - lo) : 0.0;
  return out;
}

} // namespace thermocal
